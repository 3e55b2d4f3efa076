"""Per-iteration cost of the sampler as the number of locations grows.

    python scripts/scaling_benchmark.py --sizes 100 200 500 1000 --m 13
"""

import argparse
import time

import numpy as np
import pandas as pd

from zinbnngp.gibbs import ChainConfig, ZinbSampler
from zinbnngp.model import PriorSpec
from zinbnngp.simulate import preset_design, simulate_dataset


def time_sampler(S, T, m, sweeps, seed=0):
    data, _ = simulate_dataset(preset_design("sim1", S=S, T=T, seed=seed))
    t0 = time.perf_counter()
    sampler = ZinbSampler(data, PriorSpec(m=m), ChainConfig(n_iter=sweeps + 1, burn_in=1, seed=seed,
                                                                 dense_solve_max_dim=0))
    build = time.perf_counter() - t0
    sampler.sweep()
    times = []
    for _ in range(sweeps):
        t0 = time.perf_counter()
        sampler.sweep()
        times.append(time.perf_counter() - t0)
    return {"S": S, "N": data.N, "build_s": build, "iter_s": float(np.median(times))}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 500])
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--m", type=int, default=13)
    p.add_argument("--sweeps", type=int, default=5)
    p.add_argument("--out", help="optional CSV path")
    args = p.parse_args()

    rows = [time_sampler(S, args.T, args.m, args.sweeps) for S in args.sizes]
    frame = pd.DataFrame(rows)
    slope = np.polyfit(np.log(frame["S"]), np.log(frame["iter_s"]), 1)[0]
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    print(f"log-log slope of per-iteration time: {slope:.2f}")
    if args.out:
        frame.to_csv(args.out, index=False)


if __name__ == "__main__":
    main()
