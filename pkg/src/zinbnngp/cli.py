"""Command-line entry point: simulate, fit, summarize.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
Every run writes ``manifest.json`` to its output directory, also on failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig, load_config
from .gibbs import SamplerError, ZinbSampler
from .model import ChainState, ContractError, DataError, NumericalError, SchemaError, ingest_csv
from .samples import PosteriorSamples
from .simulate import SimDesign, preset_design, simulate_dataset
from .summarize import fitted_counts, recovery_score, risk_ratio, summarize_samples, write_json

log = logging.getLogger("zinbnngp")

OUT_ENV = "ZINBNNGP_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST = "manifest.json"


class UsageError(SchemaError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Run record; `write` inventories every file under the output directory."""

    def __init__(self, command: str, argv: list[str]):
        self.data = {"command": command, "argv": argv, "version": __version__,
                     "python": platform.python_version(), "numpy": np.__version__,
                     "started": _now(), "status": "running"}

    def update(self, **kw):
        self.data.update(kw)

    def write(self, out: Path, error: Exception | None = None) -> Path:
        self.data["finished"] = _now()
        if error is not None:
            rec = {"type": type(error).__name__, "message": str(error)}
            if isinstance(error, SamplerError):
                rec.update(step=error.step, iteration=error.iteration)
            self.data.update(status="error", error=rec)
        else:
            self.data["status"] = "ok"
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for f in sorted(p for p in out.rglob("*") if p.is_file() and p.name != MANIFEST):
            files.append({"path": f.relative_to(out).as_posix(), "bytes": f.stat().st_size, "sha256": sha256(f)})
        self.data["files"] = files
        path = out / MANIFEST
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=_plain))
        return path


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (np.ndarray, tuple)):
        return list(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def resolve_out(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    raise UsageError(f"no output directory: pass --out or set {OUT_ENV}")


def _check_writable(out: Path):
    probe = out
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")


# ---------------------------------------------------------------------------
# simulate


def build_design(args, cfg: RunConfig) -> SimDesign:
    if args.preset:
        design = preset_design(args.preset, args.scale or 1.0)
    elif cfg.design is not None:
        design = cfg.design
        if args.scale:
            raise UsageError("--scale applies to presets; set S and T in the design section instead")
    else:
        raise UsageError("simulate needs --preset or a 'design' section in --config")
    if args.seed is not None:
        design = replace(design, seed=args.seed)
    return design


def cmd_simulate(args, manifest: Manifest, out: Path) -> None:
    cfg = load_config(args.config)
    design = build_design(args, cfg)
    manifest.update(config={"design": design.to_dict()}, seed=design.seed)
    data, truth = simulate_dataset(design)
    out.mkdir(parents=True, exist_ok=True)
    data.to_frame().to_csv(out / "data.csv", index=False, float_format="%.17g")
    write_json({"design": design.to_dict(), "state": truth.to_dict()}, out / "truth.json")
    manifest.update(N=data.N, S=data.S, T=data.T, zero_fraction=float(np.mean(data.y == 0)))


# ---------------------------------------------------------------------------
# fit


def fit_config(args) -> RunConfig:
    cfg = load_config(args.config)
    over = {}
    if args.iters is not None:
        over["n_iter"] = args.iters
    if args.burn is not None:
        over["burn_in"] = args.burn
    if args.thin is not None:
        over["thin"] = args.thin
    if args.seed is not None:
        over["seed"] = args.seed
    if over:
        fields = {**{k: getattr(cfg.sampler, k) for k in cfg.sampler.__dataclass_fields__}, **over}
        cfg = replace(cfg, sampler=type(cfg.sampler).from_dict(fields))
    return cfg


def _chain_rngs(seed: int, chains: int):
    if chains == 1:
        return [np.random.default_rng(seed)]
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(chains)]


def _run_one(data, priors, config, rng):
    sampler = ZinbSampler(data, priors, config, rng=rng)
    samples = sampler.run(progress_every=max(1, config.n_iter // 10))
    return samples, sampler.wall_time


def cmd_fit(args, manifest: Manifest, out: Path) -> None:
    if not args.data:
        raise UsageError("fit needs --data")
    if args.chains < 1:
        raise UsageError("--chains must be at least 1")
    cfg = fit_config(args)
    manifest.update(config=cfg.snapshot(), seed=cfg.sampler.seed, chains=args.chains)
    try:
        data = ingest_csv(args.data, cfg.schema)
    except FileNotFoundError:
        raise DataError(f"data file not found: {args.data}") from None
    # building a sampler validates priors against the data before any file is written
    ZinbSampler(data, cfg.priors, cfg.sampler)
    rngs = _chain_rngs(cfg.sampler.seed, args.chains)
    if args.chains == 1:
        results = [_run_one(data, cfg.priors, cfg.sampler, rngs[0])]
    else:
        workers = min(args.chains, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, data, cfg.priors, cfg.sampler, rng) for rng in rngs]
            results = [f.result() for f in futures]
    acceptance, wall = {}, []
    for i, (samples, seconds) in enumerate(results, start=1):
        target = out / "samples" if args.chains == 1 else out / f"chain_{i}"
        samples.to_dir(target)
        acceptance[target.name] = samples.acceptance
        wall.append(seconds)
    manifest.update(acceptance=acceptance, wall_time=wall, N=data.N, S=data.S, T=data.T)


# ---------------------------------------------------------------------------
# summarize


def load_samples(path: Path) -> PosteriorSamples:
    if not path.is_dir():
        raise DataError(f"samples directory not found: {path}")
    chains = sorted((p for p in path.glob("chain_*") if p.is_dir()), key=lambda p: int(p.name.split("_")[1]))
    if chains:
        return PosteriorSamples.concat([PosteriorSamples.from_dir(c) for c in chains])
    if (path / "samples").is_dir():
        path = path / "samples"
    return PosteriorSamples.from_dir(path)


def load_truth(path: Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError:
        raise DataError(f"truth file not readable: {path}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{e.lineno}: {e.msg}") from None
    state = raw.get("state", raw)
    return ChainState.from_dict(state)


def load_groups(path: Path) -> tuple[dict, str]:
    try:
        frame = pd.read_csv(path, dtype=str)
    except OSError:
        raise DataError(f"group file not readable: {path}") from None
    if not {"location", "group"} <= set(frame.columns):
        raise SchemaError(f"{path}: group file needs 'location' and 'group' columns")
    if frame.empty:
        raise DataError(f"{path}: no group assignments")
    return dict(zip(frame["location"], frame["group"])), frame["group"].iloc[0]


def cmd_summarize(args, manifest: Manifest, out: Path) -> None:
    cfg = load_config(args.config)
    samples = load_samples(Path(args.samples))
    truth = load_truth(args.truth) if args.truth else None
    data = None
    if args.fitted or args.rr:
        if not args.data:
            raise UsageError("--fitted and --rr need --data")
        data = ingest_csv(args.data, cfg.schema)
    groups = None
    if args.rr:
        groups, first = load_groups(Path(args.rr))
        reference = args.reference or first
    table = summarize_samples(samples)
    report = recovery_score(samples, truth) if truth is not None else None
    fitted = fitted_counts(samples, data) if data is not None else None
    rr = None
    if groups is not None:
        labelled = {lab: groups.get(str(lab)) for lab in data.loc_labels}
        missing = [lab for lab, g in labelled.items() if g is None]
        if missing:
            raise DataError(f"{args.rr}: no group for locations {missing[:5]}")
        rr = risk_ratio(samples, data, labelled, reference)

    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "summary.csv")
    write_json(table.digest(), out / "summary.json")
    if report is not None:
        report.coverage.to_csv(out / "recovery.csv", index=False, float_format="%.6g")
        write_json(report.to_json(), out / "recovery.json")
        manifest.update(recovery=report.to_json())
    if fitted is not None and args.fitted:
        fitted.by_unit().to_csv(out / "fitted_units.csv", index=False, float_format="%.6g")
        fitted.by_location().to_csv(out / "fitted_locations.csv", index=False, float_format="%.6g")
    if rr is not None:
        rr.frame.to_csv(out / "risk_ratio.csv", index=False, float_format="%.6g")
        manifest.update(rr_missing_draws=rr.missing, rr_reference=reference)
    manifest.update(n_draws=samples.n_draws, acceptance=samples.acceptance)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zinbnngp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")

    sp = sub.add_parser("simulate", help="draw a synthetic dataset and its truth")
    common(sp)
    sp.add_argument("--preset", choices=("sim1", "sim2", "sim3"))
    sp.add_argument("--scale", type=float, help="shrink S and T of a preset by this factor")
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("fit", help="run the Gibbs sampler on a panel CSV")
    common(sp)
    sp.add_argument("--data", help="panel CSV")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--burn", type=int)
    sp.add_argument("--thin", type=int)
    sp.add_argument("--chains", type=int, default=1)

    sp = sub.add_parser("summarize", help="posterior tables, recovery, fitted counts, risk ratios")
    common(sp)
    sp.add_argument("samples", help="samples directory written by fit (or a fit output directory)")
    sp.add_argument("--truth", help="truth.json written by simulate")
    sp.add_argument("--data", help="panel CSV (needed for --fitted and --rr)")
    sp.add_argument("--fitted", action="store_true", help="write fitted-count trajectories")
    sp.add_argument("--rr", metavar="GROUP_CSV", help="location,group assignment for risk ratios")
    sp.add_argument("--reference", help="reference group for --rr (default: group of the first row)")
    return p


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize}


def exit_code(e: Exception) -> int:
    if isinstance(e, NumericalError):
        return EXIT_NUMERIC
    if isinstance(e, DataError):
        return EXIT_DATA
    return EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    manifest = Manifest(args.command, argv)
    try:
        out = resolve_out(args)
        _check_writable(out)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args, manifest, out)
    except (SchemaError, ContractError, DataError, NumericalError) as e:
        code = exit_code(e)
        log.debug("%s", traceback.format_exc())
        print(f"error: {e}", file=sys.stderr)
        manifest.update(exit_code=code)
        manifest.write(out, e)
        return code
    manifest.update(exit_code=EXIT_OK)
    manifest.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
