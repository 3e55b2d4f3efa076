"""Getting-it-right joint distribution check for the sampler.

Marginal-conditional draws come straight from the prior and likelihood.
Successive-conditional draws alternate one Gibbs sweep with a fresh
(W, y) draw given the current parameters. Both target the same joint
distribution, so their parameter marginals must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .gibbs import EFFECTS, ChainConfig, ZinbSampler
from .model import ChainState, PanelDataset, PriorSpec, linear_predictors
from .nngp import corr_matrix
from .simulate import draw_zinb

TRACKED = ("alpha0", "beta0", "r", "sigma11", "sigma12", "sigma21", "sigma22",
           "sigma_eps11", "sigma_eps12", "sigma_eps21", "sigma_eps22")


@dataclass(frozen=True)
class GirSetup:
    S: int = 3
    T: int = 2
    reps: int = 2
    l_spatial: float = 0.6
    l_temporal: float = 1.5
    priors: PriorSpec = PriorSpec(
        alpha_var=1.0, beta_var=1.0,
        a_sigma1=4.0, b_sigma1=1.5, a_sigma2=6.0, b_sigma2=2.5,
        a_eps=4.0, b_eps=0.3, r_max=4.0, r_proposal_sd=0.5,
    )


def tiny_layout(setup: GirSetup, seed: int = 0) -> PanelDataset:
    """Fixed design: S x T units with ``reps`` rows each and one covariate."""
    rng = np.random.default_rng(seed)
    S, T, k = setup.S, setup.T, setup.reps
    loc = np.repeat(np.arange(S), T * k)
    time = np.tile(np.repeat(np.arange(T), k), S)
    N = loc.size
    X = np.column_stack([np.ones(N), rng.standard_normal(N)])
    coords = rng.uniform(size=(S, 2))
    return PanelDataset(y=np.zeros(N, dtype=np.int64), X=X, loc=loc, time=time, coords=coords,
                        time_points=np.arange(1.0, T + 1), covariate_names=("x1",))


def _mvn(points, sigma, l, jitter, rng):
    K = sigma**2 * corr_matrix(points, l, jitter)
    return np.linalg.cholesky(K) @ rng.standard_normal(K.shape[0])


def draw_prior(data: PanelDataset, setup: GirSetup, rng: np.random.Generator) -> ChainState:
    pr = setup.priors
    p = data.P + 1
    st = ChainState.zeros(data.P, data.S, data.T, data.N)
    mean, var = pr.coef_prior("alpha", p)
    st.alpha = mean + np.sqrt(var) * rng.standard_normal(p)
    mean, var = pr.coef_prior("beta", p)
    st.beta = mean + np.sqrt(var) * rng.standard_normal(p)
    st.l11 = st.l21 = setup.l_spatial
    st.l12 = st.l22 = setup.l_temporal
    for eff, (domain, sname, lname, noise, ename) in EFFECTS.items():
        a_s, b_s = (pr.a_sigma1, pr.b_sigma1) if domain == "spatial" else (pr.a_sigma2, pr.b_sigma2)
        sigma = np.sqrt(b_s / rng.gamma(a_s))
        points = data.coords if domain == "spatial" else data.time_points
        setattr(st, sname, float(sigma))
        setattr(st, eff, _mvn(points, sigma, getattr(st, lname), pr.corr_jitter, rng))
        s_eps = np.sqrt(pr.b_eps / rng.gamma(pr.a_eps))
        setattr(st, ename, float(s_eps))
        setattr(st, noise, s_eps * rng.standard_normal(data.S if domain == "spatial" else data.T))
    st.r = float(rng.uniform(0.0, pr.r_max))
    return st


def draw_data(state: ChainState, data: PanelDataset, rng: np.random.Generator):
    eta1, eta2 = linear_predictors(state, data)
    return draw_zinb(eta1, eta2, state.r, rng)


def _record(st: ChainState) -> list[float]:
    return [st.alpha[0], st.beta[0]] + [getattr(st, k) for k in TRACKED[2:]]


def marginal_conditional(n: int, setup: GirSetup = GirSetup(), seed: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    data = tiny_layout(setup)
    return np.array([_record(draw_prior(data, setup, rng)) for _ in range(n)])


def successive_conditional(n_sweeps: int, thin: int = 1, setup: GirSetup = GirSetup(),
                           seed: int = 2, **config) -> np.ndarray:
    """``config`` overrides `ChainConfig` fields, e.g. to force the sparse solver."""
    rng = np.random.default_rng(seed)
    data = tiny_layout(setup)
    state = draw_prior(data, setup, rng)
    W, y = draw_data(state, data, rng)
    state.W = W
    data = replace(data, y=y)
    opts = dict(n_iter=2, burn_in=1, adapt_proposals=False, fix_length_scales=True,
                nngp_threshold_temporal=200, nngp_threshold_spatial=200)
    opts.update(config)
    cfg = ChainConfig(**opts)
    sampler = ZinbSampler(data, setup.priors, cfg, rng=rng, state=state)
    out = []
    for it in range(n_sweeps):
        sampler.sweep()
        W, y = draw_data(sampler.state, sampler.data, rng)
        sampler.state.W = W
        sampler.data = replace(sampler.data, y=y)
        if it % thin == 0:
            out.append(_record(sampler.state))
    return np.array(out)


def compare(marginal: np.ndarray, successive: np.ndarray) -> dict[str, float]:
    """Two-sample KS p-value per tracked quantity."""
    return {name: float(stats.ks_2samp(marginal[:, k], successive[:, k]).pvalue)
            for k, name in enumerate(TRACKED)}
