"""Polya-Gamma Gibbs sampler for the spatiotemporal ZINB model.

One sweep runs, in order:

 1. at-risk indicators W
 2. omega1, then (alpha, a, b) jointly
 3. binary spatial noise eps11
 4. binary temporal noise eps12
 5. l11 (Metropolis) then sigma11^2
 6. l12 then sigma12^2
 7. sigma_eps11^2
 8. sigma_eps12^2
 9. omega2 on the at-risk rows, then (beta, c, d) jointly
10. count spatial noise eps21
11. count temporal noise eps22
12. l21 then sigma21^2
13. l22 then sigma22^2
14. sigma_eps21^2
15. sigma_eps22^2

followed by a Metropolis update of the dispersion r.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy import linalg, sparse, stats
from scipy.sparse.linalg import splu
from scipy.special import gammaln

from .model import (
    ChainState,
    ContractError,
    DesignMaps,
    NumericalError,
    PanelDataset,
    PriorSpec,
    SchemaError,
    expit,
    linear_predictors,
    log1pexp,
)
from .nngp import CorrelationModel, KernelParams, gp_log_density
from .polyagamma import sample_pg_vector
from .samples import PosteriorSamples

log = logging.getLogger(__name__)

STEP_NAMES = (
    "at_risk",
    "binary_block",
    "binary_spatial_noise",
    "binary_temporal_noise",
    "l11_sigma11",
    "l12_sigma12",
    "sigma_eps11",
    "sigma_eps12",
    "count_block",
    "count_spatial_noise",
    "count_temporal_noise",
    "l21_sigma21",
    "l22_sigma22",
    "sigma_eps21",
    "sigma_eps22",
    "dispersion",
)

# effect -> (domain, amplitude, length-scale, noise vector, noise SD)
EFFECTS = {
    "a": ("spatial", "sigma11", "l11", "eps11", "sigma_eps11"),
    "b": ("temporal", "sigma12", "l12", "eps12", "sigma_eps12"),
    "c": ("spatial", "sigma21", "l21", "eps21", "sigma_eps21"),
    "d": ("temporal", "sigma22", "l22", "eps22", "sigma_eps22"),
}


class SamplerError(NumericalError):
    def __init__(self, step: str, iteration: int, cause: Exception):
        super().__init__(f"step {step!r} failed at iteration {iteration}: {cause}")
        self.step = step
        self.iteration = iteration


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 10_000
    burn_in: int = 5_000
    thin: int = 1
    seed: int = 0
    nngp_threshold_spatial: int = 0
    nngp_threshold_temporal: int = 200
    adapt_proposals: bool = True
    adapt_interval: int = 200
    ordering: str = "coordsum"
    dense_solve_max_dim: int = 400
    fix_length_scales: bool = False
    store_eta: bool = False

    def __post_init__(self):
        if self.n_iter < 1:
            raise ContractError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ContractError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ContractError("thin must be at least 1")
        if self.ordering not in ("coordsum", "random"):
            raise ContractError(f"unknown ordering {self.ordering!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown sampler keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# generic full conditionals


def at_risk_probability(eta1, eta2, r):
    """P(W = 1 | y = 0) = pi nu^r / ((1 - pi) + pi nu^r), on the logit scale."""
    # log(pi nu^r) - log(1 - pi) = eta1 + r log(1 - psi) = eta1 - r softplus(eta2)
    return expit(np.asarray(eta1) - r * log1pexp(eta2))


def update_at_risk(state: ChainState, data: PanelDataset, rng: np.random.Generator, eta=None) -> np.ndarray:
    eta1, eta2 = linear_predictors(state, data) if eta is None else eta
    p = at_risk_probability(eta1, eta2, state.r)
    W = (rng.random(data.N) < p).astype(np.int64)
    W[data.y > 0] = 1
    state.W = W
    return W


def sample_ig(shape: float, rate: float, rng: np.random.Generator) -> float:
    """Inverse-gamma draw with density proportional to x^{-shape-1} exp(-rate/x)."""
    return rate / rng.gamma(shape)


def update_gp_variance(effect, factor, a_sigma: float, b_sigma: float, rng) -> float:
    """sigma^2 ~ IG(a + S/2, b + w^T rho_tilde^{-1} w / 2)."""
    effect = np.asarray(effect, dtype=float)
    return sample_ig(a_sigma + 0.5 * effect.size, b_sigma + 0.5 * factor.quad_form(effect), rng)


def update_noise_variance(noise, a_eps: float, b_eps: float, rng) -> float:
    noise = np.asarray(noise, dtype=float)
    return sample_ig(a_eps + 0.5 * noise.size, b_eps + 0.5 * float(noise @ noise), rng)


def gamma_logpdf(x, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1) * np.log(x) - rate * x


def length_scale_log_target(effect, sigma, l, factor, a_l, b_l) -> float:
    return gp_log_density(effect, KernelParams(sigma, l), factor) + gamma_logpdf(l, a_l, b_l)


def update_length_scale(effect, sigma: float, l: float, model: CorrelationModel, a_l: float, b_l: float,
                        proposal_sd: float, rng: np.random.Generator, factor=None):
    """Random-walk Metropolis step for a length-scale.

    Returns (l, factor at l, accepted). Non-positive proposals and proposals
    whose factor cannot be built are rejected.
    """
    factor = model.factor(l) if factor is None else factor
    l_star = l + proposal_sd * rng.standard_normal()
    u = rng.random()
    if l_star <= 0:
        return l, factor, False
    try:
        f_star = model.factor(l_star)
    except NumericalError as e:
        warnings.warn(f"length-scale proposal {l_star:.4g} rejected: {e}", RuntimeWarning, stacklevel=2)
        return l, factor, False
    log_ratio = (length_scale_log_target(effect, sigma, l_star, f_star, a_l, b_l)
                 - length_scale_log_target(effect, sigma, l, factor, a_l, b_l))
    if np.log(u) < log_ratio:
        return l_star, f_star, True
    return l, factor, False


def nb_log_likelihood(y, eta2, r) -> float:
    """sum log[Gamma(y + r) / (Gamma(r) y!) (1 - psi)^r psi^y] with psi = expit(eta2)."""
    y = np.asarray(y, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    sp = log1pexp(eta2)
    return float(np.sum(gammaln(y + r) - gammaln(r) - gammaln(y + 1) - r * sp + y * (eta2 - sp)))


def sample_positive_normal(mean: float, sd: float, rng: np.random.Generator) -> float:
    """N(mean, sd^2) truncated to (0, inf)."""
    if mean / sd > -5:
        while True:
            x = mean + sd * rng.standard_normal()
            if x > 0:
                return x
    a = -mean / sd
    return float(stats.truncnorm.rvs(a, np.inf, loc=mean, scale=sd, random_state=rng))


def update_dispersion(r: float, y, eta2, proposal_sd: float, rng: np.random.Generator,
                      r_max: float = np.inf) -> tuple[float, bool]:
    """Metropolis step for r under a uniform (0, r_max) prior and a zero-truncated normal proposal."""
    r_star = sample_positive_normal(r, proposal_sd, rng)
    u = rng.random()
    if r_star >= r_max:
        return r, False
    log_ratio = nb_log_likelihood(y, eta2, r_star) - nb_log_likelihood(y, eta2, r)
    # q(r | r*) / q(r* | r) for the truncated proposal
    log_ratio += stats.norm.logcdf(r / proposal_sd) - stats.norm.logcdf(r_star / proposal_sd)
    if np.log(u) < log_ratio:
        return r_star, True
    return r, False


# ---------------------------------------------------------------------------
# joint coefficient / effect block


@dataclass
class BlockPrior:
    """Prior of the stacked [coefficients; spatial effect; temporal effect] vector."""

    coef_mean: np.ndarray
    coef_var: np.ndarray
    spatial_factor: object
    temporal_factor: object
    spatial_sigma: float
    temporal_sigma: float

    def dense_precision(self) -> np.ndarray:
        return linalg.block_diag(
            np.diag(1.0 / self.coef_var),
            _dense(self.spatial_factor.precision()) / self.spatial_sigma**2,
            _dense(self.temporal_factor.precision()) / self.temporal_sigma**2,
        )

    def root(self) -> sparse.csr_matrix:
        return sparse.block_diag([
            sparse.diags(1.0 / np.sqrt(self.coef_var)),
            sparse.csr_matrix(self.spatial_factor.root()) / self.spatial_sigma,
            sparse.csr_matrix(self.temporal_factor.root()) / self.temporal_sigma,
        ], format="csr")

    def linear_term(self, S: int, T: int) -> np.ndarray:
        return np.concatenate([self.coef_mean / self.coef_var, np.zeros(S + T)])


def _dense(M):
    return M.toarray() if sparse.issparse(M) else np.asarray(M)


def block_posterior_dense(X, loc, time, S, T, omega, kappa, offset, prior: BlockPrior):
    """Precision Q and linear term h of the block full conditional, dense.

    Q = prior precision + V^T Omega V and h = Sigma0^{-1} phi0 + V^T (kappa - Omega offset)
    with V = [X, V1, V2]; ``kappa`` is omega * z.
    """
    p = X.shape[1]
    wX = omega[:, None] * X
    Q = prior.dense_precision()
    xs = slice(0, p)
    ss = slice(p, p + S)
    ts = slice(p + S, p + S + T)
    XtWX = X.T @ wX
    XtWV1 = np.stack([np.bincount(loc, wX[:, k], minlength=S) for k in range(p)])
    XtWV2 = np.stack([np.bincount(time, wX[:, k], minlength=T) for k in range(p)])
    V1tWV2 = np.bincount(loc * T + time, omega, minlength=S * T).reshape(S, T)
    Q[xs, xs] += XtWX
    Q[xs, ss] += XtWV1
    Q[ss, xs] += XtWV1.T
    Q[xs, ts] += XtWV2
    Q[ts, xs] += XtWV2.T
    Q[ss, ts] += V1tWV2
    Q[ts, ss] += V1tWV2.T
    Q[ss, ss] += np.diag(np.bincount(loc, omega, minlength=S))
    Q[ts, ts] += np.diag(np.bincount(time, omega, minlength=T))
    resid = kappa - omega * offset
    h = prior.linear_term(S, T)
    h[xs] += X.T @ resid
    h[ss] += np.bincount(loc, resid, minlength=S)
    h[ts] += np.bincount(time, resid, minlength=T)
    return Q, h


def design_matrix(X, loc, time, S, T) -> sparse.csr_matrix:
    n = X.shape[0]
    V1 = sparse.csr_matrix((np.ones(n), (np.arange(n), loc)), shape=(n, S))
    V2 = sparse.csr_matrix((np.ones(n), (np.arange(n), time)), shape=(n, T))
    return sparse.hstack([sparse.csr_matrix(X), V1, V2], format="csr")


def sample_block_dense(Q, h, rng, ridge=1e-10):
    """x ~ N(Q^{-1} h, Q^{-1}) via Cholesky, retrying once with a diagonal ridge."""
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        bump = ridge * max(1.0, float(np.mean(np.diag(Q))))
        try:
            L = np.linalg.cholesky(Q + bump * np.eye(Q.shape[0]))
        except np.linalg.LinAlgError:
            raise NumericalError("posterior precision is not positive definite") from None
    mu = linalg.cho_solve((L, True), h)
    z = rng.standard_normal(Q.shape[0])
    return mu + linalg.solve_triangular(L.T, z, lower=False)


def sample_block_sparse(X, loc, time, S, T, omega, kappa, offset, prior: BlockPrior, rng, ridge=1e-10):
    """Same draw as `sample_block_dense` without forming any dense S x S matrix.

    Perturb-then-solve: with e ~ N(0, Q) built from the prior root and
    V^T Omega^{1/2}, the solution of Q x = h + e is N(Q^{-1} h, Q^{-1}).
    """
    V = design_matrix(X, loc, time, S, T)
    R = prior.root()
    Q = (R.T @ R + V.T @ sparse.diags(omega) @ V).tocsc()
    h = prior.linear_term(S, T) + V.T @ (kappa - omega * offset)
    e = R.T @ rng.standard_normal(R.shape[0]) + V.T @ (np.sqrt(omega) * rng.standard_normal(V.shape[0]))
    try:
        lu = splu(Q, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError:
        bump = ridge * max(1.0, float(Q.diagonal().mean()))
        try:
            lu = splu((Q + bump * sparse.eye(Q.shape[0])).tocsc(), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError:
            raise NumericalError("posterior precision is singular") from None
    return lu.solve(h + e)


def update_noise(omega, kappa, other, index, n_levels, sigma_eps, rng):
    """Conjugate draw of one iid noise vector given everything else.

    Per level: precision 1/sigma^2 + sum(omega), mean sum(kappa - omega * other) / precision.
    """
    prec = 1.0 / sigma_eps**2 + np.bincount(index, omega, minlength=n_levels)
    lin = np.bincount(index, kappa - omega * other, minlength=n_levels)
    return lin / prec + rng.standard_normal(n_levels) / np.sqrt(prec)


# ---------------------------------------------------------------------------


class ZinbSampler:
    """Runs one chain of the ZINB-NNGP Gibbs sampler.

    The sampler owns a `ChainState` and caches the current correlation
    factor of each random-effect process.
    """

    def __init__(self, data: PanelDataset, priors: PriorSpec | None = None, config: ChainConfig | None = None,
                 rng: np.random.Generator | None = None, state: ChainState | None = None):
        self.data = data
        self.priors = priors or PriorSpec()
        self.config = config or ChainConfig()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.maps = DesignMaps.from_data(data)
        pr, cfg = self.priors, self.config
        for component in ("alpha", "beta"):
            pr.coef_prior(component, data.X.shape[1])
        order_rng = np.random.default_rng(cfg.seed + 7919) if cfg.ordering == "random" else None
        self.models = {
            "spatial": CorrelationModel(data.coords, pr.m, cfg.nngp_threshold_spatial, pr.corr_jitter,
                                        cfg.ordering, order_rng),
            "temporal": CorrelationModel(data.time_points, pr.m, cfg.nngp_threshold_temporal, pr.corr_jitter,
                                         cfg.ordering, order_rng),
        }
        self.state = state.copy() if state is not None else self.initial_state()
        self.state.check_dims(data)
        self.factors = {}
        for eff, (domain, _, lname, _, _) in EFFECTS.items():
            self.factors[eff] = self.models[domain].factor(getattr(self.state, lname))
        self.proposal_sd = {k: self.priors.l_proposal_sd for k in ("l11", "l12", "l21", "l22")}
        self.proposal_sd["r"] = self.priors.r_proposal_sd
        self._window = {k: [0, 0] for k in self.proposal_sd}
        self._kept = {k: [0, 0] for k in self.proposal_sd}
        self.iteration = 0
        self.wall_time = 0.0
        self.trace: list[str] | None = None

    def initial_state(self) -> ChainState:
        d, pr = self.data, self.priors
        st = ChainState.zeros(d.P, d.S, d.T, d.N)
        st.l11 = st.l21 = pr.a_l1 / pr.b_l1
        st.l12 = st.l22 = pr.a_l2 / pr.b_l2
        W = (d.y > 0).astype(np.int64)
        zeros = d.y == 0
        W[zeros] = (self.rng.random(int(zeros.sum())) < 0.5).astype(np.int64)
        st.W = W
        return st

    # -- individual steps -------------------------------------------------

    def _gp_prior_for(self, component: str) -> tuple:
        st = self.state
        if component == "binary":
            return self.factors["a"], self.factors["b"], st.sigma11, st.sigma12
        return self.factors["c"], self.factors["d"], st.sigma21, st.sigma22

    def block_prior(self, component: str) -> BlockPrior:
        p = self.data.P + 1
        mean, var = self.priors.coef_prior("alpha" if component == "binary" else "beta", p)
        fs, ft, ss, stt = self._gp_prior_for(component)
        return BlockPrior(mean, var, fs, ft, ss, stt)

    def _sample_block(self, X, loc, time, omega, kappa, offset, prior):
        S, T = self.data.S, self.data.T
        dim = X.shape[1] + S + T
        if dim <= self.config.dense_solve_max_dim:
            Q, h = block_posterior_dense(X, loc, time, S, T, omega, kappa, offset, prior)
            return sample_block_dense(Q, h, self.rng)
        return sample_block_sparse(X, loc, time, S, T, omega, kappa, offset, prior, self.rng)

    def _split(self, x):
        p, S = self.data.P + 1, self.data.S
        return x[:p], x[p:p + S], x[p + S:]

    def step_at_risk(self):
        update_at_risk(self.state, self.data, self.rng)

    def binary_eta(self):
        st, d = self.state, self.data
        return d.X @ st.alpha + st.a[d.loc] + st.b[d.time] + st.eps11[d.loc] + st.eps12[d.time]

    def count_eta(self, mask=None):
        st, d = self.state, self.data
        if mask is None:
            return d.X @ st.beta + st.c[d.loc] + st.d[d.time] + st.eps21[d.loc] + st.eps22[d.time]
        loc, time = d.loc[mask], d.time[mask]
        return d.X[mask] @ st.beta + st.c[loc] + st.d[time] + st.eps21[loc] + st.eps22[time]

    def step_binary_block(self):
        st, d = self.state, self.data
        st.omega1 = sample_pg_vector(np.ones(d.N), self.binary_eta(), self.rng)
        kappa = st.W - 0.5
        offset = st.eps11[d.loc] + st.eps12[d.time]
        x = self._sample_block(d.X, d.loc, d.time, st.omega1, kappa, offset, self.block_prior("binary"))
        st.alpha, st.a, st.b = self._split(x)

    def _binary_fixed(self):
        st, d = self.state, self.data
        return d.X @ st.alpha + st.a[d.loc] + st.b[d.time], st.W - 0.5

    def step_binary_spatial_noise(self):
        st, d = self.state, self.data
        base, kappa = self._binary_fixed()
        st.eps11 = update_noise(st.omega1, kappa, base + st.eps12[d.time], d.loc, d.S, st.sigma_eps11, self.rng)

    def step_binary_temporal_noise(self):
        st, d = self.state, self.data
        base, kappa = self._binary_fixed()
        st.eps12 = update_noise(st.omega1, kappa, base + st.eps11[d.loc], d.time, d.T, st.sigma_eps12, self.rng)

    def _hyper_step(self, eff: str):
        st, pr = self.state, self.priors
        domain, sname, lname, _, _ = EFFECTS[eff]
        a_l, b_l = (pr.a_l1, pr.b_l1) if domain == "spatial" else (pr.a_l2, pr.b_l2)
        a_s, b_s = (pr.a_sigma1, pr.b_sigma1) if domain == "spatial" else (pr.a_sigma2, pr.b_sigma2)
        w = getattr(st, eff)
        if not self.config.fix_length_scales:
            l, factor, acc = update_length_scale(w, getattr(st, sname), getattr(st, lname), self.models[domain],
                                                 a_l, b_l, self.proposal_sd[lname], self.rng, self.factors[eff])
            setattr(st, lname, l)
            self.factors[eff] = factor
            self._record(lname, acc)
        s2 = update_gp_variance(w, self.factors[eff], a_s, b_s, self.rng)
        setattr(st, sname, float(np.sqrt(s2)))

    def _noise_var_step(self, name: str, noise: str):
        pr, st = self.priors, self.state
        setattr(st, name, float(np.sqrt(update_noise_variance(getattr(st, noise), pr.a_eps, pr.b_eps, self.rng))))

    def step_count_block(self):
        st, d = self.state, self.data
        mask = st.W == 1
        if not np.any(mask):
            warnings.warn("empty at-risk set; count block drawn from its prior", RuntimeWarning, stacklevel=2)
        loc, time, X, y = d.loc[mask], d.time[mask], d.X[mask], d.y[mask]
        omega = sample_pg_vector(y + st.r, self.count_eta(mask), self.rng)
        st.omega2 = np.zeros(d.N)
        st.omega2[mask] = omega
        kappa = 0.5 * (y - st.r)
        offset = st.eps21[loc] + st.eps22[time]
        x = self._sample_block(X, loc, time, omega, kappa, offset, self.block_prior("count"))
        st.beta, st.c, st.d = self._split(x)

    def _count_fixed(self):
        st, d = self.state, self.data
        mask = st.W == 1
        loc, time = d.loc[mask], d.time[mask]
        base = d.X[mask] @ st.beta + st.c[loc] + st.d[time]
        return mask, loc, time, base, 0.5 * (d.y[mask] - st.r), st.omega2[mask]

    def step_count_spatial_noise(self):
        st, d = self.state, self.data
        _, loc, time, base, kappa, omega = self._count_fixed()
        st.eps21 = update_noise(omega, kappa, base + st.eps22[time], loc, d.S, st.sigma_eps21, self.rng)

    def step_count_temporal_noise(self):
        st, d = self.state, self.data
        _, loc, time, base, kappa, omega = self._count_fixed()
        st.eps22 = update_noise(omega, kappa, base + st.eps21[loc], time, d.T, st.sigma_eps22, self.rng)

    def step_dispersion(self):
        st, d = self.state, self.data
        mask = st.W == 1
        r, acc = update_dispersion(st.r, d.y[mask], self.count_eta(mask), self.proposal_sd["r"], self.rng,
                                   self.priors.r_max)
        st.r = r
        self._record("r", acc)

    def steps(self):
        return (
            ("at_risk", self.step_at_risk),
            ("binary_block", self.step_binary_block),
            ("binary_spatial_noise", self.step_binary_spatial_noise),
            ("binary_temporal_noise", self.step_binary_temporal_noise),
            ("l11_sigma11", lambda: self._hyper_step("a")),
            ("l12_sigma12", lambda: self._hyper_step("b")),
            ("sigma_eps11", lambda: self._noise_var_step("sigma_eps11", "eps11")),
            ("sigma_eps12", lambda: self._noise_var_step("sigma_eps12", "eps12")),
            ("count_block", self.step_count_block),
            ("count_spatial_noise", self.step_count_spatial_noise),
            ("count_temporal_noise", self.step_count_temporal_noise),
            ("l21_sigma21", lambda: self._hyper_step("c")),
            ("l22_sigma22", lambda: self._hyper_step("d")),
            ("sigma_eps21", lambda: self._noise_var_step("sigma_eps21", "eps21")),
            ("sigma_eps22", lambda: self._noise_var_step("sigma_eps22", "eps22")),
            ("dispersion", self.step_dispersion),
        )

    # -- bookkeeping ------------------------------------------------------

    def _record(self, name: str, accepted: bool):
        self._window[name][0] += int(accepted)
        self._window[name][1] += 1
        if self.iteration >= self.config.burn_in:
            self._kept[name][0] += int(accepted)
            self._kept[name][1] += 1

    def _adapt(self):
        lo, hi = 0.2, 0.5
        for name, (acc, tries) in self._window.items():
            if tries == 0:
                continue
            rate = acc / tries
            if rate < lo:
                self.proposal_sd[name] *= 0.5
            elif rate > hi:
                self.proposal_sd[name] *= 2.0
            self._window[name] = [0, 0]

    def acceptance_rates(self) -> dict[str, float]:
        return {k: (a / n if n else float("nan")) for k, (a, n) in self._kept.items()}

    def sweep(self):
        for name, fn in self.steps():
            if self.trace is not None:
                self.trace.append(name)
            try:
                fn()
            except Exception as e:  # noqa: BLE001 - re-raised with location
                raise SamplerError(name, self.iteration, e) from e
        cfg = self.config
        self.iteration += 1
        if cfg.adapt_proposals and self.iteration <= cfg.burn_in and self.iteration % cfg.adapt_interval == 0:
            self._adapt()

    def run(self, progress_every: int = 0) -> PosteriorSamples:
        cfg, d = self.config, self.data
        n_keep = len(range(cfg.burn_in, cfg.n_iter, cfg.thin))
        store = {name: np.empty((n_keep, np.size(getattr(self.state, name)))) for name in
                 ("alpha", "beta", "a", "b", "c", "d", "eps11", "eps12", "eps21", "eps22")}
        for name in ("l11", "sigma11", "l12", "sigma12", "l21", "sigma21", "l22", "sigma22",
                     "sigma_eps11", "sigma_eps12", "sigma_eps21", "sigma_eps22", "r"):
            store[name] = np.empty((n_keep, 1))
        if cfg.store_eta:
            store["eta1"] = np.empty((n_keep, d.N))
            store["eta2"] = np.empty((n_keep, d.N))
        t0 = time.perf_counter()
        k = 0
        for it in range(cfg.n_iter):
            self.sweep()
            if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
                for name, arr in store.items():
                    if name == "eta1":
                        arr[k] = self.binary_eta()
                    elif name == "eta2":
                        arr[k] = self.count_eta()
                    else:
                        arr[k] = getattr(self.state, name)
                k += 1
            if progress_every and (it + 1) % progress_every == 0:
                log.info("iteration %d/%d (%.1fs)", it + 1, cfg.n_iter, time.perf_counter() - t0)
        self.wall_time = time.perf_counter() - t0
        columns = _column_names(d)
        # no wall time here: sample files must be byte-reproducible under a fixed seed
        meta = {"n_iter": cfg.n_iter, "burn_in": cfg.burn_in, "thin": cfg.thin, "seed": cfg.seed,
                "proposal_sd": dict(self.proposal_sd)}
        return PosteriorSamples(store, {k: v for k, v in columns.items() if k in store},
                                self.acceptance_rates(), meta)


def _column_names(d: PanelDataset) -> dict[str, list[str]]:
    p = d.P + 1
    cols = {"alpha": [f"alpha{k}" for k in range(p)], "beta": [f"beta{k}" for k in range(p)]}
    for name in ("a", "c", "eps11", "eps21"):
        cols[name] = [f"{name}[{lab}]" for lab in d.loc_labels]
    for name in ("b", "d", "eps12", "eps22"):
        cols[name] = [f"{name}[{lab}]" for lab in d.time_labels]
    cols["eta1"] = [f"eta1[{j}]" for j in range(d.N)]
    cols["eta2"] = [f"eta2[{j}]" for j in range(d.N)]
    return cols


def run_chain(data: PanelDataset, priors: PriorSpec | None = None, config: ChainConfig | None = None,
              rng: np.random.Generator | None = None, state: ChainState | None = None) -> PosteriorSamples:
    """Run one chain and return its retained draws."""
    return ZinbSampler(data, priors, config, rng, state).run()
