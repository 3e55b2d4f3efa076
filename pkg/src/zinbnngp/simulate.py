"""Synthetic ZINB datasets with Gaussian-process spatial and temporal effects."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .model import ChainState, ContractError, PanelDataset, SchemaError, expit
from .nngp import corr_matrix


@dataclass(frozen=True)
class SimDesign:
    """Truth and layout of a simulated panel.

    Amplitudes and noise levels are standard deviations; zero switches the
    corresponding effect off.
    """

    S: int = 200
    T: int = 20
    repetition: str = "fixed"          # "fixed": one observation per unit; "poisson": n_st ~ Poisson(lam)
    lam: float = 2.0
    alpha: tuple = (-0.25, 0.25)
    beta: tuple = (0.5, -0.25)
    sigma11: float = 0.5
    l11: float = 0.35
    sigma12: float = 0.2
    l12: float = 1.0
    sigma21: float = 0.5
    l21: float = 0.35
    sigma22: float = 0.2
    l22: float = 1.0
    sigma_eps11: float = 0.05
    sigma_eps12: float = 0.05
    sigma_eps21: float = 0.05
    sigma_eps22: float = 0.05
    r: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.S < 1 or self.T < 1:
            raise ContractError("S and T must be positive")
        if self.repetition not in ("fixed", "poisson"):
            raise ContractError(f"unknown repetition rule {self.repetition!r}")
        if self.repetition == "poisson" and not self.lam > 0:
            raise ContractError("Poisson repetition mean must be positive")
        if len(self.alpha) != len(self.beta):
            raise ContractError("alpha and beta must have the same length")
        for name in ("sigma11", "sigma12", "sigma21", "sigma22",
                     "sigma_eps11", "sigma_eps12", "sigma_eps21", "sigma_eps22"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        for name in ("l11", "l12", "l21", "l22", "r"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SimDesign":
        d = dict(d)
        preset = d.pop("preset", None)
        scale = d.pop("scale", None)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown design keys: {sorted(unknown)}")
        for key in ("alpha", "beta"):
            if key in d:
                d[key] = tuple(d[key])
        base = preset_design(preset, scale or 1.0) if preset else cls()
        return replace(base, **d)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


PRESETS = {
    "sim1": dict(S=200, T=20, repetition="fixed"),
    "sim2": dict(S=500, T=20, repetition="fixed"),
    "sim3": dict(S=200, T=20, repetition="poisson", lam=2.0),
}


def preset_design(name: str, scale: float = 1.0, **overrides) -> SimDesign:
    """Built-in design; ``scale`` shrinks S and T proportionally."""
    if name not in PRESETS:
        raise SchemaError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if not scale > 0:
        raise ContractError("scale must be positive")
    base = dict(PRESETS[name])
    base["S"] = max(2, int(round(base["S"] * scale)))
    base["T"] = max(2, int(round(base["T"] * scale)))
    base.update(overrides)
    return SimDesign(**base)


def draw_gp(points, sigma: float, l: float, rng: np.random.Generator) -> np.ndarray:
    """Exact draw from N(0, sigma^2 rho_l) using a symmetric square root."""
    n = np.asarray(points).shape[0]
    z = rng.standard_normal(n)
    if sigma == 0:
        return np.zeros(n)
    vals, vecs = np.linalg.eigh(corr_matrix(points, l))
    return sigma * (vecs @ (np.sqrt(np.clip(vals, 0.0, None)) * z))


def simulate_dataset(design: SimDesign) -> tuple[PanelDataset, ChainState]:
    """Draw a dataset and the full ground truth from ``design``."""
    rng = np.random.default_rng(design.seed)
    S, T = design.S, design.T
    coords = rng.uniform(size=(S, 2))
    time_points = np.arange(1, T + 1, dtype=float)

    if design.repetition == "fixed":
        n_st = np.ones((S, T), dtype=np.int64)
    else:
        n_st = rng.poisson(design.lam, size=(S, T))
    loc = np.repeat(np.repeat(np.arange(S), T), n_st.ravel())
    time = np.repeat(np.tile(np.arange(T), S), n_st.ravel())
    N = loc.size

    P = len(design.alpha) - 1
    X = np.column_stack([np.ones(N), rng.standard_normal((N, P))])

    truth = ChainState.zeros(P, S, T, N)
    truth.alpha = np.asarray(design.alpha, dtype=float)
    truth.beta = np.asarray(design.beta, dtype=float)
    truth.a = draw_gp(coords, design.sigma11, design.l11, rng)
    truth.b = draw_gp(time_points, design.sigma12, design.l12, rng)
    truth.c = draw_gp(coords, design.sigma21, design.l21, rng)
    truth.d = draw_gp(time_points, design.sigma22, design.l22, rng)
    truth.eps11 = design.sigma_eps11 * rng.standard_normal(S)
    truth.eps12 = design.sigma_eps12 * rng.standard_normal(T)
    truth.eps21 = design.sigma_eps21 * rng.standard_normal(S)
    truth.eps22 = design.sigma_eps22 * rng.standard_normal(T)
    for name in ("sigma11", "l11", "sigma12", "l12", "sigma21", "l21", "sigma22", "l22",
                 "sigma_eps11", "sigma_eps12", "sigma_eps21", "sigma_eps22", "r"):
        setattr(truth, name, float(getattr(design, name)))

    eta1 = X @ truth.alpha + truth.a[loc] + truth.b[time] + truth.eps11[loc] + truth.eps12[time]
    eta2 = X @ truth.beta + truth.c[loc] + truth.d[time] + truth.eps21[loc] + truth.eps22[time]
    W, y = draw_zinb(eta1, eta2, design.r, rng)
    truth.W = W
    truth.omega1 = np.zeros(N)
    truth.omega2 = np.zeros(N)

    data = PanelDataset(y=y, X=X, loc=loc, time=time, coords=coords, time_points=time_points,
                        covariate_names=tuple(f"x{k}" for k in range(1, P + 1)))
    return data, truth


def draw_zinb(eta1, eta2, r: float, rng: np.random.Generator):
    """At-risk indicators W ~ Bernoulli(expit(eta1)) and counts, NB(r, expit(eta2)) where W = 1."""
    eta1 = np.asarray(eta1, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    W = (rng.random(eta1.size) < expit(eta1)).astype(np.int64)
    # numpy's success probability is our 1 - psi
    fail = np.clip(expit(-eta2), 1e-300, 1.0)
    counts = rng.negative_binomial(r, fail)
    return W, np.where(W == 1, counts, 0).astype(np.int64)


def zinb_mean(phi, psi, r):
    """E[Y] = phi * r * psi / (1 - psi)."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if np.any(psi >= 1):
        raise ContractError("psi = 1 gives an infinite mean")
    return phi * r * psi / (1.0 - psi)


def nb_variance(mu, r):
    """Var of the NB part with mean ``mu``: mu (1 + mu / r)."""
    mu = np.asarray(mu, dtype=float)
    return mu * (1.0 + mu / r)


def zero_probability(phi, psi, r):
    """P(Y = 0) = (1 - phi) + phi (1 - psi)^r."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return (1.0 - phi) + phi * (1.0 - psi) ** r
