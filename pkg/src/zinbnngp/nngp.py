"""Squared-exponential correlation and nearest-neighbor GP precision factors.

A factor stores, for every point in the chosen ordering, the regression
coefficients a_i of that point on its m nearest earlier-ordered neighbors
and the conditional variance d_i. Together they give the sparse precision

    rho_tilde^{-1} = (I - A)^T D^{-1} (I - A).

Rows are stored in ordering position but all public methods take and return
vectors in the original point labeling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .model import ContractError, NumericalError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KernelParams:
    sigma: float
    l: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.l > 0):
            raise ContractError("kernel amplitude and length-scale must be positive")


def sq_exp_corr(h_i, h_j, l: float):
    """exp(-|h_i - h_j|^2 / l^2); broadcasts over leading dimensions."""
    if not l > 0:
        raise ContractError("length-scale must be positive")
    h_i = np.asarray(h_i, dtype=float)
    h_j = np.asarray(h_j, dtype=float)
    if h_i.ndim == 0:
        h_i, h_j = h_i[None], h_j[None]
    d2 = np.sum((h_i - h_j) ** 2, axis=-1)
    return np.exp(-d2 / l**2)


def corr_matrix(points, l: float, jitter: float = 0.0) -> np.ndarray:
    """Dense correlation matrix over ``points`` (n, dim)."""
    pts = _as_points(points)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    out = np.exp(-d2 / l**2)
    if jitter:
        out[np.diag_indices_from(out)] += jitter
    return out


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


@dataclass(frozen=True)
class NeighborSets:
    """Ordering and nearest earlier neighbors.

    ``order[i]`` is the label of the point at position i. ``neighbors[i]``
    holds labels of its neighbors, padded with -1 to width m.
    """

    order: np.ndarray
    neighbors: np.ndarray
    m: int

    @property
    def S(self) -> int:
        return self.order.size

    def neighbor_list(self, i: int) -> np.ndarray:
        row = self.neighbors[i]
        return row[row >= 0]


def order_points(coords, rule: str = "coordsum", rng: np.random.Generator | None = None) -> np.ndarray:
    """Point ordering: by coordinate sum (stable on ties) or a random permutation."""
    pts = _as_points(coords)
    if rule == "coordsum":
        return np.argsort(pts.sum(axis=1), kind="stable")
    if rule == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        return rng.permutation(pts.shape[0])
    raise ContractError(f"unknown ordering rule {rule!r}")


def dejitter_duplicates(coords) -> np.ndarray:
    """Copy of ``coords`` with repeated points nudged by 1e-8 x domain diameter."""
    pts = _as_points(coords).copy()
    _, first, counts = np.unique(pts, axis=0, return_index=True, return_counts=True)
    if np.all(counts == 1):
        return pts
    warnings.warn("duplicate coordinates found; applying deterministic jitter", RuntimeWarning, stacklevel=2)
    diam = float(np.max(np.ptp(pts, axis=0))) or 1.0
    step = 1e-8 * diam
    seen: dict[tuple, int] = {}
    direction = np.linspace(1.0, 0.5, pts.shape[1])
    for i in range(pts.shape[0]):
        key = tuple(pts[i])
        k = seen.get(key, 0)
        seen[key] = k + 1
        if k:
            pts[i] = pts[i] + k * step * direction
    return pts


def build_neighbor_sets(coords, m: int, ordering_rule: str = "coordsum",
                        rng: np.random.Generator | None = None, order: np.ndarray | None = None) -> NeighborSets:
    """m nearest earlier-ordered neighbors of each point (Euclidean, ties to the earlier position)."""
    pts = _as_points(coords)
    S = pts.shape[0]
    if S > 1 and not (1 <= m <= S - 1):
        raise ContractError(f"neighbor count m={m} outside [1, {S - 1}]")
    m = int(m) if S > 1 else max(int(m), 1)
    order = order_points(pts, ordering_rule, rng) if order is None else np.asarray(order)
    ordered = pts[order]
    nbrs = np.full((S, m), -1, dtype=np.int64)
    block = 256
    for start in range(1, S, block):
        stop = min(S, start + block)
        d2 = np.sum((ordered[start:stop, None, :] - ordered[None, :stop, :]) ** 2, axis=-1)
        pos = np.arange(start, stop)
        d2[np.arange(stop) >= pos[:, None]] = np.inf
        k = min(m, stop - 1)
        # stable sort keeps the smaller position on distance ties
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        for r, i in enumerate(pos):
            take = idx[r, : min(m, i)]
            nbrs[i, : take.size] = order[take]
    return NeighborSets(order=order, neighbors=nbrs, m=m)


@dataclass(frozen=True)
class NngpFactor:
    """Sparse (A, D) representation of an NNGP correlation approximation."""

    sets: NeighborSets
    coef: np.ndarray
    diag: np.ndarray

    @property
    def S(self) -> int:
        return self.sets.S

    def residuals(self, w: np.ndarray) -> np.ndarray:
        """(I - A) w in ordering position."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.S,):
            raise ContractError(f"vector of length {w.shape} does not match S={self.S}")
        nb = self.sets.neighbors
        gathered = np.where(nb >= 0, w[np.maximum(nb, 0)], 0.0)
        return w[self.sets.order] - np.sum(self.coef * gathered, axis=1)

    def quad_form(self, w) -> float:
        u = self.residuals(w)
        return float(np.sum(u * u / self.diag))

    def log_det(self) -> float:
        if np.any(~(self.diag > 0)):
            raise NumericalError("non-positive conditional variance in NNGP factor")
        return float(np.sum(np.log(self.diag)))

    def root(self) -> sparse.csr_matrix:
        """R = D^{-1/2}(I - A) in original labels, so that R^T R = rho_tilde^{-1}."""
        S, m = self.coef.shape
        nb = self.sets.neighbors
        rows = np.repeat(np.arange(S), m + 1).reshape(S, m + 1)
        cols = np.column_stack([self.sets.order, nb])
        vals = np.column_stack([np.ones(S), -self.coef])
        keep = cols >= 0
        scale = (1.0 / np.sqrt(self.diag))[:, None]
        vals = (vals * scale)[keep]
        return sparse.csr_matrix((vals, (rows[keep], cols[keep])), shape=(S, S))

    def precision(self) -> sparse.csr_matrix:
        R = self.root()
        return (R.T @ R).tocsr()

    def implied_corr(self) -> np.ndarray:
        """Dense rho_tilde; for tests and diagnostics only."""
        return np.linalg.inv(self.precision().toarray())


def build_nngp_factor(coords, sets: NeighborSets, l: float, jitter: float = 0.0) -> NngpFactor:
    """Solve each neighbor system rho(N, N) a = rho(N, i) and set d_i = 1 - a^T rho(N, i).

    ``jitter`` is a nugget added to the correlation diagonal (0 reproduces the
    pure squared-exponential correlation).
    """
    if not l > 0:
        raise ContractError("length-scale must be positive")
    pts = _as_points(coords)
    S, m = sets.neighbors.shape
    if pts.shape[0] != S:
        raise ContractError("coords and neighbor sets differ in size")
    nb = sets.neighbors
    mask = nb >= 0
    npts = pts[np.maximum(nb, 0)]                      # (S, m, dim)
    target = pts[sets.order]                            # (S, dim)
    inv_l2 = 1.0 / (l * l)
    rhs = np.exp(-np.sum((npts - target[:, None, :]) ** 2, axis=-1) * inv_l2)
    rhs = np.where(mask, rhs, 0.0)
    K = np.exp(-np.sum((npts[:, :, None, :] - npts[:, None, :, :]) ** 2, axis=-1) * inv_l2)
    pair = mask[:, :, None] & mask[:, None, :]
    eye = np.eye(m, dtype=bool)
    # padded slots become identity rows/cols with zero right-hand side
    K = np.where(pair, K, 0.0) + np.where(eye, jitter, 0.0) * pair + (eye & ~pair)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        bad = _first_non_pd(K)
        raise NumericalError(f"singular neighbor correlation submatrix at ordering position {bad}") from None
    tmp = _batched_solve_lower(L, rhs)
    coef = _batched_solve_upper(L, tmp)
    diag = 1.0 + jitter - np.sum(coef * rhs, axis=1)
    if np.any(~(diag > 0)):
        bad = int(np.flatnonzero(~(diag > 0))[0])
        raise NumericalError(f"non-positive conditional variance at ordering position {bad}")
    coef = np.where(mask, coef, 0.0)
    return NngpFactor(sets=sets, coef=coef, diag=diag)


def _batched_solve_lower(L, b):
    return np.linalg.solve(L, b[..., None])[..., 0]


def _batched_solve_upper(L, b):
    return np.linalg.solve(np.swapaxes(L, -1, -2), b[..., None])[..., 0]


def _first_non_pd(K) -> int:
    for i in range(K.shape[0]):
        try:
            np.linalg.cholesky(K[i])
        except np.linalg.LinAlgError:
            return i
    return -1


@dataclass(frozen=True)
class DenseCorrelation:
    """Exact correlation handled through a dense Cholesky factor.

    Shares the quad_form / log_det / root interface with `NngpFactor`.
    """

    chol: np.ndarray

    @classmethod
    def build(cls, points, l: float, jitter: float = 0.0) -> "DenseCorrelation":
        if not l > 0:
            raise ContractError("length-scale must be positive")
        try:
            return cls(np.linalg.cholesky(corr_matrix(points, l, jitter)))
        except np.linalg.LinAlgError:
            raise NumericalError(f"correlation matrix not positive definite at l={l:.4g}") from None

    @property
    def S(self) -> int:
        return self.chol.shape[0]

    def quad_form(self, w) -> float:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.S,):
            raise ContractError(f"vector of length {w.shape} does not match S={self.S}")
        u = linalg.solve_triangular(self.chol, w, lower=True)
        return float(u @ u)

    def log_det(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))

    def root(self) -> np.ndarray:
        return linalg.solve_triangular(self.chol, np.eye(self.S), lower=True)

    def precision(self) -> np.ndarray:
        R = self.root()
        return R.T @ R


def quad_form(factor, w) -> float:
    """w^T rho_tilde^{-1} w."""
    return factor.quad_form(w)


def log_det(factor) -> float:
    """log det rho_tilde."""
    return factor.log_det()


def gp_log_density(w, kp: KernelParams, factor) -> float:
    """log N(w | 0, sigma^2 rho_tilde)."""
    w = np.asarray(w, dtype=float)
    S = w.shape[0]
    s2 = kp.sigma**2
    return -0.5 * (S * (LOG_2PI + np.log(s2)) + factor.log_det() + factor.quad_form(w) / s2)


class CorrelationModel:
    """Builds correlation factors for one random-effect process.

    Uses the NNGP factor when the number of points exceeds ``threshold``
    and a dense Cholesky otherwise. Neighbor sets are computed once.
    """

    def __init__(self, points, m: int, threshold: int = 0, jitter: float = 0.0,
                 ordering_rule: str = "coordsum", rng: np.random.Generator | None = None):
        pts = _as_points(points)
        self.points = dejitter_duplicates(pts)
        self.jitter = jitter
        n = pts.shape[0]
        self.use_nngp = n > threshold and n > 1
        self.sets = None
        if self.use_nngp:
            self.sets = build_neighbor_sets(self.points, min(m, n - 1), ordering_rule, rng)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def factor(self, l: float):
        if self.use_nngp:
            return build_nngp_factor(self.points, self.sets, l, self.jitter)
        return DenseCorrelation.build(self.points, l, self.jitter)
