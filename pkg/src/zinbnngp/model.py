"""Data model shared by the sampler, simulator and summaries.

Observations are indexed internally with dense zero-based location and time
indices; the original labels are kept on the dataset so results can be
mapped back.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import sparse


class ZinbError(Exception):
    """Base class for package errors."""


class ContractError(ZinbError, ValueError):
    """Inputs violate a documented precondition (shapes, ranges)."""


class SchemaError(ZinbError, ValueError):
    """A configured column or config key is missing."""


class DataError(ZinbError, ValueError):
    """Input data violates a dataset invariant."""


class NumericalError(ZinbError, ArithmeticError):
    """A factorization or solve failed."""


@dataclass(frozen=True)
class PanelDataset:
    """Counts with covariates, observed at (location, time) sampling units.

    ``X`` already carries the intercept column. ``loc`` and ``time`` are
    zero-based indices into ``coords`` and ``time_points``.
    """

    y: np.ndarray
    X: np.ndarray
    loc: np.ndarray
    time: np.ndarray
    coords: np.ndarray
    time_points: np.ndarray
    loc_labels: np.ndarray | None = None
    time_labels: np.ndarray | None = None
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] != y.shape[0] and y.size == 0:
            X = X.reshape(0, X.shape[-1])
        loc = np.asarray(self.loc, dtype=np.int64)
        time = np.asarray(self.time, dtype=np.int64)
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        time_points = np.asarray(self.time_points, dtype=float).ravel()
        n = y.shape[0]
        if X.shape[0] != n or loc.shape != (n,) or time.shape != (n,):
            raise ContractError("y, X, loc and time must have matching lengths")
        if n and (loc.min() < 0 or loc.max() >= coords.shape[0]):
            raise DataError("location index out of range")
        if n and (time.min() < 0 or time.max() >= time_points.shape[0]):
            raise DataError("time index out of range")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(coords)):
            raise DataError("covariates and coordinates must be finite")
        if n:
            if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
                raise DataError("counts must be finite non-negative integers")
        if not np.all(np.isfinite(time_points)):
            raise DataError("time points must be finite")
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "time_points", time_points)
        if self.loc_labels is None:
            object.__setattr__(self, "loc_labels", np.arange(1, coords.shape[0] + 1))
        if self.time_labels is None:
            object.__setattr__(self, "time_labels", np.arange(1, time_points.shape[0] + 1))

    @property
    def N(self) -> int:
        return self.y.shape[0]

    @property
    def S(self) -> int:
        return self.coords.shape[0]

    @property
    def T(self) -> int:
        return self.time_points.shape[0]

    @property
    def P(self) -> int:
        """Number of covariates, excluding the intercept."""
        return self.X.shape[1] - 1

    def unit_sizes(self) -> np.ndarray:
        """Observation counts n_{s,t} as an (S, T) array."""
        return np.bincount(self.loc * self.T + self.time, minlength=self.S * self.T).reshape(self.S, self.T)

    def original_labels(self) -> tuple[np.ndarray, np.ndarray]:
        return self.loc_labels[self.loc], self.time_labels[self.time]

    def to_frame(self) -> pd.DataFrame:
        """Tidy frame in the layout `ingest_csv` reads with the default schema."""
        names = self.covariate_names or tuple(f"x{k}" for k in range(1, self.P + 1))
        out = {
            "y": self.y,
            "location": self.loc_labels[self.loc],
            "time": self.time_labels[self.time],
        }
        for k, name in enumerate(names, start=1):
            out[name] = self.X[:, k]
        for k in range(self.coords.shape[1]):
            out[f"coord{k + 1}"] = self.coords[self.loc, k]
        out["time_point"] = self.time_points[self.time]
        return pd.DataFrame(out)


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for `ingest_csv`.

    ``time_point`` names an optional numeric column giving w_t; without it
    the sorted time labels (if numeric) or their ranks are used.
    """

    count: str = "y"
    location: str = "location"
    time: str = "time"
    covariates: tuple[str, ...] = ("x1",)
    coords: tuple[str, ...] = ("coord1", "coord2")
    time_point: str | None = "time_point"
    standardize: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "CsvSchema":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("covariates", "coords"):
            if key in d:
                d[key] = tuple([d[key]] if isinstance(d[key], str) else d[key])
        return cls(**d)


def ingest_csv(path: str | Path, schema: CsvSchema | None = None) -> PanelDataset:
    """Read a panel CSV into a validated `PanelDataset`.

    Locations and times are re-indexed densely in sorted label order and an
    intercept column is prepended to the covariates.
    """
    schema = schema or CsvSchema()
    frame = pd.read_csv(path)
    return dataset_from_frame(frame, schema)


def dataset_from_frame(frame: pd.DataFrame, schema: CsvSchema | None = None) -> PanelDataset:
    schema = schema or CsvSchema()
    time_point = schema.time_point if schema.time_point in frame.columns else None
    required = [schema.count, schema.location, schema.time, *schema.covariates, *schema.coords]
    missing = [c for c in required if c not in frame.columns]
    if schema.time_point is not None and time_point is None and schema.time_point != CsvSchema.time_point:
        missing.append(schema.time_point)
    if missing:
        raise SchemaError(f"missing columns: {missing}")

    y_raw = pd.to_numeric(frame[schema.count], errors="coerce").to_numpy(dtype=float)
    if np.any(~np.isfinite(y_raw)) or np.any(y_raw < 0) or np.any(y_raw != np.round(y_raw)):
        bad = np.flatnonzero(~np.isfinite(y_raw) | (y_raw < 0) | (y_raw != np.round(y_raw)))
        raise DataError(f"count column {schema.count!r} must hold non-negative integers (line {bad[0] + 2})")

    loc_labels, loc = np.unique(frame[schema.location].to_numpy(), return_inverse=True)
    time_labels, time = np.unique(frame[schema.time].to_numpy(), return_inverse=True)

    coord_vals = frame[list(schema.coords)].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    coords = np.full((loc_labels.size, len(schema.coords)), np.nan)
    for s in range(loc_labels.size):
        rows = coord_vals[loc == s]
        rows = rows[np.all(np.isfinite(rows), axis=1)]
        if rows.shape[0] == 0:
            raise DataError(f"location {loc_labels[s]!r} has no coordinates")
        if np.any(np.abs(rows - rows[0]) > 1e-9 * (1 + np.abs(rows[0]))):
            raise DataError(f"location {loc_labels[s]!r} has inconsistent coordinates")
        coords[s] = rows[0]

    if time_point is not None:
        tp = pd.to_numeric(frame[time_point], errors="coerce").to_numpy(dtype=float)
        time_points = np.array([tp[time == t][0] for t in range(time_labels.size)])
    elif np.issubdtype(time_labels.dtype, np.number):
        time_points = time_labels.astype(float)
    else:
        time_points = np.arange(1, time_labels.size + 1, dtype=float)

    cov = frame[list(schema.covariates)].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    if cov.size and not np.all(np.isfinite(cov)):
        raise DataError("covariates must be finite numbers")
    if schema.standardize and cov.size:
        sd = cov.std(axis=0)
        cov = (cov - cov.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    X = np.column_stack([np.ones(len(frame)), cov]) if cov.size else np.ones((len(frame), 1))

    return PanelDataset(
        y=y_raw.astype(np.int64),
        X=X,
        loc=loc,
        time=time,
        coords=coords,
        time_points=time_points,
        loc_labels=loc_labels,
        time_labels=time_labels,
        covariate_names=tuple(schema.covariates),
    )


@dataclass
class DesignMaps:
    """Incidence structure of observations on locations and times."""

    loc: np.ndarray
    time: np.ndarray
    S: int
    T: int

    @classmethod
    def from_data(cls, data: PanelDataset) -> "DesignMaps":
        return cls(data.loc, data.time, data.S, data.T)

    @property
    def V1(self) -> sparse.csr_matrix:
        n = self.loc.size
        return sparse.csr_matrix((np.ones(n), (np.arange(n), self.loc)), shape=(n, self.S))

    @property
    def V2(self) -> sparse.csr_matrix:
        n = self.time.size
        return sparse.csr_matrix((np.ones(n), (np.arange(n), self.time)), shape=(n, self.T))

    def subset(self, mask: np.ndarray) -> "DesignMaps":
        """Rows where ``mask`` holds, e.g. the at-risk rows W == 1."""
        return DesignMaps(self.loc[mask], self.time[mask], self.S, self.T)


@dataclass(frozen=True)
class PriorSpec:
    """Hyperprior constants and Metropolis proposal scales.

    Coefficient priors are independent normals per component; the binary
    (alpha) and count (beta) components are configured separately. The
    dispersion prior is uniform on (0, r_max).
    """

    alpha_mean: float | tuple = 0.0
    alpha_var: float | tuple = 100.0
    beta_mean: float | tuple = 0.0
    beta_var: float | tuple = 100.0
    a_sigma1: float = 0.01
    b_sigma1: float = 0.01
    a_sigma2: float = 0.01
    b_sigma2: float = 0.01
    a_l1: float = 2.0
    b_l1: float = 1.0
    a_l2: float = 2.0
    b_l2: float = 1.0
    a_eps: float = 0.01
    b_eps: float = 0.01
    r_proposal_sd: float = 0.1
    l_proposal_sd: float = 0.1
    r_max: float = float("inf")
    m: int = 13
    corr_jitter: float = 1e-6

    def __post_init__(self):
        positive = ["a_sigma1", "b_sigma1", "a_sigma2", "b_sigma2", "a_l1", "b_l1", "a_l2", "b_l2",
                    "a_eps", "b_eps", "r_proposal_sd", "l_proposal_sd", "r_max"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be strictly positive")
        for name in ("alpha_var", "beta_var"):
            if np.any(np.asarray(getattr(self, name), dtype=float) <= 0):
                raise ContractError(f"{name} must be strictly positive")
        if int(self.m) < 1:
            raise ContractError("neighbor count m must be at least 1")
        if self.corr_jitter < 0:
            raise ContractError("corr_jitter must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown prior keys: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)

    def coef_prior(self, component: str, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Prior mean and variance vectors of length ``p`` for 'alpha' or 'beta'."""
        out = []
        for kind in ("mean", "var"):
            v = np.asarray(getattr(self, f"{component}_{kind}"), dtype=float)
            try:
                out.append(np.broadcast_to(v, (p,)).copy())
            except ValueError:
                raise ContractError(f"{component}_{kind} has {v.size} entries, design has {p} columns") from None
        return out[0], out[1]


# Scalar hyperparameters stored on the SD scale, in reporting order.
SCALAR_PARAMS = (
    "l11", "sigma11", "l12", "sigma12", "l21", "sigma21", "l22", "sigma22",
    "sigma_eps11", "sigma_eps12", "sigma_eps21", "sigma_eps22", "r",
)
VECTOR_PARAMS = ("alpha", "beta", "a", "b", "c", "d", "eps11", "eps12", "eps21", "eps22")


@dataclass
class ChainState:
    """Current values of every sampled quantity.

    Owned by a single chain and updated in place by the Gibbs steps.
    ``omega2`` has one entry per observation; entries outside the at-risk
    set are left at their last value and carry no meaning.
    """

    alpha: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    eps11: np.ndarray
    eps12: np.ndarray
    eps21: np.ndarray
    eps22: np.ndarray
    sigma11: float = 1.0
    sigma12: float = 1.0
    sigma21: float = 1.0
    sigma22: float = 1.0
    l11: float = 1.0
    l12: float = 1.0
    l21: float = 1.0
    l22: float = 1.0
    sigma_eps11: float = 1.0
    sigma_eps12: float = 1.0
    sigma_eps21: float = 1.0
    sigma_eps22: float = 1.0
    r: float = 1.0
    W: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    omega1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    omega2: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, P: int, S: int, T: int, N: int = 0, **kw) -> "ChainState":
        z = np.zeros
        state = cls(
            alpha=z(P + 1), beta=z(P + 1), a=z(S), b=z(T), c=z(S), d=z(T),
            eps11=z(S), eps12=z(T), eps21=z(S), eps22=z(T),
            W=np.ones(N, dtype=np.int64), omega1=np.full(N, 0.25), omega2=np.full(N, 0.25),
        )
        for k, v in kw.items():
            setattr(state, k, np.asarray(v, dtype=float) if k in VECTOR_PARAMS else v)
        return state

    def copy(self) -> "ChainState":
        return replace(self, **{
            f.name: np.array(getattr(self, f.name), copy=True)
            for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray)
        })

    def check_dims(self, data: PanelDataset) -> None:
        p, S, T = data.P + 1, data.S, data.T
        expected = {"alpha": p, "beta": p, "a": S, "b": T, "c": S, "d": T,
                    "eps11": S, "eps12": T, "eps21": S, "eps22": T}
        for name, n in expected.items():
            if np.shape(getattr(self, name)) != (n,):
                raise ContractError(f"state.{name} has shape {np.shape(getattr(self, name))}, expected ({n},)")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else float(v)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ChainState":
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            v = d[f.name]
            if f.name == "W":
                kw[f.name] = np.asarray(v, dtype=np.int64)
            elif isinstance(v, list):
                kw[f.name] = np.asarray(v, dtype=float)
            else:
                kw[f.name] = float(v)
        return cls(**kw)


def linear_predictors(state: ChainState, data: PanelDataset, maps: DesignMaps | None = None):
    """Binary and count linear predictors (eta1, eta2) for every observation."""
    state.check_dims(data)
    loc, time = (maps.loc, maps.time) if maps is not None else (data.loc, data.time)
    if loc.shape[0] != data.N:
        raise ContractError("design maps do not match the dataset")
    eta1 = data.X @ state.alpha + state.a[loc] + state.b[time] + state.eps11[loc] + state.eps12[time]
    eta2 = data.X @ state.beta + state.c[loc] + state.d[time] + state.eps21[loc] + state.eps22[time]
    return eta1, eta2


def expit(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-np.logaddexp(0.0, -x))


def log1pexp(x):
    """log(1 + e^x) without overflow."""
    return np.logaddexp(0.0, x)
