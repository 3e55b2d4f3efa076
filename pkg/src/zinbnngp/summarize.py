"""Posterior summaries, recovery scoring, fitted counts and risk ratios.

All intervals are equal-tailed 95% percentile intervals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .model import SCALAR_PARAMS, ChainState, ContractError, PanelDataset, expit
from .samples import PosteriorSamples

LEVELS = (2.5, 97.5)
EFFECT_NAMES = ("a", "b", "c", "d")
_SKIP = ("eta1", "eta2")


def ess(x) -> float:
    """Effective sample size with Geyer's initial positive sequence truncation."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return float(n)
    x = x - x.mean()
    var = x @ x / n
    if var == 0 or not np.isfinite(var):
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / var
    # pair sums Gamma_k = rho_{2k} + rho_{2k+1}; keep the initial positive run, made monotone
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m + 1:2]
    stop = np.argmax(pairs <= 0) if np.any(pairs <= 0) else pairs.size
    pairs = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * pairs.sum() if pairs.size else 1.0
    return float(n / max(tau, 1.0 / np.log10(max(n, 10))))


@dataclass
class SummaryTable:
    """One row per scalar column: mean, percentile interval, ESS, MH acceptance."""

    frame: pd.DataFrame

    def row(self, column: str) -> pd.Series:
        return self.frame.set_index("parameter").loc[column]

    def to_csv(self, path) -> Path:
        path = Path(path)
        self.frame.to_csv(path, index=False, float_format="%.6g")
        return path

    def digest(self) -> dict:
        scalars = self.frame[self.frame["parameter"].isin(SCALAR_PARAMS + ("alpha0", "alpha1", "beta0", "beta1"))]
        return {r.parameter: {"mean": r.mean, "lo": r.lo, "hi": r.hi, "ess": r.ess} for r in scalars.itertuples()}


def summarize_samples(samples: PosteriorSamples, include_eta: bool = False) -> SummaryTable:
    if samples.n_draws < 2:
        raise ContractError(f"need at least 2 draws to summarize, found {samples.n_draws}")
    rows = []
    for name, arr in samples.draws.items():
        if name in _SKIP and not include_eta:
            continue
        acc = samples.acceptance.get(name, np.nan)
        lo, hi = np.percentile(arr, LEVELS, axis=0)
        for k, col in enumerate(samples.columns[name]):
            rows.append((col, name, arr[:, k].mean(), lo[k], hi[k], ess(arr[:, k]), acc))
    frame = pd.DataFrame(rows, columns=["parameter", "group", "mean", "lo", "hi", "ess", "acceptance"])
    return SummaryTable(frame)


@dataclass
class RecoveryReport:
    coverage: pd.DataFrame
    correlations: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"coverage": {r.parameter: bool(r.covered) for r in self.coverage.itertuples()},
                "correlations": self.correlations}


def _truth_value(truth, name):
    return truth[name] if isinstance(truth, dict) else getattr(truth, name)


def recovery_score(samples: PosteriorSamples, truth: ChainState | dict) -> RecoveryReport:
    """Coverage of truth by each 95% interval, and effect-vector correlations."""
    rows = []
    for name in ("alpha", "beta") + SCALAR_PARAMS:
        if name not in samples:
            continue
        arr = samples.draws[name]
        true = np.atleast_1d(np.asarray(_truth_value(truth, name), dtype=float))
        if true.size != arr.shape[1]:
            raise ContractError(f"{name}: truth has {true.size} entries, samples have {arr.shape[1]}")
        lo, hi = np.percentile(arr, LEVELS, axis=0)
        for k, col in enumerate(samples.columns[name]):
            rows.append((col, true[k], arr[:, k].mean(), lo[k], hi[k], bool(lo[k] <= true[k] <= hi[k])))
    coverage = pd.DataFrame(rows, columns=["parameter", "truth", "mean", "lo", "hi", "covered"])
    corr = {}
    for name in EFFECT_NAMES:
        if name not in samples:
            continue
        est = samples.draws[name].mean(axis=0)
        true = np.asarray(_truth_value(truth, name), dtype=float)
        if true.shape != est.shape:
            raise ContractError(f"{name}: truth has shape {true.shape}, posterior mean {est.shape}")
        corr[name] = pearson(est, true)
    return RecoveryReport(coverage, corr)


def pearson(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size < 2 or np.std(u) == 0 or np.std(v) == 0:
        return float("nan")
    return float(np.corrcoef(u, v)[0, 1])


# ---------------------------------------------------------------------------
# fitted values


def eta_draws(samples: PosteriorSamples, data: PanelDataset) -> tuple[np.ndarray, np.ndarray]:
    """Linear predictors per draw, (n_draws, N) each; stored paths are used when present."""
    if "eta1" in samples and "eta2" in samples:
        return samples.draws["eta1"], samples.draws["eta2"]
    d = samples.draws
    for name, width in (("alpha", data.P + 1), ("a", data.S), ("b", data.T)):
        if d[name].shape[1] != width:
            raise ContractError(f"samples for {name!r} do not match the dataset ({d[name].shape[1]} != {width})")
    loc, time = data.loc, data.time
    eta1 = d["alpha"] @ data.X.T + (d["a"] + d["eps11"])[:, loc] + (d["b"] + d["eps12"])[:, time]
    eta2 = d["beta"] @ data.X.T + (d["c"] + d["eps21"])[:, loc] + (d["d"] + d["eps22"])[:, time]
    return eta1, eta2


def fitted_draws(samples: PosteriorSamples, data: PanelDataset) -> np.ndarray:
    """Per-draw ZINB means phi * r * exp(eta2), shape (n_draws, N)."""
    eta1, eta2 = eta_draws(samples, data)
    r = samples["r"][:, None]
    return expit(eta1) * r * np.exp(eta2)


def _band(draws: np.ndarray):
    lo, hi = np.nanpercentile(draws, LEVELS, axis=0)
    return np.nanmean(draws, axis=0), lo, hi


@dataclass
class FittedCounts:
    """Posterior mean and band of E[Y] per observation, with unit aggregates."""

    draws: np.ndarray
    data: PanelDataset

    @property
    def observations(self) -> pd.DataFrame:
        mean, lo, hi = _band(self.draws)
        d = self.data
        return pd.DataFrame({"location": d.loc_labels[d.loc], "time": d.time_labels[d.time],
                             "y": d.y, "mean": mean, "lo": lo, "hi": hi})

    def by_unit(self) -> pd.DataFrame:
        """Tidy per-(location, time) table: entity, time, mean, lo, hi."""
        d = self.data
        key = d.loc * d.T + d.time
        units, inv = np.unique(key, return_inverse=True)
        agg = group_means(self.draws, inv, units.size)
        mean, lo, hi = _band(agg)
        return pd.DataFrame({"entity": d.loc_labels[units // d.T], "time": d.time_labels[units % d.T],
                             "mean": mean, "lo": lo, "hi": hi})

    def by_location(self) -> pd.DataFrame:
        d = self.data
        agg = group_means(self.draws, d.loc, d.S)
        mean, lo, hi = _band(agg)
        return pd.DataFrame({"entity": d.loc_labels, "mean": mean, "lo": lo, "hi": hi})


def group_means(draws: np.ndarray, index: np.ndarray, n_groups: int) -> np.ndarray:
    """Columnwise means of ``draws`` over observations sharing ``index``; NaN for empty groups."""
    n = np.bincount(index, minlength=n_groups).astype(float)
    sums = np.zeros((draws.shape[0], n_groups))
    np.add.at(sums.T, index, draws.T)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / np.where(n > 0, n, np.nan)


def fitted_counts(samples: PosteriorSamples, data: PanelDataset) -> FittedCounts:
    return FittedCounts(fitted_draws(samples, data), data)


# ---------------------------------------------------------------------------
# risk ratios


@dataclass
class RiskRatios:
    frame: pd.DataFrame
    missing: dict[str, int]


def risk_ratio(samples: PosteriorSamples, data: PanelDataset, groups, reference) -> RiskRatios:
    """Per-time ratio of group-mean fitted counts to the reference group.

    ``groups`` maps every location label to a group (dict), or gives the
    group of each location in label order. Group means are unweighted means
    over locations of each location's mean fitted count at that time.
    Draws where the reference mean is zero are recorded as missing.
    """
    if isinstance(groups, dict):
        missing_locs = [lab for lab in data.loc_labels if lab not in groups]
        if missing_locs:
            raise ContractError(f"locations without a group: {missing_locs[:5]}")
        assign = np.array([groups[lab] for lab in data.loc_labels], dtype=object)
    else:
        assign = np.asarray(groups, dtype=object)
        if assign.shape != (data.S,):
            raise ContractError(f"need one group per location ({data.S}), got {assign.shape}")
    names = list(dict.fromkeys(assign))
    if reference not in names:
        raise ContractError(f"reference group {reference!r} has no locations")

    draws = fitted_draws(samples, data)
    # per (location, time) mean, then unweighted average over each group's locations
    unit = group_means(draws, data.loc * data.T + data.time, data.S * data.T).reshape(-1, data.S, data.T)
    gmeans = {}
    for g in names:
        cols = unit[:, assign == g, :]
        with np.errstate(invalid="ignore"):
            gmeans[g] = np.nanmean(cols, axis=1) if np.any(~np.isnan(cols)) else np.full((draws.shape[0], data.T), np.nan)
    ref = gmeans[reference]
    rows, missing = [], {}
    for g in names:
        with np.errstate(invalid="ignore", divide="ignore"):
            rr = np.where(ref > 0, gmeans[g] / np.where(ref > 0, ref, 1.0), np.nan)
        missing[str(g)] = int(np.sum(np.isnan(rr) & ~np.isnan(gmeans[g])))
        for t in range(data.T):
            col = rr[:, t]
            col = col[~np.isnan(col)]
            if col.size:
                lo, hi = np.percentile(col, LEVELS)
                rows.append((g, data.time_labels[t], col.mean(), lo, hi, draws.shape[0] - col.size))
            else:
                rows.append((g, data.time_labels[t], np.nan, np.nan, np.nan, draws.shape[0]))
    frame = pd.DataFrame(rows, columns=["entity", "time", "mean", "lo", "hi", "n_missing"])
    return RiskRatios(frame, missing)


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain))
    return path


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))
