"""Polya-Gamma PG(b, c) random variates.

PG(1, c) is drawn exactly with Devroye's alternating-series rejection
sampler on the tilted Jacobi density. Integer shapes are sums of PG(1, c)
draws. A fractional remainder of the shape uses the truncated
sum-of-gammas representation with its missing tail mean added back, and
shapes above ``NORMAL_APPROX_MIN_B`` use a moment-matched normal.
"""

from __future__ import annotations

import math

import numba
import numpy as np

TRUNC = 0.64
N_GAMMA_TERMS = 200
NORMAL_APPROX_MIN_B = 170.0

_PI = math.pi
_HALF_PI = 0.5 * math.pi
_LOG_HALF_PI = math.log(0.5 * math.pi)


def pg_mean(b, c):
    """E[PG(b, c)] = b / (2c) * tanh(c / 2), with limit b / 4 at c = 0."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-4
    safe = np.where(small, 1.0, c)
    # tanh(c/2)/(2c) = 1/4 - c^2/48 + ...
    return b * np.where(small, 0.25 - c**2 / 48.0, np.tanh(0.5 * safe) / (2.0 * safe))


def pg_var(b, c):
    """Var[PG(b, c)] = b / (4c^3) * (sinh c - c) * sech^2(c/2), limit b / 24."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-2
    safe = np.where(small, 1.0, c)
    # (sinh c - c) sech^2(c/2) = 2 tanh(c/2) - c sech^2(c/2), stable for large c
    sech = 1.0 / np.cosh(np.minimum(0.5 * safe, 350.0))
    big = (2.0 * np.tanh(0.5 * safe) - safe * sech**2) / (4.0 * safe**3)
    series = 1.0 / 24.0 - c**2 / 240.0 + 17.0 * c**4 / 40320.0
    return b * np.where(small, series, big)


@numba.njit(cache=True)
def _norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@numba.njit(cache=True)
def _log_norm_cdf(x):
    if x > -30.0:
        return math.log(_norm_cdf(x))
    # asymptotic expansion for the far left tail
    return -0.5 * x * x - math.log(-x) - 0.5 * math.log(2.0 * math.pi)


@numba.njit(cache=True)
def _series_coef(n, x):
    k = (n + 0.5) * math.pi
    if x > TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    elif x > 0.0:
        expnt = -1.5 * (_LOG_HALF_PI + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
        return math.exp(expnt)
    return 0.0


@numba.njit(cache=True)
def _mass_texpon(z):
    t = TRUNC
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    bb = math.sqrt(1.0 / t) * (t * z - 1.0)
    aa = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(bb)
    xa = x0 + z + _log_norm_cdf(aa)
    qdivp = 4.0 / math.pi * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _rtigauss(z, rng):
    """Inverse-Gaussian(1/z, 1) truncated to (0, TRUNC)."""
    t = TRUNC
    x = t + 1.0
    if z < 1.0 / t:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def _pg1(c, rng):
    z = 0.5 * abs(c)
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    while True:
        if rng.random() < _mass_texpon(z):
            x = TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _series_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _pg_frac(b, c, rng, n_terms, tail_mean):
    """Truncated sum-of-gammas draw for 0 < b < 1 plus the tail-mean correction."""
    c2 = c * c / (4.0 * math.pi * math.pi)
    acc = 0.0
    for k in range(1, n_terms + 1):
        h = k - 0.5
        acc += rng.standard_gamma(b) / (h * h + c2)
    return acc / (2.0 * math.pi * math.pi) + tail_mean


@numba.njit(cache=True)
def _pg_vector(b, c, tail_means, mu, sd, rng, n_terms, normal_min_b):
    n = b.shape[0]
    out = np.empty(n)
    for i in range(n):
        bi = b[i]
        if bi > normal_min_b:
            w = mu[i] + sd[i] * rng.standard_normal()
            # the normal is many SDs from zero here; guard anyway
            out[i] = w if w > 0.0 else 0.5 * mu[i]
            continue
        nint = int(math.floor(bi))
        frac = bi - nint
        acc = 0.0
        for _ in range(nint):
            acc += _pg1(c[i], rng)
        if frac > 1e-12:
            acc += _pg_frac(frac, c[i], rng, n_terms, tail_means[i])
        out[i] = acc
    return out


def _truncated_tail_mean(frac, c, n_terms=N_GAMMA_TERMS):
    """Mean of the sum-of-gammas terms beyond ``n_terms`` for shape ``frac``."""
    k = np.arange(1, n_terms + 1, dtype=float)
    c2 = (np.asarray(c, dtype=float) ** 2 / (4.0 * np.pi**2))[..., None]
    head = (1.0 / ((k - 0.5) ** 2 + c2)).sum(axis=-1) / (2.0 * np.pi**2)
    return np.maximum(pg_mean(frac, c) - frac * head, 0.0)


def sample_pg_vector(b, c, rng: np.random.Generator) -> np.ndarray:
    """Independent draws w_i ~ PG(b_i, c_i)."""
    b = np.ascontiguousarray(b, dtype=float).ravel()
    c = np.ascontiguousarray(c, dtype=float).ravel()
    if b.shape != c.shape:
        raise ValueError(f"b and c differ in length ({b.size} vs {c.size})")
    if b.size == 0:
        return np.empty(0)
    if np.any(~(b > 0)) or np.any(~np.isfinite(b)):
        raise ValueError("PG shape b must be positive and finite")
    if np.any(~np.isfinite(c)):
        raise ValueError("PG tilt c must be finite")
    frac = b - np.floor(b)
    tail = np.zeros_like(b)
    needs_tail = (frac > 1e-12) & (b <= NORMAL_APPROX_MIN_B)
    if np.any(needs_tail):
        tail[needs_tail] = _truncated_tail_mean(frac[needs_tail], c[needs_tail])
    big = b > NORMAL_APPROX_MIN_B
    mu = np.zeros_like(b)
    sd = np.zeros_like(b)
    if np.any(big):
        mu[big] = pg_mean(b[big], c[big])
        sd[big] = np.sqrt(pg_var(b[big], c[big]))
    return _pg_vector(b, c, tail, mu, sd, rng, N_GAMMA_TERMS, NORMAL_APPROX_MIN_B)


def sample_pg(b: float, c: float, rng: np.random.Generator) -> float:
    """One draw from PG(b, c)."""
    if not (np.isfinite(b) and b > 0):
        raise ValueError("PG shape b must be positive and finite")
    if not np.isfinite(c):
        raise ValueError("PG tilt c must be finite")
    return float(sample_pg_vector(np.array([b]), np.array([c]), rng)[0])
