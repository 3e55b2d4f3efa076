import numpy as np
import pytest
from scipy import stats

from zinbnngp.polyagamma import pg_mean, pg_var, sample_pg, sample_pg_vector

N_DRAWS = 100_000


def series_mean(b, c, terms=2_000_000):
    """E[PG(b, c)] from the infinite convolution-of-gammas representation."""
    k = np.arange(1, terms + 1, dtype=float)
    return b / (2 * np.pi**2) * np.sum(1.0 / ((k - 0.5) ** 2 + c**2 / (4 * np.pi**2)))


def series_var(b, c, terms=200_000):
    k = np.arange(1, terms + 1, dtype=float)
    return b / (4 * np.pi**4) * np.sum(1.0 / ((k - 0.5) ** 2 + c**2 / (4 * np.pi**2)) ** 2)


@pytest.mark.parametrize("b,c", [(1, 0), (2, 0), (1, 3), (0.4, -2.0), (7, 0.5)])
def test_analytic_moments_match_series(b, c):
    assert pg_mean(b, c) == pytest.approx(series_mean(b, c), rel=1e-6)
    assert pg_var(b, c) == pytest.approx(series_var(b, c), rel=1e-5)


def test_small_tilt_limits():
    assert pg_mean(1.0, 0.0) == 0.25
    assert pg_var(1.0, 0.0) == pytest.approx(1 / 24)
    assert pg_mean(3.0, 1e-6) == pytest.approx(0.75)
    assert pg_var(1.0, 1e-3) == pytest.approx(series_var(1.0, 1e-3), rel=1e-6)


def _mean_z(draws, b, c):
    se = np.sqrt(pg_var(b, c) / draws.size)
    return (draws.mean() - pg_mean(b, c)) / se


@pytest.mark.parametrize("b,c,expected", [(1, 0, 0.25), (2, 0, 0.5), (1, 3, np.tanh(1.5) / 6)])
def test_sample_mean_examples(b, c, expected):
    rng = np.random.default_rng(11)
    draws = sample_pg_vector(np.full(N_DRAWS, b, dtype=float), np.full(N_DRAWS, c, dtype=float), rng)
    assert pg_mean(b, c) == pytest.approx(expected, rel=1e-12)
    assert abs(draws.mean() - expected) < 3 * draws.std() / np.sqrt(N_DRAWS)


def test_vector_empty_and_mismatch():
    rng = np.random.default_rng(0)
    assert sample_pg_vector([], [], rng).shape == (0,)
    with pytest.raises(ValueError):
        sample_pg_vector([1.0, 1.0], [0.0], rng)


def test_vector_componentwise_means():
    rng = np.random.default_rng(5)
    reps = N_DRAWS
    for b, c in [((1, 1), (0, 0)), ((1, 2), (1, -1))]:
        bb = np.tile(np.asarray(b, dtype=float), reps)
        cc = np.tile(np.asarray(c, dtype=float), reps)
        out = sample_pg_vector(bb, cc, rng).reshape(reps, 2)
        for k in range(2):
            assert abs(_mean_z(out[:, k], b[k], c[k])) < 3
    # tanh symmetry: per-unit-b means at c = 1 and c = -1 agree
    assert pg_mean(1, 1) == pytest.approx(pg_mean(2, -1) / 2)


@pytest.mark.parametrize("b,c", [(0, 0.0), (-1, 1.0), (1, np.inf), (np.nan, 0.0)])
def test_domain_errors(b, c):
    with pytest.raises(ValueError):
        sample_pg(b, c, np.random.default_rng(0))


def test_draws_positive_across_regimes():
    rng = np.random.default_rng(2)
    b = np.array([0.01, 0.5, 1, 1.7, 12, 169.5, 400])
    c = np.array([0.0, -40, 25, 0.001, -3, 60, 0.2])
    out = sample_pg_vector(np.repeat(b, 2000), np.repeat(c, 2000), rng)
    assert np.all(out > 0)


def test_symmetry_in_tilt():
    rng = np.random.default_rng(3)
    n = 10_000
    for b, c in [(1.0, 1.3), (2.6, 4.0)]:
        x = sample_pg_vector(np.full(n, b), np.full(n, c), rng)
        y = sample_pg_vector(np.full(n, b), np.full(n, -c), rng)
        assert stats.ks_2samp(x, y).pvalue > 1e-3


def test_additivity_in_shape():
    rng = np.random.default_rng(4)
    n = 10_000
    for b1, b2, c in [(1.0, 1.0, 0.7), (0.6, 1.9, -2.0)]:
        whole = sample_pg_vector(np.full(n, b1 + b2), np.full(n, c), rng)
        parts = sample_pg_vector(np.full(n, b1), np.full(n, c), rng) + sample_pg_vector(np.full(n, b2), np.full(n, c), rng)
        assert stats.ks_2samp(whole, parts).pvalue > 1e-3


@pytest.mark.parametrize("b,c", [(1, 0.0), (1, 2.5), (3.5, -1.0), (0.3, 0.5), (200, 1.5)])
def test_first_two_moments(b, c):
    rng = np.random.default_rng(6)
    x = sample_pg_vector(np.full(N_DRAWS, float(b)), np.full(N_DRAWS, c), rng)
    assert abs(_mean_z(x, b, c)) < 4
    # SE of the sample variance from the fourth central moment
    dev = x - x.mean()
    se_var = np.sqrt((np.mean(dev**4) - np.mean(dev**2) ** 2) / x.size)
    assert abs(x.var() - pg_var(b, c)) < 4 * se_var


def test_seeded_reproducibility():
    b = np.array([1.0, 2.5, 300.0])
    c = np.array([0.2, -1.0, 3.0])
    a = sample_pg_vector(b, c, np.random.default_rng(9))
    bb = sample_pg_vector(b, c, np.random.default_rng(9))
    np.testing.assert_array_equal(a, bb)
