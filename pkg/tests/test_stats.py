import math

import mpmath
import numpy as np
import pytest

from nordepf import stats
from nordepf.errors import ConfigError, InsufficientDataError
from nordepf.stats import DMConfig

from .oracles import hln_closed_form


def test_loss_differential_examples():
    np.testing.assert_array_equal(stats.loss_differential([1, 2], [1, 2], [1, 2]), [0, 0])
    np.testing.assert_array_equal(stats.loss_differential([0.0], [1.0], [3.0]), [-8.0])


def test_bandwidth_zero_is_sample_variance(rng):
    d = rng.normal(size=500)
    assert stats.newey_west_variance(d, 0) == pytest.approx(np.var(d), rel=1e-12)


def test_white_noise_long_run_variance():
    d = np.random.default_rng(1).normal(0, 2, size=100_000)
    assert stats.newey_west_variance(d, 23) == pytest.approx(4.0, rel=0.05)


def test_ma1_long_run_variance():
    # d_t = e_t + theta e_{t-1}: long-run variance (1 + theta)^2. Bartlett weights bias it down
    # by 2 theta / (bandwidth + 1), about 2% here.
    e = np.random.default_rng(2).normal(size=200_001)
    theta = 0.5
    d = e[1:] + theta * e[:-1]
    assert stats.newey_west_variance(d, 23) == pytest.approx((1 + theta) ** 2, rel=0.05)


def test_hln_factor():
    for n, h in [(100, 24), (8736, 24), (50, 1), (1000, 7)]:
        assert stats.hln_factor(n, h) == pytest.approx(hln_closed_form(n, h), abs=1e-12)
    assert stats.hln_factor(100, 24) == pytest.approx(0.76498, abs=1e-5)
    # h = 1 reduces to sqrt((n - 1) / n).
    assert stats.hln_factor(50, 1) == pytest.approx(math.sqrt(49 / 50), abs=1e-15)
    with pytest.raises(InsufficientDataError):
        stats.hln_factor(24, 24)


@pytest.mark.parametrize("x,df", [(-3.0, 5), (-0.5, 10), (0.0, 3), (1.7, 99), (-2.2, 8735), (4.0, 1)])
def test_student_t_cdf_against_mpmath(x, df):
    mpmath.mp.dps = 40
    half = mpmath.mpf(df) / 2
    ref = mpmath.mpf(1) / 2 + x * mpmath.gamma(half + mpmath.mpf(1) / 2) / (
        mpmath.sqrt(mpmath.pi * df) * mpmath.gamma(half)
    ) * mpmath.hyp2f1(mpmath.mpf(1) / 2, half + mpmath.mpf(1) / 2, mpmath.mpf(3) / 2, -mpmath.mpf(x) ** 2 / df)
    assert stats.student_t_cdf(x, df) == pytest.approx(float(ref), abs=1e-10)


@pytest.mark.parametrize("p,stars", [(0.0005, "***"), (0.001, "**"), (0.005, "**"), (0.01, "*"), (0.049, "*"), (0.05, "ns"), (0.4, "ns")])
def test_stars(p, stars):
    assert stats.significance_stars(p) == stars


def test_degenerate_cases():
    zero = stats.dm_test(np.zeros(100))
    assert zero.dm_stat == 0.0 and zero.p_value == 0.5 and zero.stars == "ns"
    neg = stats.dm_test(np.full(100, -4.0))
    assert neg.degenerate == "dominance"
    assert neg.dm_stat == -math.inf and neg.p_value == 0.0
    with pytest.raises(InsufficientDataError):
        stats.dm_test(np.ones(10))
    with pytest.raises(ConfigError):
        DMConfig(horizon=0)


def test_direction_and_antisymmetry(rng):
    actual = rng.normal(size=500)
    good = actual + rng.normal(0, 0.5, 500)
    bad = actual + rng.normal(0, 1.5, 500)
    ab = stats.dm_test(stats.loss_differential(actual, good, bad))
    ba = stats.dm_test(stats.loss_differential(actual, bad, good))
    assert ab.dm_stat < 0 and ab.stars == "***"
    assert ab.dm_stat == -ba.dm_stat
    assert ab.hln_stat == -ba.hln_stat
    assert ab.p_value + ba.p_value == pytest.approx(1.0, abs=1e-12)


def test_two_sided_option(rng):
    d = rng.normal(0.1, 1, 300)
    one = stats.dm_test(d)
    two = stats.dm_test(d, DMConfig(one_sided=False))
    assert two.p_value == pytest.approx(2 * min(one.p_value, 1 - one.p_value))


def test_pairwise_matrix(rng):
    actual = rng.normal(size=200)
    fc = {"gbdt": actual + rng.normal(0, 0.3, 200), "ridge": actual + rng.normal(0, 0.6, 200),
          "naive-24h": actual + rng.normal(0, 1.0, 200)}
    table = stats.pairwise_matrix(actual, fc, zone="NO1")
    assert list(zip(table.model_a, table.model_b)) == list(stats.DEFAULT_PAIRS)
    assert (table.dm_stat < 0).all()
    self_pair = stats.pairwise_matrix(actual, fc, pairs=[("gbdt", "gbdt")])
    assert self_pair.stars.iloc[0] == "ns"
    with pytest.raises(ConfigError):
        stats.pairwise_matrix(actual, {"gbdt": fc["gbdt"]})
    with pytest.raises(ConfigError):
        stats.pairwise_matrix(actual, fc, pairs=[("gbdt", "lstm")])
