import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nordepf import metrics
from nordepf.errors import DataError

from . import oracles

# Ten fixed vectors, checked against the plain-Python oracles.
FIXED = [
    ([1.0, -1.0], [0.0, 0.0]),
    ([3.0, 4.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 0.0]),
    ([100.0, 50.0], [-100.0, 50.0]),
    ([10.0, 20.0, 30.0], [12.0, 18.0, 33.0]),
    ([0.0, 0.0, 5.0], [0.0, 1.0, 5.0]),
    ([-5.0, 2.5, 7.0, -1.0], [-4.0, 3.0, 6.0, 0.0]),
    ([58.3, 65.3, 12.0, 448.0], [60.0, 61.2, 14.5, 221.0]),
    ([1e-3, -1e-3, 2.0], [0.0, 0.0, 2.0]),
    ([5.0, 5.0, 5.0, 6.0], [5.0, 5.0, 5.0, 5.0]),
    ([-20.0, 0.5, 3.0, 80.0, 41.0], [-15.0, 0.0, 3.5, 70.0, 40.0]),
]


@pytest.mark.parametrize("actual,forecast", FIXED)
def test_fixed_vectors_against_oracle(actual, forecast):
    assert metrics.mae(actual, forecast) == pytest.approx(oracles.mae(actual, forecast), rel=1e-12)
    assert metrics.rmse(actual, forecast) == pytest.approx(oracles.rmse(actual, forecast), rel=1e-12)
    assert metrics.smape(actual, forecast) == pytest.approx(oracles.smape(actual, forecast), rel=1e-12)
    if len(set(actual)) > 1:
        assert metrics.r2(actual, forecast) == pytest.approx(oracles.r2(actual, forecast), rel=1e-12)


def test_hand_values():
    assert metrics.mae([1, -1], [0, 0]) == 1.0
    assert metrics.rmse([3, 4, 0, 0, 0], [0, 0, 0, 0, 0]) == pytest.approx(math.sqrt(5))
    assert metrics.smape([100], [-100]) == 200.0
    assert metrics.smape([7, 7], [7, 7]) == 0.0
    assert metrics.rmse([2.0], [5.0]) == metrics.mae([2.0], [5.0]) == 3.0
    assert metrics.smape([0.0, 1.0], [0.0, 1.0]) == 0.0  # 0/0 term contributes 0


def test_r2_definition():
    a = np.array([1.0, 3.0, 5.0, 7.0])
    assert metrics.r2(a, np.full(4, a.mean())) == 0.0
    assert metrics.r2(a, a) == 1.0
    with pytest.raises(DataError):
        metrics.r2([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(DataError):
        metrics.r2([2.0], [1.0])


def test_week_old_repetition_can_score_negative_r2():
    # A level shift right after the reference week makes repetition worse than the mean.
    t = np.arange(24 * 14)
    y = np.where(t < 24 * 7, 10.0, 50.0) + np.sin(2 * np.pi * t / 24)
    actual = y[168:]
    naive = y[:-168]
    assert metrics.r2(actual, naive) < 0


def test_length_mismatch_and_empty():
    with pytest.raises(DataError):
        metrics.mae([1, 2], [1])
    with pytest.raises(DataError):
        metrics.rmse([], [])


def test_evaluate_report():
    rep = metrics.evaluate([1.0, 2.0, 4.0], [1.5, 2.0, 3.0])
    assert rep.n == 3
    assert set(rep.to_dict()) == set(metrics.CSV_FIELDS)


finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite | st.just(0.0)), min_size=1, max_size=50))
def test_fuzz_bounds(pairs):
    a = np.array([p[0] for p in pairs])
    f = np.array([p[1] for p in pairs])
    s = metrics.smape(a, f)
    assert 0.0 <= s <= 200.0
    assert metrics.mae(a, f) <= metrics.rmse(a, f) * (1 + 1e-12) + 1e-12


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=30), st.randoms())
def test_permutation_invariance(pairs, rnd):
    a = [p[0] for p in pairs]
    f = [p[1] for p in pairs]
    order = list(range(len(a)))
    rnd.shuffle(order)
    a2 = [a[i] for i in order]
    f2 = [f[i] for i in order]
    assert metrics.mae(a, f) == pytest.approx(metrics.mae(a2, f2), rel=1e-12, abs=1e-12)
    assert metrics.smape(a, f) == pytest.approx(metrics.smape(a2, f2), rel=1e-12, abs=1e-12)
