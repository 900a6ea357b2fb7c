import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structure2vec.metrics import accuracy, auc, auc_bruteforce, mae, mean_predictor, rmse


def test_auc_examples():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auc([1, 2, 3, 4], [0, 1, 0, 1]) == 0.75


def test_auc_ties_count_half():
    assert auc([1, 1, 1, 1], [0, 1, 0, 1]) == 0.5
    assert auc([0, 1, 1], [0, 0, 1]) == 0.75


def test_auc_errors():
    with pytest.raises(ValueError):
        auc([1, 2], [1, 1])
    with pytest.raises(ValueError):
        auc([1, 2], [0, 2])
    with pytest.raises(ValueError):
        auc([1, 2, 3], [0, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(0, 1)), min_size=2, max_size=60))
def test_auc_equals_bruteforce_with_ties(rows):
    s = [r[0] for r in rows]
    y = [r[1] for r in rows]
    if len(set(y)) < 2:
        return
    assert auc(s, y) == auc_bruteforce(s, y)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_auc_invariant_under_monotone_maps(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 80))
    y = np.r_[0, 1, rng.integers(0, 2, n - 2)]
    s = np.round(rng.normal(size=n), 1)
    base = auc(s, y)
    assert auc(np.exp(s), y) == base
    assert auc(3.0 * s + 7.0, y) == base


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([1, 0, 1, 1], [1, 0, 1, 0]) == 0.75
    with pytest.raises(ValueError):
        accuracy([1], [1, 2])


def test_mae_rmse_examples():
    assert (mae([1, 2], [1, 2]), rmse([1, 2], [1, 2])) == (0.0, 0.0)
    assert (mae([1, 1], [0, 2]), rmse([1, 1], [0, 2])) == (1.0, 1.0)
    assert mae([0, 0], [0, 2]) == 1.0 and rmse([0, 0], [0, 2]) == pytest.approx(math.sqrt(2), abs=1e-15)
    for f in (mae, rmse):
        with pytest.raises(ValueError):
            f([], [])
        with pytest.raises(ValueError):
            f([1], [1, 2])


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=50))
def test_rmse_at_least_mae(rows):
    p = [r[0] for r in rows]
    t = [r[1] for r in rows]
    assert rmse(p, t) >= mae(p, t) * (1 - 1e-12)


def test_mean_predictor():
    m = mean_predictor([1, 3])
    assert m.value == 2.0 and np.array_equal(m.predict(3), [2.0, 2.0, 2.0])
    t = np.array([1.0, 2.0, 6.0, 7.0])
    own = mae(mean_predictor(t).predict(4), t)
    assert own == pytest.approx(np.mean(np.abs(t - t.mean())))
    with pytest.raises(ValueError):
        mean_predictor([])
