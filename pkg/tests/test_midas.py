import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfqvar import midas, timegrid
from mfqvar.errors import InsufficientHistoryError


def test_flat_weights():
    assert np.allclose(midas.beta_weights(4, 1, 1).weights, 0.25, atol=1e-15)


def test_hand_evaluated_weights():
    w = midas.beta_weights(3, 1, 2).weights
    assert np.allclose(w, [2 / 3, 1 / 3, 0.0], atol=1e-15)
    assert w[-1] == 0.0


@pytest.mark.parametrize("omega2", [1.0, 2.5, 300.0])
def test_single_lag(omega2):
    assert midas.beta_weights(1, 1, omega2).weights.tolist() == [1.0]


def test_large_omega2_concentrates_on_first_lag():
    w = midas.beta_weights(12, 1, 1e4).weights
    assert abs(w[0] - 1.0) < 1e-3


def test_general_omega1_and_validation():
    w = midas.beta_weights(10, 2.0, 3.0).weights
    assert abs(w.sum() - 1) < 1e-12
    assert np.argmax(w) not in (0, 9)
    with pytest.raises(ValueError):
        midas.beta_weights(0, 1, 2)
    with pytest.raises(ValueError):
        midas.beta_weights(5, 1, 0.5)


@given(st.integers(1, 60), st.floats(1.0, 200.0))
def test_normalized_nonnegative_and_decaying(k, omega2):
    w = midas.beta_weights(k, 1.0, omega2).weights
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.all(w >= 0)
    if omega2 > 1 and k > 1:
        pos = w[w > 0]
        assert np.all(np.diff(pos) <= 0)


def _panel(mv):
    months = np.arange(np.datetime64("2000-01"), np.datetime64("2000-01") + len(mv))
    day = np.datetime64(str(months[-1] + 1) + "-03")
    return timegrid.panel_from_arrays([day], [0.0], months, mv, 1)


def test_weighted_sum_arithmetic():
    w = midas.BetaWeights(2, 1.0, 1.0, np.array([0.75, 0.25]))
    panel = _panel([-4.0, 2.0])
    assert midas.weighted_sum(panel, 2, w) == pytest.approx(0.5)


def test_weighted_sum_constant_series():
    w = midas.beta_weights(6, 1, 3.7)
    assert midas.weighted_sum(_panel(np.full(8, 1.3)), 8, w) == pytest.approx(1.3, abs=1e-14)


def test_weighted_sum_needs_history():
    w = midas.beta_weights(2, 1, 2)
    with pytest.raises(InsufficientHistoryError):
        midas.weighted_sum(_panel([1.0, 2.0, 3.0]), 1, w)


def test_vectorized_sums_match_scalar():
    rng = np.random.default_rng(1)
    mv = rng.standard_normal(30)
    w = midas.beta_weights(5, 1, 2.2)
    ws = midas.weighted_sums(mv, w)
    panel = _panel(mv)
    assert np.all(np.isnan(ws[:5]))
    for t in range(5, 31):
        assert ws[t] == pytest.approx(midas.weighted_sum(panel, t, w), abs=1e-13)
