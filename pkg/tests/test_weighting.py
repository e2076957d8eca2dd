"""Weight scheme tests: simplex validity, exact values, recursion consistency."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgdtrack import ParameterError, WeightScheme, recursion_coefficients, weights
from dgdtrack.weighting import GammaPowerTracker

UNIFORM = WeightScheme("uniform")


def test_uniform_equal_split():
    assert np.array_equal(weights(UNIFORM, 4), [0.25, 0.25, 0.25, 0.25])


@pytest.mark.parametrize("scheme", [UNIFORM, WeightScheme("discounted", 0.7)])
def test_horizon_one_is_point_mass(scheme):
    assert np.array_equal(weights(scheme, 1), [1.0])


def test_discounted_weights_hand_value():
    # gamma=0.7, t=2: ((1-g)*g, (1-g)) / (1-g^2) = (0.21, 0.3) / 0.51
    w = weights(WeightScheme("discounted", 0.7), 2)
    assert w[0] == pytest.approx(0.21 / 0.51, rel=1e-14)
    assert w[1] == pytest.approx(0.3 / 0.51, rel=1e-14)


def test_uniform_recursion_hand_value():
    assert recursion_coefficients(UNIFORM, 9) == (pytest.approx(0.9), pytest.approx(0.1))


def test_discounted_recursion_matches_weights_at_t2():
    scheme = WeightScheme("discounted", 0.7)
    old_c, new_c = recursion_coefficients(scheme, 1)
    w2 = weights(scheme, 2)
    assert old_c == pytest.approx(w2[0], rel=1e-14)
    assert new_c == pytest.approx(w2[1], rel=1e-14)
    assert old_c == pytest.approx(0.21 / 0.51, rel=1e-14)


def test_discounted_old_coeff_limit_near_gamma_one():
    # gamma*(1-gamma)/(1-gamma^2) = gamma/(1+gamma) -> 1/2
    old_c, _ = recursion_coefficients(WeightScheme("discounted", 1.0 - 1e-9), 1)
    assert old_c == pytest.approx(0.5, abs=1e-8)


@given(t=st.integers(min_value=1, max_value=2000))
def test_uniform_simplex(t):
    w = weights(UNIFORM, t)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.all(w >= 0) and np.all(w <= 1)
    assert np.all(w == w[0])  # exchange-invariant


@given(
    t=st.integers(min_value=1, max_value=500),
    gamma=st.floats(min_value=0.01, max_value=0.99),
)
@settings(max_examples=200)
def test_discounted_simplex_and_monotone(t, gamma):
    w = weights(WeightScheme("discounted", gamma), t)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.all(w >= 0) and np.all(w <= 1)
    assert np.all(np.diff(w) >= 0)  # newer samples never weigh less


@given(
    t=st.integers(min_value=1, max_value=499),
    gamma=st.floats(min_value=0.001, max_value=0.9999),
)
@settings(max_examples=300)
def test_coefficients_sum_to_one(t, gamma):
    for scheme in (UNIFORM, WeightScheme("discounted", gamma)):
        old_c, new_c = recursion_coefficients(scheme, t)
        assert abs(old_c + new_c - 1.0) <= 1e-14


@pytest.mark.parametrize("scheme", [UNIFORM] + [WeightScheme("discounted", g)
                                                for g in (0.3, 0.7, 0.95)])
def test_recursion_rebuilds_closed_form_up_to_500(scheme):
    prev = weights(scheme, 1)
    for t in range(1, 500):
        old_c, new_c = recursion_coefficients(scheme, t)
        rebuilt = np.append(old_c * prev, new_c)
        closed = weights(scheme, t + 1)
        assert np.max(np.abs(rebuilt - closed)) <= 1e-12
        prev = closed


def test_gamma_power_tracker_matches_direct_pow_across_reanchor():
    tracker = GammaPowerTracker(0.995, t=1)
    for t in range(2, 2501):
        power = tracker.advance()
        assert power == pytest.approx(0.995**t, rel=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1, 1.5])
def test_invalid_gamma_rejected(gamma):
    with pytest.raises(ParameterError):
        WeightScheme("discounted", gamma)


def test_uniform_takes_no_gamma():
    with pytest.raises(ParameterError):
        WeightScheme("uniform", 0.5)


def test_unknown_kind_rejected():
    with pytest.raises(ParameterError):
        WeightScheme("sliding-window")


def test_bad_horizon_rejected():
    with pytest.raises(ParameterError):
        weights(UNIFORM, 0)
    with pytest.raises(ParameterError):
        recursion_coefficients(UNIFORM, 0)
