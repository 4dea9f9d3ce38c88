import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracdirc.frac_time import (
    TemporalGrid,
    build_l1_weights,
    epsilon_factor,
    rl_integral_left,
    rl_integral_right,
    rl_pairing_matrix,
    rl_pairing_matrix_right,
)


def test_grid_basics():
    g = TemporalGrid(7, 0.1)
    assert g.tau == pytest.approx(0.1 / 7)
    assert g.times[0] == 0.0 and g.times[-1] == 0.1
    assert g.refine(4).J == 28
    with pytest.raises(ValueError):
        TemporalGrid(0, 1.0)
    with pytest.raises(ValueError):
        TemporalGrid(4, -1.0)


def test_weights_half_order():
    # mpmath at 30 digits: j**0.5 / Gamma(1.5)
    w = build_l1_weights(0.5, 4)
    np.testing.assert_allclose(w.b, [0, 1.1283792, 1.5957691, 1.9544100, 2.2567583], atol=1e-7)
    assert w.d[1] == pytest.approx(-0.6609893, abs=1e-7)
    assert w.d[0] == 0.0


def test_weights_alpha_09():
    w = build_l1_weights(0.9, 2)
    assert w.b1 == pytest.approx(1.0511370061, abs=1e-10)  # mpmath
    assert np.all(np.diff(w.b) > 0)


def test_weights_frozen():
    w = build_l1_weights(0.5, 4)
    with pytest.raises(ValueError):
        w.b[0] = 1.0


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_weights_reject_alpha(alpha):
    with pytest.raises(ValueError):
        build_l1_weights(alpha, 4)


def test_weights_reject_J():
    with pytest.raises(ValueError):
        build_l1_weights(0.5, 0)


@given(st.floats(0.01, 0.99), st.integers(2, 300))
def test_row_sum_and_sign(alpha, J):
    w = build_l1_weights(alpha, J)
    d = np.asarray(w.d)
    assert np.all(d[1:] <= 0)
    partial = w.b1 + np.cumsum(d[1:])  # k = 2..J
    np.testing.assert_allclose(partial, w.b[2:] - w.b[1:-1], rtol=0, atol=1e-13 * w.b[-1])


def test_epsilon_factor_examples():
    assert epsilon_factor(0.5, 1.0, 4) == pytest.approx(3.0)
    assert epsilon_factor(1.0, 1.0, 8) == pytest.approx(math.log(8))
    assert epsilon_factor(1.0, 0.25, 16) == pytest.approx(5.1666667, abs=1e-7)


def test_epsilon_factor_jump_at_one():
    # The branch at theta*alpha == 1 is ln J; the limit from below is 1 + ln J.
    J = 32
    below = epsilon_factor(1.0 - 1e-6, 1.0, J)
    assert below == pytest.approx(1.0 + math.log(J), abs=1e-4)
    assert epsilon_factor(1.0, 1.0, J) == pytest.approx(math.log(J))


def test_epsilon_factor_ranges():
    with pytest.raises(ValueError):
        epsilon_factor(0.5, 1.0, 1)
    with pytest.raises(ValueError):
        epsilon_factor(0.5, 0.0, 4)


def test_rl_left_examples():
    g = TemporalGrid(4, 1.0)
    assert rl_integral_left(0.5, np.ones(4), g)[-1] == pytest.approx(1.1283792, abs=1e-7)
    assert not np.any(rl_integral_left(0.5, np.zeros(4), g))
    g16 = TemporalGrid(8, 16.0)
    assert rl_integral_left(0.25, np.ones(8), g16)[-1] == pytest.approx(2.2065253026, abs=1e-9)  # mpmath: 2/Gamma(1.25)


def test_rl_right_examples():
    g = TemporalGrid(4, 1.0)
    assert rl_integral_right(0.5, np.ones(4), g)[0] == pytest.approx(1.1283792, abs=1e-7)
    assert not np.any(rl_integral_right(0.3, np.zeros(4), g))


@pytest.mark.parametrize("gamma", [0.2, 0.5, 0.9])
def test_rl_reflection(gamma):
    g = TemporalGrid(6, 2.0)
    first = np.eye(6)[0]
    last = np.eye(6)[-1]
    left = rl_integral_left(gamma, first, g)  # t_1..t_J
    right = rl_integral_right(gamma, last, g)  # t_0..t_{J-1}
    np.testing.assert_allclose(right, left[::-1], rtol=1e-14)


def test_rl_rejects_gamma():
    with pytest.raises(ValueError):
        rl_integral_left(1.0, np.ones(3), TemporalGrid(3))


@given(st.floats(0.05, 0.95), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_rl_duality(gamma, J, seed):
    rng = np.random.default_rng(seed)
    grid = TemporalGrid(J, float(rng.uniform(0.1, 3.0)))
    v, w = rng.normal(size=J), rng.normal(size=J)
    lhs = w @ rl_pairing_matrix(gamma, grid) @ v
    rhs = v @ rl_pairing_matrix_right(gamma, grid) @ w
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)
