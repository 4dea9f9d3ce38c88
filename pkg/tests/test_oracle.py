import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracdirc.evolution import DiracApprox, forward_solve
from fracdirc.frac_time import TemporalGrid
from fracdirc.oracle import (
    EigenBasis,
    dense_generalized_eig,
    matrix_mild_oracle,
    mittag_leffler,
    scalar_dirac_solution,
    scalar_l1_solve,
    scalar_mild_solution,
    space_eigenbasis,
)

# Power series evaluated with mpmath at 200-600 digits.
FROZEN_ML = [
    (0.3, 1.0, -5.0, 0.13708086902027063889),
    (0.5, 1.0, -20.0, 0.028174348741051319319),
    (0.8, 0.8, -50.0, 0.000073315313829055338196),
    (0.8, 1.8, -50.0, 0.019910644476841940155),
    (0.5, 0.5, -3.0, 0.02718613000358643569),
    (0.9, 1.9, -100.0, 0.009989310275817128481),
    (0.5, 1.5, -0.5, 0.76861931161414825026),
]


def test_ml_examples():
    assert mittag_leffler(0.5, 1.5, 0.0) == pytest.approx(1 / math.gamma(1.5), abs=1e-15)
    assert mittag_leffler(1.0, 1.0, -1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(0.4275835761558070, abs=1e-14)


@pytest.mark.parametrize("alpha,beta,z,expect", FROZEN_ML)
def test_ml_frozen(alpha, beta, z, expect):
    assert mittag_leffler(alpha, beta, z) == pytest.approx(expect, abs=1e-14)


@given(st.floats(0.0, 200.0))
def test_ml_half_erfcx(x):
    # E_{1/2,1}(-x) = exp(x^2) erfc(x), evaluated independently by mpmath
    expect = float(mpmath.exp(mpmath.mpf(x) ** 2) * mpmath.erfc(x))
    assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(expect, abs=1e-13)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("beta_shift", [0.0, 1.0])
def test_ml_large_argument_asymptotics(alpha, beta_shift):
    beta = alpha + beta_shift if beta_shift else 1.0
    for x in (1e3, 1e4):
        # -sum_{k=1}^{4} (-x)^{-k} / Gamma(beta - alpha k); 1/Gamma at poles is 0
        approx = -sum((-x) ** -k * float(mpmath.rgamma(beta - alpha * k)) for k in range(1, 5))
        assert mittag_leffler(alpha, beta, -x) == pytest.approx(approx, abs=1e-14, rel=1e-9)


def test_ml_vectorized():
    z = np.linspace(-50, 0, 11)
    vals = mittag_leffler(0.6, 1.0, z)
    assert vals.shape == z.shape
    for zi, vi in zip(z, vals):
        assert vi == pytest.approx(mittag_leffler(0.6, 1.0, float(zi)), abs=1e-15)


def test_ml_complete_monotonicity():
    z = -np.geomspace(1e-3, 1e3, 200)
    v = mittag_leffler(0.7, 1.0, z)
    assert np.all(np.diff(v) < 0) and np.all(v > 0)


@pytest.mark.parametrize("args", [(1.2, 1.0, -1.0), (0.5, 0.0, -1.0), (0.5, 1.0, 1.0), (0.5, 1.0, -2e4), (1.0, 1.5, -1.0)])
def test_ml_rejects(args):
    with pytest.raises(ValueError):
        mittag_leffler(*args)


def test_scalar_mild_examples():
    g = TemporalGrid(4, 1.0)
    assert scalar_mild_solution(0.5, 0.0, np.ones(4), g, 1.0) == pytest.approx(1.1283792, abs=1e-7)
    assert scalar_mild_solution(1.0, 2.0, np.ones(4), g, 1.0) == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-14)
    assert scalar_mild_solution(0.7, 3.0, np.zeros(4), g, 1.0) == 0.0


def test_scalar_mild_superposition():
    # A source switched on at t_2 equals the shifted response of a full-length source.
    g = TemporalGrid(4, 1.0)
    late = np.array([0.0, 0.0, 1.0, 1.0])
    shifted = scalar_mild_solution(0.6, 4.0, np.ones(2), TemporalGrid(2, 0.5), 0.5)
    assert scalar_mild_solution(0.6, 4.0, late, g, 1.0) == pytest.approx(shifted, abs=1e-14)


def test_scalar_dirac_examples():
    assert scalar_dirac_solution(1.0, 1.0, 1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert scalar_dirac_solution(0.5, 0.0, 1.0, 4.0) == pytest.approx(0.5 / math.sqrt(math.pi), abs=1e-14)
    assert scalar_dirac_solution(0.5, 3.0, 0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        scalar_dirac_solution(0.5, 1.0, 1.0, 0.0)


def test_eig_one_by_one():
    b = dense_generalized_eig(np.array([[6.0]]), np.array([[4.0]]))
    assert b.eigenvalues[0] == pytest.approx(1.5)
    assert abs(b.vectors[0, 0]) == pytest.approx(0.5)


@pytest.mark.parametrize("L", [2, 3])
def test_eig_invariants(L, space2, space3):
    space = {2: space2, 3: space3}[L]
    basis = space_eigenbasis(space)
    I = space.interior
    A = space.stiffness.matrix[I][:, I].toarray()
    M = space.mass.matrix[I][:, I].toarray()
    V, lam = basis.vectors, basis.eigenvalues
    np.testing.assert_allclose(V.T @ M @ V, np.eye(I.size), atol=1e-10)
    assert np.linalg.norm(A @ V - M @ V @ np.diag(lam)) <= 1e-9
    assert np.all(np.diff(lam) >= 0)


def test_eig_fundamental_mode():
    # Consistent-mass P1 overestimates: 22.9 at L=2 (16% high), within 5% from L=3 on.
    from fracdirc.fem2d import FemSpace

    lam2 = space_eigenbasis(FemSpace.build(2)).eigenvalues[0]
    lam3 = space_eigenbasis(FemSpace.build(3)).eigenvalues[0]
    assert lam2 == pytest.approx(22.87, abs=0.01)
    assert abs(lam3 - 2 * math.pi**2) <= 0.05 * 2 * math.pi**2
    assert lam3 < lam2


def test_eig_dimension_cap():
    with pytest.raises(ValueError):
        dense_generalized_eig(np.eye(201), np.eye(201))


def test_mild_oracle_zero_and_single_mode(space2):
    basis = space_eigenbasis(space2)
    grid = TemporalGrid(4, 0.1)
    assert not np.any(matrix_mild_oracle(basis, 0.5, np.zeros((4, space2.n)), grid, 0.1))
    k, c = 2, 0.7
    mode = np.zeros(space2.n)
    mode[space2.interior] = basis.vectors[:, k]
    load = space2.mass @ mode * c
    y = matrix_mild_oracle(basis, 0.5, np.tile(load, (4, 1)), grid, 0.1)
    amp = scalar_mild_solution(0.5, basis.eigenvalues[k], c * np.ones(4), grid, 0.1)
    np.testing.assert_allclose(y, amp * mode, atol=1e-13)


def test_mild_oracle_steady_state(space2):
    basis = space_eigenbasis(space2)
    I = space2.interior
    load = space2.mass @ np.ones(space2.n)
    t = 50.0 / basis.eigenvalues[0]
    y = matrix_mild_oracle(basis, 1.0, np.tile(load, (1, 1)), TemporalGrid(1, t), t)
    steady = np.linalg.solve(space2.stiffness.matrix[I][:, I].toarray(), load[I])
    np.testing.assert_allclose(y[I], steady, atol=1e-6)


def test_mild_oracle_dirac(space2):
    basis = space_eigenbasis(space2)
    payload = np.zeros(space2.n)
    payload[space2.interior[4]] = 1.0
    y = matrix_mild_oracle(basis, 1.0, DiracApprox("initial", payload), TemporalGrid(2, 1.0), 0.3)
    c = basis.to_modes(payload)
    np.testing.assert_allclose(y, basis.from_modes(c * np.exp(-basis.eigenvalues * 0.3)), atol=1e-14)


def test_basis_round_trip(space3, rng):
    basis = space_eigenbasis(space3)
    amp = rng.normal(size=basis.eigenvalues.size)
    x = basis.from_modes(amp)
    assert not np.any(x[space3.boundary])
    np.testing.assert_allclose(basis.to_modes(space3.mass @ x), amp, atol=1e-12)


def test_scalar_l1_surrogate():
    # A = 0, M = 1, tau = 1: one L1 step gives Gamma(2 - alpha) * tau**alpha
    w = scalar_l1_solve(0.5, 0.0, np.ones(1), TemporalGrid(1, 1.0))
    assert w[0] == pytest.approx(math.gamma(1.5), abs=1e-15)
    exact = 1 / math.gamma(1.5)
    gaps = []
    for J in (64, 256, 1024):
        grid = TemporalGrid(J, 1.0)
        w = scalar_l1_solve(0.5, 0.0, np.ones(J), grid)
        gaps.append(abs(w[0] - grid.tau**0.5 * exact) / grid.tau**0.5)
    # first-slice relative gap is scale invariant; the max-over-time gap shrinks like tau**alpha
    np.testing.assert_allclose(gaps, gaps[0], rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_temporal_order_at_final_time(alpha, space2):
    # Semidiscrete oracle at t_J vs the fully discrete solution; constant load.
    basis = space_eigenbasis(space2)
    load = space2.mass @ np.ones(space2.n)
    errs = []
    Js = [16, 64, 256]
    for J in Js:
        grid = TemporalGrid(J, 0.1)
        loads = np.tile(load, (J, 1))
        W = forward_solve(alpha, grid, space2, loads).final
        y = matrix_mild_oracle(basis, alpha, loads, grid, 0.1)
        e = W - y
        errs.append(math.sqrt(e @ (space2.mass @ e)))
    orders = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(4)
    # The lower bound is alpha - 0.1; in practice the error at a fixed positive time is O(tau).
    assert np.all(orders >= alpha - 0.1)
    np.testing.assert_allclose(orders, 1.0, atol=0.1)
