from math import gamma

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, strategies as st

from fracdirc.evolution import SliceSolver
from fracdirc.fem2d import FemSpace
from fracdirc.frac_time import TemporalGrid
from fracdirc.sparse_solve import CgReport, SparseOperator, cg_solve


def test_identity_one_step():
    r = np.array([1.0, -2.0, 3.0])
    x, rep = cg_solve(SparseOperator(sp.identity(3), True), r)
    np.testing.assert_allclose(x, r)
    assert rep.iterations == 1 and rep.converged


def test_two_by_two():
    x, rep = cg_solve(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), [1.0, 1.0])
    np.testing.assert_allclose(x, [1 / 3, 1 / 3], atol=1e-14)
    assert rep.converged


def test_zero_rhs():
    x, rep = cg_solve(sp.identity(4, format="csr"), np.zeros(4))
    assert not np.any(x) and rep == CgReport(0, 0.0, True)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        cg_solve(sp.identity(3, format="csr"), np.ones(4))


def test_non_square_operator():
    with pytest.raises(ValueError):
        SparseOperator(sp.csr_matrix(np.ones((2, 3))))


def test_poisson_vs_dense(space3, rng):
    I = space3.interior
    K = space3.stiffness.matrix[I][:, I]
    b = rng.normal(size=I.size)
    x, rep = cg_solve(K, b, tol=1e-13)
    dense = scipy.linalg.solve(K.toarray(), b, assume_a="pos")
    assert rep.converged
    np.testing.assert_allclose(x, dense, atol=1e-10 * np.abs(dense).max())


def test_reports_nonconvergence():
    K = FemSpace.build(4).stiffness.matrix[:200, :200]
    _, rep = cg_solve(K + 1e-3 * sp.identity(200), np.ones(200), tol=1e-12, max_iter=3)
    assert not rep.converged and rep.iterations == 3 and rep.residual > 1e-12


def test_csr_layout_exposed(space2):
    M = space2.mass
    assert M.indptr.shape == (M.n + 1,)
    assert M.indices.shape == M.data.shape
    assert np.all(M.diagonal() > 0)


@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_random_spd(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    A = sp.csr_matrix(B @ B.T + n * np.eye(n))
    b = rng.normal(size=n)
    x, rep = cg_solve(A, b, tol=1e-12)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b) * 1.0001


@pytest.mark.parametrize("L", [3, 5, 7])
@pytest.mark.parametrize("alpha,J", [(0.5, 16), (0.5, 8192), (1.0, 16), (1.0, 8192)])
def test_slice_iteration_bound(L, alpha, J, rng):
    space = FemSpace.build(L)
    tau = TemporalGrid(J, 0.1).tau

    lead = 1.0 if alpha == 1.0 else 1.0 / gamma(2 - alpha)
    solver = SliceSolver(space, lead, tau**alpha)
    solver.solve(rng.normal(size=space.n), rng.normal(size=space.boundary.size))
    assert solver.iterations <= 10 * 5 * np.sqrt(space.n)
