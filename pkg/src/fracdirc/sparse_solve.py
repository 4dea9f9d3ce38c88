"""Sparse operators and Jacobi-preconditioned conjugate gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class NonConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


@dataclass(frozen=True)
class SparseOperator:
    """Compressed-row matrix with a symmetry flag.

    Storage is a :class:`scipy.sparse.csr_matrix`; the row offsets, column
    indices and values are exposed under their usual names.
    """

    matrix: sp.csr_matrix
    symmetric: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def __matmul__(self, x):
        return self.matrix @ x

    def submatrix(self, rows, cols) -> sp.csr_matrix:
        return self.matrix[rows][:, cols]


@dataclass(frozen=True)
class CgReport:
    iterations: int
    residual: float
    converged: bool


def cg_solve(op, rhs, tol: float = 1e-12, max_iter: int | None = None, x0=None):
    """Solve ``op @ x = rhs`` for symmetric positive-definite ``op``.

    Stops once ``||rhs - op @ x||_2 <= tol * ||rhs||_2``.  Returns ``(x, report)``;
    the caller decides what to do with ``report.converged == False``.
    """
    A = op.matrix if isinstance(op, SparseOperator) else op
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"operator shape {A.shape} does not match rhs length {n}")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = float(np.sqrt(b @ b))
    if bnorm == 0.0:
        return np.zeros(n), CgReport(0, 0.0, True)
    target = tol * bnorm

    inv_diag = 1.0 / A.diagonal()
    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - A @ x
    rnorm = float(np.sqrt(r @ r))
    if rnorm <= target:
        return x, CgReport(0, rnorm / bnorm, True)
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    last_restart = np.inf
    for it in range(1, max_iter + 1):
        q = A @ p
        step = rz / float(p @ q)
        x += step * p
        r -= step * q
        rnorm = float(np.sqrt(r @ r))
        if rnorm <= target:
            # Guard against drift of the recursive residual.
            true_r = b - A @ x
            rnorm = float(np.sqrt(true_r @ true_r))
            if rnorm <= target:
                return x, CgReport(it, rnorm / bnorm, True)
            # Restart from the true residual; keeping the old direction
            # would pair it with an inconsistent residual.  A restart that
            # does not halve the true residual means we sit at the roundoff
            # floor: give up rather than spin until max_iter.
            if rnorm > 0.5 * last_restart:
                return x, CgReport(it, rnorm / bnorm, False)
            last_restart = rnorm
            r = true_r
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = inv_diag * r
        rz_new = float(r @ z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, CgReport(max_iter, rnorm / bnorm, False)
