"""Independent reference solutions.

* Two-parameter Mittag-Leffler function on the negative real axis.
* Exact scalar mild solutions ``y' = -lam*y + g`` (and the fractional
  analogue) for piecewise-constant sources and for a Dirac pulse at ``t = 0``.
* Dense generalized eigendecomposition of the interior pencil ``(A, M)``,
  which diagonalizes the semidiscrete system so that each mode can be solved
  by the scalar formulas above, or stepped with the scalar L1 scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fem2d import FemSpace
from .frac_time import TemporalGrid, build_l1_weights

MAX_ABS_Z = 1.0e4
SERIES_RADIUS = 1.0

# Trapezoidal rule on the parabola s(u) = mu*(1 + i u)^2 (Weideman-Trefethen).
# Larger N raises mu and with it the exp(mu) roundoff amplification; N = 20
# keeps the absolute error near 1e-14 for 0.1 <= alpha < 1.
_CONTOUR_N = 20
_CONTOUR_H = 3.0 / _CONTOUR_N
_CONTOUR_MU = math.pi * _CONTOUR_N / 12.0


def _ml_series(alpha: float, beta: float, z: float) -> float:
    terms = []
    zk = 1.0
    for k in range(2000):
        term = zk / math.gamma(alpha * k + beta)
        terms.append(term)
        if abs(term) < 1e-18 and k > 2:
            break
        zk *= z
    return math.fsum(terms)


def _ml_contour(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    u = np.arange(-_CONTOUR_N, _CONTOUR_N + 1) * _CONTOUR_H
    s = _CONTOUR_MU * (1.0 + 1j * u) ** 2
    ds = 2j * _CONTOUR_MU * (1.0 + 1j * u)
    weights = np.exp(s) * s ** (alpha - beta) * ds * _CONTOUR_H / (2j * math.pi)
    sa = s**alpha
    vals = (weights[None, :] / (sa[None, :] - z[:, None])).sum(axis=1)
    return vals.real


def mittag_leffler(alpha: float, beta: float, z):
    """``E_{alpha,beta}(z) = sum_k z**k / Gamma(alpha*k + beta)`` for real
    ``z`` in ``[-MAX_ABS_Z, 0]``.

    Power series (compensated summation) for ``|z| <= 1``; otherwise the
    Hankel-contour integral of ``s**(alpha-beta) / (s**alpha - z)`` with a
    trapezoidal rule on a parabola.  ``alpha = 1`` uses closed forms and so
    needs ``beta`` in ``{1, 2}``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    zz = np.asarray(z, dtype=float)
    if np.any(zz > 0.0) or np.any(zz < -MAX_ABS_Z) or not np.all(np.isfinite(zz)):
        raise ValueError(f"z must lie in [-{MAX_ABS_Z:g}, 0]")
    flat = zz.ravel()
    out = np.empty_like(flat)
    if alpha == 1.0:
        if beta == 1.0:
            out[:] = np.exp(flat)
        elif beta == 2.0:
            small = flat == 0.0
            out[:] = np.expm1(flat) / np.where(small, 1.0, flat)
            out[small] = 1.0
        else:
            raise ValueError(f"alpha = 1 supports beta in {{1, 2}}, got {beta!r}")
    else:
        near = np.abs(flat) <= SERIES_RADIUS
        for i in np.flatnonzero(near):
            out[i] = _ml_series(alpha, beta, float(flat[i]))
        if np.any(~near):
            out[~near] = _ml_contour(alpha, beta, flat[~near])
    return out.reshape(zz.shape) if zz.ndim else float(out[0])


def _primitive(alpha: float, lam, s):
    """``int_0^s r**(alpha-1) E_{alpha,alpha}(-lam r**alpha) dr
    = s**alpha E_{alpha,alpha+1}(-lam s**alpha)``, zero for ``s <= 0``."""
    lam = np.asarray(lam, dtype=float)
    s = np.asarray(s, dtype=float)
    lam_b, s_b = np.broadcast_arrays(lam, s)
    out = np.zeros(lam_b.shape)
    pos = s_b > 0
    if np.any(pos):
        sa = s_b[pos] ** alpha
        out[pos] = sa * mittag_leffler(alpha, alpha + 1.0, -lam_b[pos] * sa)
    return out


def scalar_mild_solution(alpha: float, lam, g, grid: TemporalGrid, t: float):
    """Exact ``y(t)`` for ``D^alpha y + lam*y = g``, ``y(0) = 0``, with ``g``
    constant on each slice of ``grid``.  ``lam`` may be an array; then ``g``
    has shape ``(J,) + lam.shape``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if np.any(np.asarray(lam) < 0):
        raise ValueError("lam must be nonnegative")
    g = np.asarray(g, dtype=float)
    if g.shape[0] != grid.J:
        raise ValueError(f"expected {grid.J} slice values, got {g.shape[0]}")
    times = grid.times
    total = np.zeros(np.broadcast_shapes(np.shape(lam), g.shape[1:]))
    for j in range(grid.J):
        a, b = times[j], times[j + 1]
        if a >= t:
            break
        if not np.any(g[j]):
            continue
        total = total + g[j] * (_primitive(alpha, lam, t - a) - _primitive(alpha, lam, t - b))
    return float(total) if np.ndim(total) == 0 else total


def scalar_dirac_solution(alpha: float, lam, v, t: float):
    """``v * t**(alpha-1) * E_{alpha,alpha}(-lam t**alpha)``: the response to a
    Dirac pulse ``v*delta_0``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    ta = t**alpha
    val = np.asarray(v, dtype=float) * t ** (alpha - 1.0) * mittag_leffler(alpha, alpha, -np.asarray(lam, dtype=float) * ta)
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of ``A v = lam M v`` on the interior nodes, ascending,
    with ``V.T @ M @ V = I``."""

    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)
    interior: np.ndarray | None = field(default=None, repr=False)
    n: int | None = None

    def to_modes(self, loads: np.ndarray) -> np.ndarray:
        """Modal amplitudes ``V.T @ f`` of load vectors (last axis)."""
        f = np.asarray(loads, dtype=float)
        if self.interior is not None and f.shape[-1] == self.n:
            f = f[..., self.interior]
        return f @ self.vectors

    def from_modes(self, amplitudes: np.ndarray) -> np.ndarray:
        """Coefficient vectors ``V @ c``, embedded with zero boundary values
        when the basis came from a :class:`FemSpace`."""
        inner = np.asarray(amplitudes) @ self.vectors.T
        if self.interior is None:
            return inner
        out = np.zeros(inner.shape[:-1] + (self.n,))
        out[..., self.interior] = inner
        return out


def dense_generalized_eig(A_interior, M_interior, max_dim: int = 200) -> EigenBasis:
    A = A_interior.toarray() if hasattr(A_interior, "toarray") else np.asarray(A_interior, dtype=float)
    M = M_interior.toarray() if hasattr(M_interior, "toarray") else np.asarray(M_interior, dtype=float)
    if A.shape != M.shape or A.shape[0] != A.shape[1]:
        raise ValueError(f"pencil shapes differ or are not square: {A.shape}, {M.shape}")
    if A.shape[0] > max_dim:
        raise ValueError(f"dense eigen-oracle limited to dimension {max_dim}, got {A.shape[0]}")
    try:
        lam, V = scipy.linalg.eigh(A, M)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"dense generalized eigensolve failed: {exc}") from exc
    return EigenBasis(np.clip(lam, 0.0, None), V)


def space_eigenbasis(space: FemSpace) -> EigenBasis:
    """Eigenbasis of the homogeneous-Dirichlet pencil of a small mesh."""
    I = space.interior
    A = space.stiffness.matrix[I][:, I]
    M = space.mass.matrix[I][:, I]
    basis = dense_generalized_eig(A, M)
    return EigenBasis(basis.eigenvalues, basis.vectors, I, space.n)


def matrix_mild_oracle(basis: EigenBasis, alpha: float, loads, grid: TemporalGrid, t: float) -> np.ndarray:
    """Continuous-in-time solution of the semidiscrete system at time ``t``.

    ``loads`` is a ``(J, n)`` array of slice loads, or an initial
    ``DiracApprox`` whose payload is treated as a true Dirac pulse at ``t=0``.
    """
    from .evolution import DiracApprox

    lam = basis.eigenvalues
    if isinstance(loads, DiracApprox):
        if loads.kind != "initial":
            raise ValueError("only initial pulses are supported")
        c = basis.to_modes(loads.payload)
        amp = scalar_dirac_solution(alpha, lam, c, t)
    else:
        c = basis.to_modes(getattr(loads, "values", loads))
        amp = scalar_mild_solution(alpha, lam, c, grid, t)
    return basis.from_modes(amp)


def scalar_l1_solve(alpha: float, lam, g, grid: TemporalGrid) -> np.ndarray:
    """Scalar L1 / backward-Euler stepping of ``D^alpha w + lam*w = g`` with
    slice averages ``g``; ``lam`` may be an array of decoupled modes."""
    g = np.asarray(g, dtype=float)
    lam = np.asarray(lam, dtype=float)
    J, tau = grid.J, grid.tau
    if alpha == 1.0:
        lead, d = 1.0, np.zeros(J)
        if J > 1:
            d[1] = -1.0
    else:
        wts = build_l1_weights(alpha, J)
        lead, d = wts.b1, np.asarray(wts.d)
    scale = tau**alpha
    w = np.zeros(np.broadcast_shapes(g.shape, (J,) + lam.shape))
    for k in range(J):
        hist = d[k:0:-1] @ w[:k].reshape(k, -1) if k else 0.0
        hist = np.reshape(hist, w.shape[1:]) if k else 0.0
        w[k] = (scale * g[k] - hist) / (lead + scale * lam)
    return w


def modal_l1_solve(basis: EigenBasis, alpha: float, loads, grid: TemporalGrid) -> np.ndarray:
    """The fully discrete trajectory computed mode by mode."""
    from .evolution import DiracApprox

    if isinstance(loads, DiracApprox):
        loads = loads.loads(grid)
    c = basis.to_modes(getattr(loads, "values", loads))
    return basis.from_modes(scalar_l1_solve(alpha, basis.eigenvalues, c, grid))
