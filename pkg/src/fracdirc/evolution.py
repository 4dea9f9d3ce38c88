"""Fully discrete solution operators of the fractional/normal evolution
equation ``D^alpha y - Laplace y = g``.

Time: the L1 scheme (``0 < alpha < 1``) or backward Euler / dG(0)
(``alpha = 1``) on a uniform grid.  Space: P1 elements.  Every slice system
``lead*M + tau**alpha*A`` is solved by Jacobi-CG after eliminating the
boundary nodes.

Sources are always *load vectors*: ``loads[k]`` is the mass-integrated
average of the right-hand side over slice ``k``.  Trajectory slice ``k``
holds the constant value on ``(t_k, t_{k+1})`` (zero-based), i.e. the value
at ``t_{k+1}-``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fem2d import FemSpace
from .frac_time import TemporalGrid, build_l1_weights
from .sparse_solve import NonConvergenceError, cg_solve

log = logging.getLogger(__name__)

CG_TOL = 1e-12


@dataclass(frozen=True)
class Trajectory:
    grid: TemporalGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.J:
            raise ValueError(f"expected ({self.grid.J}, n) slice values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def final(self) -> np.ndarray:
        """Value at ``T-`` (the last slice)."""
        return self.values[-1]

    def __len__(self):
        return self.grid.J


@dataclass(frozen=True)
class DiracApprox:
    """Piecewise-constant stand-in for a Dirac pulse at ``t = 0`` or ``t = T``.

    ``payload`` is a load vector.  The pulse lives on the first (``initial``)
    or last (``terminal``) slice with height ``1/tau``.
    """

    kind: str
    payload: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("initial", "terminal"):
            raise ValueError(f"kind must be 'initial' or 'terminal', got {self.kind!r}")

    def loads(self, grid: TemporalGrid) -> np.ndarray:
        out = np.zeros((grid.J, np.size(self.payload)))
        out[0 if self.kind == "initial" else -1] = np.asarray(self.payload, dtype=float) / grid.tau
        return out


@dataclass(frozen=True)
class TimeStencil:
    """Scaled scheme ``lead*W_k + sum_{m>=1} hist[m]*W_{k-m} ~ tau**alpha * D^alpha W``.

    For ``alpha < 1`` this is the L1 scheme (``lead = b_1``, ``hist = d``);
    for ``alpha = 1`` it is backward Euler (``lead = 1``, ``hist[1] = -1``).
    """

    alpha: float
    grid: TemporalGrid
    lead: float
    hist: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, alpha: float, grid: TemporalGrid) -> "TimeStencil":
        if alpha == 1.0:
            hist = np.zeros(grid.J)
            if grid.J > 1:
                hist[1] = -1.0
            return cls(1.0, grid, 1.0, hist)
        w = build_l1_weights(alpha, grid.J)
        return cls(float(alpha), grid, w.b1, np.asarray(w.d))

    @property
    def scale(self) -> float:
        return self.grid.tau**self.alpha

    @property
    def banded(self) -> bool:
        return self.alpha == 1.0

    def history(self, values: np.ndarray, k: int, side: str = "left") -> np.ndarray:
        """``sum_m hist[m] * values[k -/+ m]`` (zero-based slice ``k``)."""
        J = self.grid.J
        if side == "left":
            if k == 0:
                return np.zeros(values.shape[1:])
            if self.banded:
                return -values[k - 1]
            return self.hist[k:0:-1] @ values[:k]
        if k == J - 1:
            return np.zeros(values.shape[1:])
        if self.banded:
            return -values[k + 1]
        return self.hist[1 : J - k] @ values[k + 1 :]

    def matrix(self) -> np.ndarray:
        """Dense lower-triangular Toeplitz matrix of the scaled stencil."""
        col = np.array(self.hist, dtype=float)
        col[0] = self.lead
        return scipy.linalg.toeplitz(col, np.zeros(self.grid.J))


class SliceSolver:
    """Solver for ``(lead*M + scale*A) w = rhs`` with prescribed boundary values."""

    def __init__(self, space: FemSpace, lead: float, scale: float, tol: float = CG_TOL):
        self.space = space
        self.tol = tol
        S = (lead * space.mass.matrix + scale * space.stiffness.matrix).tocsr()
        I, B = space.interior, space.boundary
        self.S_II = S[I][:, I].tocsr()
        self.S_IB = S[I][:, B].tocsr()
        self.iterations = 0

    def solve(self, rhs: np.ndarray, boundary_values=None, guess=None) -> np.ndarray:
        sp_ = self.space
        w = np.zeros(sp_.n)
        r = rhs[sp_.interior]
        if boundary_values is not None:
            w[sp_.boundary] = boundary_values
            r = r - self.S_IB @ boundary_values
        x0 = None if guess is None else guess[sp_.interior]
        x, rep = cg_solve(self.S_II, r, tol=self.tol, max_iter=20 * sp_.n, x0=x0)
        if not rep.converged:
            raise NonConvergenceError(f"slice CG stalled: {rep}")
        self.iterations += rep.iterations
        w[sp_.interior] = x
        return w


def _check_alpha(alpha: float) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    return float(alpha)


def _source_loads(source, grid: TemporalGrid, n: int, kind: str) -> np.ndarray | None:
    if source is None:
        return None
    if isinstance(source, DiracApprox):
        if source.kind != kind:
            raise ValueError(f"expected a {kind} Dirac approximation, got {source.kind}")
        loads = source.loads(grid)
    elif isinstance(source, Trajectory):
        loads = source.values
    else:
        loads = np.asarray(source, dtype=float)
    if loads.shape != (grid.J, n):
        raise ValueError(f"loads must have shape {(grid.J, n)}, got {loads.shape}")
    return loads


class _History:
    """Running sums ``sum_{m=1}^{k} hist[m] * values[k - m]`` for a march that
    fills ``values`` in increasing slice order.

    Contributions from slices before the current block of ``block`` steps are
    formed at once by a dense Toeplitz-block product; the rest is added slice by
    slice.  The summation order is fixed, so results are reproducible.
    """

    def __init__(self, stencil: TimeStencil, values: np.ndarray, block: int = 64):
        self.st = stencil
        self.values = values
        self.block = block
        self._far = None
        self._start = 0

    def __call__(self, k: int) -> np.ndarray:
        st, W = self.st, self.values
        if k == 0:
            return np.zeros(W.shape[1])
        if st.banded:
            return -W[k - 1]
        if k % self.block == 0 or self._far is None:
            self._start = k
            stop = min(k + self.block, st.grid.J)
            # far[i] = sum_{j<k} hist[k+i-j] W[j]
            idx = np.arange(k, stop)[:, None] - np.arange(k)[None, :]
            self._far = st.hist[idx] @ W[:k]
        near = st.hist[k - self._start : 0 : -1] @ W[self._start : k] if k > self._start else 0.0
        return self._far[k - self._start] + near


def _march(stencil: TimeStencil, space: FemSpace, loads, bvals, tol: float) -> np.ndarray:
    J = stencil.grid.J
    values = np.zeros((J, space.n))
    solver = SliceSolver(space, stencil.lead, stencil.scale, tol)
    history = _History(stencil, values)
    M = space.mass.matrix
    for k in range(J):
        rhs = -(M @ history(k))
        if loads is not None:
            rhs += stencil.scale * loads[k]
        guess = values[k - 1] if k else None
        values[k] = solver.solve(rhs, None if bvals is None else bvals[k], guess)
    log.debug("march alpha=%g J=%d: %d CG iterations", stencil.alpha, J, solver.iterations)
    return values


def forward_solve(alpha, grid: TemporalGrid, space: FemSpace, source=None, dirichlet=None, tol: float = CG_TOL) -> Trajectory:
    """March the forward scheme from ``W_0 = 0``.

    ``source`` is ``None``, a ``(J, n)`` array / :class:`Trajectory` of slice
    loads, or an initial :class:`DiracApprox`.  ``dirichlet`` is ``None``
    (homogeneous) or a ``(J, n_boundary)`` array of boundary coefficients, one
    row per slice (a :class:`BoundaryControl` is accepted too).
    """
    alpha = _check_alpha(alpha)
    n = space.n
    loads = _source_loads(source, grid, n, "initial")
    bvals = None
    if dirichlet is not None:
        bvals = np.asarray(getattr(dirichlet, "slices", dirichlet), dtype=float)
        if bvals.shape != (grid.J, space.boundary.size):
            raise ValueError(f"dirichlet data must have shape {(grid.J, space.boundary.size)}, got {bvals.shape}")
    if loads is None and bvals is None:
        return Trajectory(grid, np.zeros((grid.J, n)))
    return Trajectory(grid, _march(TimeStencil.build(alpha, grid), space, loads, bvals, tol))


def adjoint_solve(alpha, grid: TemporalGrid, space: FemSpace, terminal, tol: float = CG_TOL) -> Trajectory:
    """Backward (right-sided) scheme with homogeneous Dirichlet conditions,
    marched from ``t = T`` down to ``t = 0``.  ``terminal`` is a terminal
    :class:`DiracApprox` or a ``(J, n)`` array of slice loads.

    The right-sided stencil has the same Toeplitz weights as the left one, so
    the march runs on time-reversed storage.
    """
    alpha = _check_alpha(alpha)
    n = space.n
    loads = _source_loads(terminal, grid, n, "terminal")
    if loads is None or not np.any(loads):
        return Trajectory(grid, np.zeros((grid.J, n)))
    rev = _march(TimeStencil.build(alpha, grid), space, loads[::-1], None, tol)
    return Trajectory(grid, rev[::-1].copy())


def time_residual(alpha, traj: Trajectory, space: FemSpace, side: str = "left") -> np.ndarray:
    """Discrete fractional time derivative of a trajectory as load vectors:
    ``tau**-alpha * M (lead*W_k + history_k)``; ``side="right"`` gives the
    backward (adjoint) stencil."""
    alpha = _check_alpha(alpha)
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    st = TimeStencil.build(alpha, traj.grid)
    W = traj.values
    if st.banded:
        shifted = np.zeros_like(W)
        if side == "left":
            shifted[1:] = W[:-1]
        else:
            shifted[:-1] = W[1:]
        raw = W - shifted
    else:
        C = st.matrix()
        raw = C @ W if side == "left" else C.T @ W
    return (space.mass.matrix @ raw.T).T / st.scale


def _slice_values(x) -> tuple[TemporalGrid | None, np.ndarray]:
    if isinstance(x, Trajectory):
        return x.grid, x.values
    if hasattr(x, "slices") and hasattr(x, "grid"):
        return x.grid, np.asarray(x.slices)
    return None, np.asarray(x, dtype=float)


def duality_pairing(f, forward_of_f, g, adjoint_of_g) -> tuple[float, float]:
    """The two sides ``int (S f, g) dt`` and ``int <f, S* g> dt``.

    ``f`` and ``g`` are slice loads; both integrals reduce to
    ``tau * sum_k`` of Euclidean products of coefficient and load vectors.
    """
    grid, W = _slice_values(forward_of_f)
    _, P = _slice_values(adjoint_of_g)
    _, F = _slice_values(f)
    _, G = _slice_values(g)
    if not (W.shape == P.shape == F.shape == G.shape):
        raise ValueError(f"shape mismatch: {W.shape}, {P.shape}, {F.shape}, {G.shape}")
    tau = grid.tau if grid is not None else 1.0
    return tau * float(np.sum(W * G)), tau * float(np.sum(F * P))


def _common_refinement(ja: int, jb: int) -> int:
    hi, lo = max(ja, jb), min(ja, jb)
    if hi % lo:
        raise ValueError(f"incompatible grids: {ja} and {jb} intervals")
    return hi


def trajectory_norm(a, b, norm: str, space: FemSpace, T: float | None = None) -> float:
    """Distance between two trajectories, the coarser one extended as a
    piecewise constant onto the finer grid.

    ``Linf_L2``: ``max_k ||a_k - b_k||_{L2}``; ``L1_H01``: ``sum_k tau ||grad(a_k - b_k)||``;
    ``L2_boundary``: ``sqrt(sum_k tau ||a_k - b_k||^2_{L2(boundary)})`` on boundary
    coefficients (full-space trajectories are restricted to the boundary).
    """
    ga, va = _slice_values(a)
    gb, vb = _slice_values(b)
    grid_T = (ga or gb).T if (ga or gb) is not None else T
    if grid_T is None:
        raise ValueError("final time unknown; pass T or Trajectory objects")
    if ga is not None and gb is not None and not np.isclose(ga.T, gb.T):
        raise ValueError(f"final times differ: {ga.T} vs {gb.T}")
    J = _common_refinement(va.shape[0], vb.shape[0])
    if va.shape[0] > vb.shape[0]:
        va, vb = vb, va
    if va.shape[1] != vb.shape[1]:
        raise ValueError(f"widths differ: {va.shape[1]} vs {vb.shape[1]}")
    tau = grid_T / J
    if norm == "Linf_L2":
        op = space.mass.matrix
    elif norm == "L1_H01":
        op = space.stiffness.matrix
    elif norm == "L2_boundary":
        op = space.trace.mass.matrix
        if va.shape[1] == space.n:
            va, vb = va[:, space.boundary], vb[:, space.boundary]
        elif va.shape[1] != space.boundary.size:
            raise ValueError(f"cannot read boundary values from width {va.shape[1]}")
    else:
        raise ValueError(f"unknown norm {norm!r}")
    # Coarse slice k covers `ratio` fine slices; go block by block so the
    # coarse trajectory is never replicated in memory.
    ratio = J // va.shape[0]
    fine = vb.reshape(va.shape[0], ratio, -1)
    sq = np.empty(J)
    step = max(1, 4096 // ratio)
    for k0 in range(0, va.shape[0], step):
        diff = (fine[k0 : k0 + step] - va[k0 : k0 + step, None, :]).reshape(-1, va.shape[1])
        sq[k0 * ratio : k0 * ratio + diff.shape[0]] = np.einsum("kn,kn->k", diff, (op @ diff.T).T)
    sq = np.clip(sq, 0.0, None)
    if norm == "Linf_L2":
        return float(np.sqrt(np.max(sq)))
    if norm == "L1_H01":
        return float(tau * np.sum(np.sqrt(sq)))
    return float(np.sqrt(tau * np.sum(sq)))
