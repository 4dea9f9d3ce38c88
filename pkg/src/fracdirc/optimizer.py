"""Optimal Dirichlet boundary control with final-time observation.

Minimize ``1/2 ||Y(T-) - y_d||^2 + nu/2 ||U||^2_{L2(0,T; L2(boundary))}`` over
piecewise-constant-in-time boundary controls with ``u_lo <= U <= u_hi``.
The control is recovered from the discrete adjoint: at the optimum
``U = clamp(dn P / nu)``, where ``dn P`` is the discrete outward normal
derivative of the adjoint state.  The fixed point is found by (relaxed)
projected-gradient iteration with step ``1/nu``.

The control-space inner product uses the lumped (trapezoidal) boundary mass,
so the componentwise clamp is exactly the orthogonal projection onto the box
and the fixed point is exactly the minimizer of the discrete problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .evolution import DiracApprox, Trajectory, adjoint_solve, forward_solve, time_residual
from .fem2d import FemSpace, discrete_normal_derivative
from .frac_time import TemporalGrid
from .sparse_solve import NonConvergenceError

log = logging.getLogger(__name__)

STALL_RATIO = 0.99
MIN_RELAXATION = 1.0 / 64


@dataclass(frozen=True)
class BoundaryControl:
    grid: TemporalGrid
    slices: np.ndarray = field(repr=False)
    lower: float = 0.0
    upper: float = 20.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        s = np.asarray(self.slices, dtype=float)
        if s.ndim != 2 or s.shape[0] != self.grid.J:
            raise ValueError(f"expected ({self.grid.J}, n_boundary) coefficients, got {s.shape}")
        object.__setattr__(self, "slices", s)

    def is_feasible(self) -> bool:
        return bool(np.all(self.slices >= self.lower) and np.all(self.slices <= self.upper))

    @classmethod
    def constant(cls, grid, n_boundary, value, lower, upper) -> "BoundaryControl":
        return cls(grid, np.full((grid.J, n_boundary), float(value)), lower, upper)


@dataclass(frozen=True)
class ControlProblemConfig:
    alpha: float = 1.0
    nu: float = 10.0
    u_lower: float = 0.0
    u_upper: float = 20.0
    y_d: float | np.ndarray = 1.0
    T: float = 0.1
    J: int = 16
    L: int = 5
    fp_tol: float = 1e-10
    max_iters: int = 500
    relaxation: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.u_lower < self.u_upper:
            raise ValueError(f"need u_lower < u_upper, got [{self.u_lower}, {self.u_upper}]")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def grid(self) -> TemporalGrid:
        return TemporalGrid(self.J, self.T)

    def target(self, space: FemSpace) -> np.ndarray:
        y_d = np.asarray(self.y_d, dtype=float)
        return np.full(space.n, float(y_d)) if y_d.ndim == 0 else y_d


@dataclass
class OptimalityResult:
    U: BoundaryControl
    Y: Trajectory
    P: Trajectory
    objective: float
    residual: float
    iterations: int
    vi_min: float
    residual_history: list = field(default_factory=list, repr=False)
    comparators: dict = field(default_factory=dict)
    feasible_iterates: bool = True

    @property
    def comparator_gap(self) -> float:
        """``min_V J(V) - J(U)`` over the constant comparators; >= 0 when U wins."""
        return min(self.comparators.values()) - self.objective if self.comparators else np.inf


def project_box(v, lower: float, upper: float) -> np.ndarray:
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    return np.clip(np.asarray(v, dtype=float), lower, upper)


def control_inner(a: np.ndarray, b: np.ndarray, grid: TemporalGrid, space: FemSpace) -> float:
    """``int_0^T (a, b)_boundary dt`` with the lumped boundary mass."""
    return grid.tau * float(np.sum(a * b * space.trace.lumped[None, :]))


def control_norm(a: np.ndarray, grid: TemporalGrid, space: FemSpace) -> float:
    return float(np.sqrt(max(control_inner(a, a, grid, space), 0.0)))


def state(U: BoundaryControl, alpha: float, space: FemSpace) -> Trajectory:
    return forward_solve(alpha, U.grid, space, dirichlet=U.slices)


def evaluate_objective(U: BoundaryControl, Y: Trajectory, y_d, nu: float, space: FemSpace) -> float:
    y_d = np.broadcast_to(np.asarray(y_d, dtype=float), (space.n,))
    e = Y.final - y_d
    tracking = 0.5 * float(e @ (space.mass.matrix @ e))
    return tracking + 0.5 * nu * control_inner(U.slices, U.slices, U.grid, space)


def adjoint(Y: Trajectory, y_d, alpha: float, space: FemSpace) -> tuple[Trajectory, np.ndarray]:
    """Adjoint state for the final-time misfit and its slice loads."""
    y_d = np.broadcast_to(np.asarray(y_d, dtype=float), (space.n,))
    pulse = DiracApprox("terminal", space.mass.matrix @ (Y.final - y_d))
    return adjoint_solve(alpha, Y.grid, space, pulse), pulse.loads(Y.grid)


def adjoint_flux(P: Trajectory, loads: np.ndarray, alpha: float, space: FemSpace) -> np.ndarray:
    """Discrete outward normal derivative of the adjoint on every slice,
    including the right-sided fractional time residual."""
    resid = time_residual(alpha, P, space, side="right")
    return discrete_normal_derivative(P.values, resid, loads, space)


def gradient(U: BoundaryControl, alpha: float, y_d, nu: float, space: FemSpace):
    """Riesz representative of the objective's gradient, ``nu*U - dn P``,
    along with the state and adjoint it came from."""
    Y = state(U, alpha, space)
    P, loads = adjoint(Y, y_d, alpha, space)
    return nu * U.slices - adjoint_flux(P, loads, alpha, space), Y, P


def variational_inequality(grad: np.ndarray, U: BoundaryControl, V: np.ndarray, space: FemSpace) -> float:
    """``int_0^T (nu U - dn P, V - U)`` for one feasible comparator ``V``."""
    return control_inner(grad, V - U.slices, U.grid, space)


def _vi_samples(U: BoundaryControl, rng: np.random.Generator, count: int = 20):
    lo, hi = U.lower, U.upper
    shape = U.slices.shape
    yield np.full(shape, lo)
    yield np.full(shape, hi)
    yield np.full(shape, 0.5 * (lo + hi))
    for _ in range(count):
        yield rng.uniform(lo, hi, size=shape)


def comparator_objectives(config: ControlProblemConfig, space: FemSpace) -> dict:
    """Objective values of the constant feasible controls ``clamp(0)``,
    ``u_hi`` and the box midpoint."""
    grid = config.grid
    lo, hi = config.u_lower, config.u_upper
    y_d = config.target(space)
    out = {}
    for name, value in (("zero", float(project_box(0.0, lo, hi))), ("upper", hi), ("midpoint", 0.5 * (lo + hi))):
        V = BoundaryControl.constant(grid, space.boundary.size, value, lo, hi)
        out[name] = evaluate_objective(V, state(V, config.alpha, space), y_d, config.nu, space)
    return out


def solve_optimality(config: ControlProblemConfig, space: FemSpace, seed: int = 0) -> OptimalityResult:
    """Fixed-point iteration ``U <- (1-w) U + w clamp(dn P(U) / nu)``.

    Starts from the midpoint of the box.  Whenever the residual fails to
    drop by at least 1% after the second iteration, the relaxation is halved
    (down to 1/64); with the unrelaxed map the last slices tend to flip
    between two states instead of settling.  Raises
    :class:`NonConvergenceError` after ``max_iters`` iterations.
    """
    grid = config.grid
    alpha, nu = config.alpha, config.nu
    lo, hi = config.u_lower, config.u_upper
    y_d = config.target(space)
    nb = space.boundary.size
    U = BoundaryControl.constant(grid, nb, 0.5 * (lo + hi), lo, hi)
    omega = config.relaxation
    history = []
    residual = np.inf
    feasible = U.is_feasible()
    for it in range(1, config.max_iters + 1):
        Y = state(U, alpha, space)
        P, loads = adjoint(Y, y_d, alpha, space)
        flux = adjoint_flux(P, loads, alpha, space)
        target = project_box(flux / nu, lo, hi)
        residual = control_norm(target - U.slices, grid, space)
        history.append(residual)
        log.debug("fixed point it=%d residual=%.3e omega=%g", it, residual, omega)
        if residual <= config.fp_tol:
            break
        if it > 2 and residual > STALL_RATIO * history[-2] and omega > MIN_RELAXATION:
            omega *= 0.5
            log.info("fixed point stalled at it=%d; relaxation lowered to %g", it, omega)
        U = BoundaryControl(grid, (1.0 - omega) * U.slices + omega * target, lo, hi)
        feasible = feasible and U.is_feasible()
    else:
        raise NonConvergenceError(
            f"fixed point did not reach {config.fp_tol:g} in {config.max_iters} iterations "
            f"(last residual {residual:.3e})"
        )

    grad = nu * U.slices - flux
    rng = np.random.default_rng(seed)
    vi_min = min(variational_inequality(grad, U, V, space) for V in _vi_samples(U, rng))
    objective = evaluate_objective(U, Y, y_d, nu, space)
    return OptimalityResult(
        U, Y, P, objective, residual, it, vi_min, history,
        comparators=comparator_objectives(config, space), feasible_iterates=feasible,
    )
