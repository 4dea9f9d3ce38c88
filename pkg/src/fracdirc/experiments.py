"""Self-convergence studies in time for the three model problems.

Every run uses ``T = 0.1`` and ``tau = T / 2**M``.  Errors are measured
against the same method on the finer grid ``M_ref``; observed orders are

    order = log(e_prev / e_cur) / ((M_cur - M_prev) * log 2),

i.e. the rate in ``tau`` regardless of how far apart the tabulated ``M`` are.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import DiracApprox, forward_solve, trajectory_norm
from .fem2d import EdgePowerProfile, FemSpace, boundary_l2_project, singular_load_vector
from .frac_time import TemporalGrid
from .optimizer import ControlProblemConfig, OptimalityResult, solve_optimality

log = logging.getLogger(__name__)

T_FINAL = 0.1

DEFAULTS = {
    1: dict(alphas=(0.5, 1.0), L=6, Ms=(4, 6, 8, 10), M_ref=13),
    2: dict(alphas=(0.5, 1.0), L=6, Ms=(4, 5, 6, 7), M_ref=13),
    3: dict(alphas=(1.0,), L=5, Ms=(4, 5, 6, 7), M_ref=10),
}

NORMS = {1: "Linf_L2", 2: "L1_H01", 3: "L2_boundary"}


@dataclass(frozen=True)
class ConvergenceRecord:
    experiment: int
    alpha: float
    M: int
    error: float
    order: float | None = None

    def __post_init__(self):
        if not self.error > 0 or not math.isfinite(self.error):
            raise ValueError(f"error must be positive and finite, got {self.error}")


@dataclass(frozen=True)
class OptimizerSettings:
    nu: float = 10.0
    u_lower: float = 0.0
    u_upper: float = 20.0
    y_d: float = 1.0
    fp_tol: float = 1e-10
    max_iters: int = 500
    relaxation: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: int
    alphas: tuple = (0.5, 1.0)
    L: int = 6
    Ms: tuple = (4, 6, 8, 10)
    M_ref: int = 13
    T: float = T_FINAL
    out: str | None = None
    fmt: str = "csv"
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        if self.experiment not in (1, 2, 3):
            raise ValueError(f"experiment must be 1, 2 or 3, got {self.experiment}")
        if not self.alphas or any(not 0.0 < a <= 1.0 for a in self.alphas):
            raise ValueError(f"alphas must lie in (0, 1], got {self.alphas}")
        if not self.Ms or any(m < 1 for m in self.Ms):
            raise ValueError(f"M values must be positive, got {self.Ms}")
        if list(self.Ms) != sorted(set(self.Ms)):
            raise ValueError(f"M values must be strictly increasing, got {self.Ms}")
        if self.M_ref <= max(self.Ms):
            raise ValueError(f"M_ref={self.M_ref} must exceed every tabulated M (max {max(self.Ms)})")
        if not 2 <= self.L <= 10:
            raise ValueError(f"level L must lie in [2, 10], got {self.L}")
        if self.fmt not in ("csv", "md"):
            raise ValueError(f"format must be csv or md, got {self.fmt!r}")

    @classmethod
    def default(cls, experiment: int, **overrides) -> "ExperimentConfig":
        base = dict(DEFAULTS.get(experiment, {}))
        base.update(overrides)
        return cls(experiment=experiment, **base)


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    records: list
    optimality: dict = field(default_factory=dict, repr=False)  # (alpha, M) -> OptimalityResult

    def for_alpha(self, alpha: float) -> list:
        return [r for r in self.records if r.alpha == alpha]


def observed_order(e_prev: float, e_cur: float, M_prev: int, M_cur: int) -> float:
    if M_cur == M_prev:
        raise ValueError("orders need distinct M values")
    return math.log(e_prev / e_cur) / ((M_cur - M_prev) * math.log(2.0))


def tabulate(experiment: int, alpha: float, Ms, errors) -> list:
    rows = []
    for i, (M, e) in enumerate(zip(Ms, errors)):
        order = observed_order(errors[i - 1], e, Ms[i - 1], M) if i else None
        rows.append(ConvergenceRecord(experiment, alpha, int(M), float(e), order))
    return rows


def jump_source_averages(grid: TemporalGrid) -> np.ndarray:
    """Exact slice averages of ``g = 1`` on ``(0, 2T/3)``, ``3`` on ``(2T/3, T)``."""
    t = grid.times
    jump = 2.0 * grid.T / 3.0
    late = np.clip(t[1:], jump, None) - np.clip(t[:-1], jump, None)
    return 1.0 + 2.0 * late / grid.tau


def _study(cfg: ExperimentConfig, space: FemSpace, solve) -> list:
    norm = NORMS[cfg.experiment]
    records = []
    for alpha in cfg.alphas:
        ref = solve(alpha, TemporalGrid(2**cfg.M_ref, cfg.T))
        errors = []
        for M in cfg.Ms:
            approx = solve(alpha, TemporalGrid(2**M, cfg.T))
            errors.append(trajectory_norm(approx, ref, norm, space, T=cfg.T))
            log.info("experiment %d alpha=%g M=%d error=%.3e", cfg.experiment, alpha, M, errors[-1])
        del ref
        records += tabulate(cfg.experiment, alpha, list(cfg.Ms), errors)
    return records


def run_experiment_1(cfg: ExperimentConfig, space: FemSpace | None = None) -> ExperimentOutcome:
    """Dirichlet data ``g(t) * y**(-1/2)`` on the edge ``x = 0``, no source,
    errors in ``L_inf(0,T; L2)``."""
    space = space or FemSpace.build(cfg.L)
    profile = boundary_l2_project(EdgePowerProfile("x=0", -0.5), space.trace)

    def solve(alpha, grid):
        data = jump_source_averages(grid)[:, None] * profile[None, :]
        return forward_solve(alpha, grid, space, dirichlet=data)

    return ExperimentOutcome(cfg, _study(cfg, space, solve))


def run_experiment_2(cfg: ExperimentConfig, space: FemSpace | None = None) -> ExperimentOutcome:
    """Dirac pulse ``x**(-1/2) delta_0`` as source, homogeneous boundary
    data, errors in ``L1(0,T; H1_0)``."""
    space = space or FemSpace.build(cfg.L)
    pulse = DiracApprox("initial", singular_load_vector(space.mesh, -0.5))

    def solve(alpha, grid):
        return forward_solve(alpha, grid, space, source=pulse)

    return ExperimentOutcome(cfg, _study(cfg, space, solve))


def control_config(cfg: ExperimentConfig, alpha: float, M: int) -> ControlProblemConfig:
    o = cfg.optimizer
    return ControlProblemConfig(
        alpha=alpha, nu=o.nu, u_lower=o.u_lower, u_upper=o.u_upper, y_d=o.y_d,
        T=cfg.T, J=2**M, L=cfg.L, fp_tol=o.fp_tol, max_iters=o.max_iters, relaxation=o.relaxation,
    )


def run_experiment_3(cfg: ExperimentConfig, space: FemSpace | None = None) -> ExperimentOutcome:
    """Optimal boundary control, errors of the control in ``L2(0,T; L2(boundary))``."""
    space = space or FemSpace.build(cfg.L)
    results: dict[tuple, OptimalityResult] = {}
    records = []
    for alpha in cfg.alphas:
        for M in (*cfg.Ms, cfg.M_ref):
            res = solve_optimality(control_config(cfg, alpha, M), space)
            log.info("experiment 3 alpha=%g M=%d iterations=%d objective=%.6g", alpha, M, res.iterations, res.objective)
            results[(alpha, M)] = res
        ref = results[(alpha, cfg.M_ref)].U.slices
        errors = [trajectory_norm(results[(alpha, M)].U.slices, ref, "L2_boundary", space, T=cfg.T) for M in cfg.Ms]
        records += tabulate(3, alpha, list(cfg.Ms), errors)
    return ExperimentOutcome(cfg, records, results)


RUNNERS = {1: run_experiment_1, 2: run_experiment_2, 3: run_experiment_3}


def run_experiment(cfg: ExperimentConfig, space: FemSpace | None = None) -> ExperimentOutcome:
    return RUNNERS[cfg.experiment](cfg, space)
