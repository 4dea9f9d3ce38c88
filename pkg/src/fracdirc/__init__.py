"""Time-fractional diffusion on the unit square with rough Dirichlet data.

L1 (``0 < alpha < 1``) and backward-Euler (``alpha = 1``) time stepping with
P1 elements, the matching adjoint, a Dirichlet boundary-control solver and
self-convergence studies.
"""

from .evolution import DiracApprox, Trajectory, adjoint_solve, forward_solve, trajectory_norm
from .experiments import ExperimentConfig, run_experiment
from .fem2d import FemSpace, build_mesh
from .frac_time import TemporalGrid, build_l1_weights
from .optimizer import ControlProblemConfig, solve_optimality
from .oracle import mittag_leffler
from .sparse_solve import NonConvergenceError, cg_solve

__all__ = [
    "ControlProblemConfig", "DiracApprox", "ExperimentConfig", "FemSpace",
    "NonConvergenceError", "TemporalGrid", "Trajectory", "adjoint_solve",
    "build_l1_weights", "build_mesh", "cg_solve", "forward_solve", "mittag_leffler",
    "run_experiment", "solve_optimality", "trajectory_norm",
]
__version__ = "0.1.0"
