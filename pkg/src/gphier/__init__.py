"""Spectral simulation of truncated cubic and quintic GP hierarchies on a torus."""
__version__ = "0.1.0"

from .collision import CollisionSpec, b_full, collide, q_full
from .errors import (
    BlowUpError,
    BudgetError,
    ConfigError,
    GPHierError,
    NumericalError,
    RankCapError,
    ShapeMismatchError,
    SnapshotFormatError,
)
from .grid import GridSpec, make_grid, sobolev_weight
from .hierarchy import Hierarchy, QuasiNormResult, quasi_norm
from .kernel import DenseKernel, ModelSpec, free_propagate, h_alpha_norm
from .kernels import BACKEND
from .lowrank import SeparableKernel, to_dense
from .nls import WaveTrajectory, factorized_hierarchy, split_step
from .picard import ClosureSpec, picard_iterate, picard_solve, verify_solution
from .trajectory import TimeGrid, TrajectorySet

__all__ = [
    "BACKEND",
    "BlowUpError",
    "BudgetError",
    "ClosureSpec",
    "CollisionSpec",
    "ConfigError",
    "DenseKernel",
    "GPHierError",
    "GridSpec",
    "Hierarchy",
    "ModelSpec",
    "NumericalError",
    "QuasiNormResult",
    "RankCapError",
    "SeparableKernel",
    "ShapeMismatchError",
    "SnapshotFormatError",
    "TimeGrid",
    "TrajectorySet",
    "WaveTrajectory",
    "b_full",
    "collide",
    "factorized_hierarchy",
    "free_propagate",
    "h_alpha_norm",
    "make_grid",
    "picard_iterate",
    "picard_solve",
    "q_full",
    "quasi_norm",
    "sobolev_weight",
    "split_step",
    "to_dense",
    "verify_solution",
]
