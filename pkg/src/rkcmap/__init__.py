"""Regularized p-harmonic maps between conformal surfaces on a disc chart,
with homotopy continuation and Jacobian certification."""

from .energy import EnergyParams
from .errors import (
    ChartExitError,
    ContinuationError,
    EvaluationError,
    NoConvergenceError,
    RKCError,
    SolverError,
    ValidationError,
)
from .geometry import ConformalMetric, flat_metric, hyperbolic_metric, make_metric, sphere_metric
from .grid import DomainGrid, MapField, build_disc_grid

__version__ = "0.1.0"
