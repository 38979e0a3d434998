"""Local heat kernels of Laplace-type operators: transport coefficients, resummations and path integrals."""

__version__ = "0.1.0"

from .errors import (ArityError, ConfigError, CostBudgetExceeded, HeatLabError, InvalidProblem,
                     LeftChart, NegativeDeterminant, NoConvergence, OddDimension, OutOfChart,
                     ParseError, QuadratureError, SingularMetric, SupremumViolated,
                     TruncationWarning)
from .geometry import (Geodesic, LaplaceProblem, Tolerances, christoffel, geodesic_bvp,
                       geodesic_ivp, metric_pack, wilson_line)
from .presets import PRESETS, make_preset
from .synge import SyngeData, synge_data, van_vleck, world_function
from .sdw import SdwTable, a0, apply_A, heat_kernel_expansion, recurrence_residual, sdw_coefficients, sdw_diagonal
from .psi import PsiValue, kernel_from_psi, kernel_split, psi, shift_check
from .feynman_kac import FlatProblem, MCEstimate, kernel_mc, scaling_check
from .expr import FieldExpression, parse_field
from .verification import CheckReport, run_suite
