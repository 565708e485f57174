"""Grid estimators for the one-dimensional multipolar problem."""

from .forms import (
    DiscreteProblem,
    QuadraticFormReport,
    critical_norm,
    hardy_term,
    l2_sq,
    q_form,
    seminorm_sq,
    stiffness_column,
)
from .grid import Grid1D, GridFunction
from .trials import ContinuumEvaluation, LogSineWindow, bubble, mollified_power
from .solvers import (
    Certificate,
    MinimizationResult,
    estimate_mu,
    estimate_S,
    interaction_upper_bound,
    negativity_certificate,
    ps_level,
    ps_threshold,
)

__all__ = [
    "Certificate",
    "DiscreteProblem",
    "Grid1D",
    "GridFunction",
    "MinimizationResult",
    "QuadraticFormReport",
    "bubble",
    "critical_norm",
    "estimate_S",
    "estimate_mu",
    "hardy_term",
    "interaction_upper_bound",
    "l2_sq",
    "LogSineWindow",
    "ContinuumEvaluation",
    "mollified_power",
    "negativity_certificate",
    "ps_level",
    "ps_threshold",
    "q_form",
    "seminorm_sq",
    "stiffness_column",
]
