"""Fractional Schrödinger operators with multipolar Hardy potentials.

Spectral constants, a rule-based existence classifier, single-pole model
profiles, interaction-integral asymptotics and a one-dimensional variational
estimator.
"""

from .errors import ConvergenceError, DivergenceError, DomainError, FitError, MultipolarError, ValidationError
from .special import ProblemParams, alpha_of_lambda, hardy_constant, kappa, lambda_of_alpha

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DivergenceError",
    "DomainError",
    "FitError",
    "MultipolarError",
    "ValidationError",
    "ProblemParams",
    "alpha_of_lambda",
    "hardy_constant",
    "kappa",
    "lambda_of_alpha",
]
