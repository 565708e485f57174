"""Closed-form spectral constants of the fractional Hardy problem.

All functions are pure. ``ProblemParams`` carries the dimension ``N`` and the
fractional order ``s``; everything else is derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Integral

import numpy as np

from .errors import ConvergenceError, DomainError, ValidationError

__all__ = [
    "mellin_symbol",
    "ProblemParams",
    "gamma",
    "lambda_of_alpha",
    "hardy_constant",
    "alpha_of_lambda",
    "kappa",
    "critical_exponent",
    "sphere_area",
    "fractional_laplacian_constant",
]

BISECTION_MAX_ITER = 200
INVERSION_RTOL = 1e-10


@dataclass(frozen=True)
class ProblemParams:
    """Space dimension ``N`` and fractional order ``s`` with ``N > 2s``."""

    N: int
    s: float

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, Integral) or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N!r}")
        s = float(self.s)
        if not (0.0 < s < 1.0):
            raise ValidationError(f"s must lie in (0, 1), got {self.s!r}")
        if not self.N > 2.0 * s:
            raise ValidationError(f"need N > 2s, got N={self.N}, s={s}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "s", s)

    @property
    def alpha_max(self) -> float:
        """Upper end (N - 2s)/2 of the decay-exponent range."""
        return (self.N - 2.0 * self.s) / 2.0

    @property
    def critical_exponent(self) -> float:
        return 2.0 * self.N / (self.N - 2.0 * self.s)

    @property
    def extension_exponent(self) -> float:
        """gamma = 1 + 2/(N - 2s), the Sobolev exponent of the extended problem."""
        return 1.0 + 2.0 / (self.N - 2.0 * self.s)


def gamma(x: float) -> float:
    """Gamma function for positive real arguments."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"gamma requires a finite x > 0, got {x}")
    return math.gamma(x)


def lambda_of_alpha(alpha: float, params: ProblemParams) -> float:
    """Mass associated with the local decay exponent ``alpha``.

    Strictly decreasing from the Hardy constant at ``alpha = 0`` down to 0 at
    ``alpha = (N - 2s)/2``. The right endpoint is returned as an exact zero
    because the denominator has a Gamma pole there.
    """
    N, s = params.N, params.s
    amax = params.alpha_max
    alpha = float(alpha)
    if not (0.0 <= alpha <= amax):
        raise DomainError(f"alpha must lie in [0, {amax}], got {alpha}")
    if alpha == amax:
        return 0.0
    num = (N + 2 * s + 2 * alpha) / 4.0, (N + 2 * s - 2 * alpha) / 4.0
    den = (N - 2 * s + 2 * alpha) / 4.0, (N - 2 * s - 2 * alpha) / 4.0
    if max(num) < 150.0:
        ratio = math.gamma(num[0]) * math.gamma(num[1]) / (math.gamma(den[0]) * math.gamma(den[1]))
    else:
        ratio = math.exp(
            math.lgamma(num[0]) + math.lgamma(num[1]) - math.lgamma(den[0]) - math.lgamma(den[1])
        )
    return 2.0 ** (2 * s) * ratio


def mellin_symbol(kappa_values, params: ProblemParams):
    """Quadratic-form symbol of |x|^{-(N-2s)/2 + i kappa}, i.e. the mass map at alpha = i kappa.

    Real, even in kappa, equal to the Hardy constant at 0 and growing like
    |kappa|^{2s}. Evaluated through log-Gamma so large kappa does not underflow.
    """
    from scipy.special import loggamma

    N, s = params.N, params.s
    z = 0.5j * np.asarray(kappa_values, dtype=float)
    # Gamma(conj z) = conj Gamma(z), so each pair collapses to a squared modulus.
    log_ratio = 2.0 * (loggamma((N + 2 * s) / 4.0 + z) - loggamma((N - 2 * s) / 4.0 + z)).real
    out = 2.0 ** (2 * s) * np.exp(log_ratio)
    return out if out.ndim else float(out)


def hardy_constant(params: ProblemParams) -> float:
    """Best constant h_{N,s} of the fractional Hardy inequality."""
    N, s = params.N, params.s
    return 2.0 ** (2 * s) * (gamma((N + 2 * s) / 4.0) / gamma((N - 2 * s) / 4.0)) ** 2


def alpha_of_lambda(lam: float, params: ProblemParams) -> float:
    """Invert :func:`lambda_of_alpha` by bisection.

    The residual ``|Lambda(alpha) - lam|`` is at most ``1e-10 * max(1, lam)``.
    """
    h = hardy_constant(params)
    lam = float(lam)
    if not (0.0 <= lam <= h):
        raise DomainError(f"lambda must lie in [0, {h}], got {lam}")
    amax = params.alpha_max
    if lam == 0.0:
        return amax
    if lam == h:
        return 0.0

    lo, hi = 0.0, amax
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lambda_of_alpha(mid, params) > lam:
            lo = mid
        else:
            hi = mid
    alpha = min((lo, hi), key=lambda a: abs(lambda_of_alpha(a, params) - lam))
    if abs(lambda_of_alpha(alpha, params) - lam) > INVERSION_RTOL * max(1.0, lam):
        raise ConvergenceError(f"bisection did not reach the residual tolerance for lambda={lam}", alpha)
    return alpha


def kappa(s: float) -> float:
    """Normalisation of the Dirichlet-to-Neumann realisation of (-Delta)^s."""
    s = float(s)
    if not (0.0 < s < 1.0):
        raise DomainError(f"s must lie in (0, 1), got {s}")
    return gamma(1.0 - s) / (2.0 ** (2 * s - 1) * gamma(s))


def critical_exponent(params: ProblemParams) -> float:
    """Fractional Sobolev exponent 2N/(N - 2s)."""
    return params.critical_exponent


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def fractional_laplacian_constant(params: ProblemParams) -> float:
    """Kernel constant C_{N,s} making the symbol of (-Delta)^s equal |xi|^{2s}."""
    N, s = params.N, params.s
    return 2.0 ** (2 * s) / math.pi ** (N / 2.0) * gamma((N + 2 * s) / 2.0) / gamma(2.0 - s) * s * (1.0 - s)
