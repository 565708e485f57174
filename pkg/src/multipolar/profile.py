"""Model single-pole radial profile.

The profile is the two-sided envelope itself,

    value(r) = mu^{-(N-2s)/2} * K * E(r / mu),
    E(r) = (r^{1 - a} (1 + r^{2a}))^{-(N-2s)/2},   a = 2 alpha / (N - 2s),

so that value(r) ~ K r^{alpha - (N-2s)/2} near the origin and
value(r) ~ K r^{-alpha - (N-2s)/2} at infinity. With alpha = (N-2s)/2 it is
the Aubin-Talenti bubble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DivergenceError, DomainError, ValidationError
from .special import ProblemParams, alpha_of_lambda, hardy_constant, lambda_of_alpha, sphere_area

__all__ = [
    "RadialProfile",
    "EnvelopeReport",
    "envelope",
    "profile_value",
    "critical_norm",
    "l2_norm_sq",
    "envelope_check",
    "tabulate",
    "integrate_log_radial",
]

QUAD_RTOL = 1e-8
# Gaussian panels on the truncated log-radius axis.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# Tails are cut where the integrand has decayed by e^{-TAIL_DECADES}.
TAIL_DECADES = 45.0
MAX_DOUBLINGS = 14


@dataclass(frozen=True)
class RadialProfile:
    """Radial, radially decreasing profile with local exponent ``alpha``."""

    params: ProblemParams
    lam: float
    alpha: float
    K: float = 1.0
    mu: float = 1.0
    envelope: tuple[float, float] | None = None

    def __post_init__(self):
        p = self.params
        h = hardy_constant(p)
        if not (0.0 <= self.lam < h):
            raise ValidationError(f"lambda must lie in [0, {h}), got {self.lam}")
        if not (0.0 < self.alpha <= p.alpha_max):
            raise ValidationError(f"alpha must lie in (0, {p.alpha_max}], got {self.alpha}")
        if not (self.K > 0 and math.isfinite(self.K)):
            raise ValidationError(f"K must be positive and finite, got {self.K}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValidationError(f"mu must be positive and finite, got {self.mu}")
        env = (self.K, self.K) if self.envelope is None else tuple(float(c) for c in self.envelope)
        if len(env) != 2 or not (0.0 < env[0] <= env[1]):
            raise ValidationError(f"envelope must satisfy 0 < c1 <= c2, got {self.envelope}")
        object.__setattr__(self, "envelope", env)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_lambda(cls, params: ProblemParams, lam: float, K: float = 1.0, mu: float = 1.0, envelope=None):
        h = hardy_constant(params)
        if not (0.0 <= lam < h):
            raise ValidationError(f"lambda must lie in [0, {h}), got {lam}")
        return cls(params, lam, alpha_of_lambda(lam, params), K, mu, envelope)

    @classmethod
    def from_alpha(cls, params: ProblemParams, alpha: float, K: float = 1.0, mu: float = 1.0, envelope=None):
        if not (0.0 < alpha <= params.alpha_max):
            raise ValidationError(f"alpha must lie in (0, {params.alpha_max}], got {alpha}")
        return cls(params, lambda_of_alpha(alpha, params), alpha, K, mu, envelope)

    @classmethod
    def bubble(cls, params: ProblemParams, K: float = 1.0, mu: float = 1.0):
        return cls(params, 0.0, params.alpha_max, K, mu)

    @property
    def half_degree(self) -> float:
        """(N - 2s)/2, the homogeneity degree of the fundamental solution."""
        return self.params.alpha_max

    @property
    def normalized_exponent(self) -> float:
        return self.alpha / self.half_degree

    @property
    def origin_slope(self) -> float:
        return self.alpha - self.half_degree

    @property
    def tail_slope(self) -> float:
        return -self.alpha - self.half_degree

    def rescaled(self, mu: float) -> "RadialProfile":
        return RadialProfile(self.params, self.lam, self.alpha, self.K, mu, self.envelope)

    def with_amplitude(self, K: float) -> "RadialProfile":
        return RadialProfile(self.params, self.lam, self.alpha, K, self.mu, None)


def _check_radii(r):
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise DomainError("radii must be positive and finite")
    return arr


def _log_envelope(p: RadialProfile, log_rho):
    # log E(rho) written to stay finite for |log rho| up to ~700.
    a = p.normalized_exponent
    t = 2.0 * a * log_rho
    log_one_plus = np.where(t > 0, t + np.log1p(np.exp(-np.abs(t))), np.log1p(np.exp(-np.abs(t))))
    return -p.half_degree * ((1.0 - a) * log_rho + log_one_plus)


def envelope(p: RadialProfile, r):
    """Unit-amplitude envelope at the profile's scale, mu^{-(N-2s)/2} E(r/mu)."""
    arr = _check_radii(r)
    out = np.exp(_log_envelope(p, np.log(arr / p.mu)) - p.half_degree * math.log(p.mu))
    return out if out.ndim else float(out)


def profile_value(p: RadialProfile, r):
    """Evaluate the profile at ``r > 0`` (scalar or array)."""
    return p.K * envelope(p, r)


def integrate_log_radial(
    fun: Callable[[np.ndarray], np.ndarray],
    rate_pos: float,
    rate_neg: float,
    center: float = 0.0,
    rtol: float = QUAD_RTOL,
) -> float:
    """Integrate ``fun(u)`` over the real line.

    ``fun`` must decay like ``exp(-rate_pos * u)`` as u -> +inf and like
    ``exp(rate_neg * u)`` as u -> -inf, measured from ``center``. Each half
    line is truncated where the decay reaches ``exp(-TAIL_DECADES)`` and
    integrated by composite Gauss-Legendre, doubling panels until the
    relative change is below ``rtol``.
    """
    if not (rate_pos > 0 and rate_neg > 0):
        raise DivergenceError(f"integrand does not decay: rates {rate_pos}, {rate_neg}")
    pieces = []
    for sign, rate in ((1.0, rate_pos), (-1.0, rate_neg)):
        length = TAIL_DECADES / rate
        pieces.append(_composite_gauss(lambda u, sg=sign: fun(center + sg * u), 0.0, length, rtol))
    return math.fsum(pieces)


def _composite_gauss(fun, a, b, rtol):
    panels = 8
    prev = _gauss_panels(fun, a, b, panels)
    for _ in range(MAX_DOUBLINGS):
        panels *= 2
        cur = _gauss_panels(fun, a, b, panels)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise ConvergenceError(f"composite Gauss rule did not converge on [{a}, {b}]", cur)


def _gauss_panels(fun, a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    vals = np.asarray(fun(u), dtype=float).reshape(panels, -1)
    return float(np.sum(half * (vals @ _GL_WEIGHTS)))


def _radial_power_integral(p: RadialProfile, power: float) -> float:
    """omega_{N-1} * int_0^inf E(rho)^power rho^{N-1} d rho for the unit-scale envelope."""
    N = p.params.N
    a = p.normalized_exponent
    d = p.half_degree
    # Exponents of the integrand e^{N u} E(e^u)^power at both ends.
    rate_pos = power * d * (1.0 + a) - N
    rate_neg = N - power * d * (1.0 - a)
    if rate_pos <= 0:
        raise DivergenceError(f"integral of profile^{power} diverges at infinity (tail rate {rate_pos})")
    if rate_neg <= 0:
        raise DivergenceError(f"integral of profile^{power} diverges at the origin (rate {rate_neg})")

    def integrand(u):
        return np.exp(N * u + power * _log_envelope(p, u))

    return sphere_area(N) * integrate_log_radial(integrand, rate_pos, rate_neg)


def critical_norm(p: RadialProfile) -> float:
    """L^{2*} norm of the profile on R^N.

    The substitution r = mu * rho removes mu exactly, so the norm is computed
    on the unit-scale envelope.
    """
    q = p.params.critical_exponent
    if p.alpha <= 0:
        raise DivergenceError("critical norm diverges for alpha = 0")
    return p.K * _radial_power_integral(p, q) ** (1.0 / q)


def l2_norm_sq(p: RadialProfile) -> float:
    """Squared L^2 norm; finite iff alpha > s. Scales like mu^{2s}."""
    if p.alpha <= p.params.s:
        raise DivergenceError(f"profile is not square integrable: alpha={p.alpha} <= s={p.params.s}")
    return p.K**2 * p.mu ** (2 * p.params.s) * _radial_power_integral(p, 2.0)


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    radii: np.ndarray
    lower_margin: np.ndarray  # value/E - c1
    upper_margin: np.ndarray  # c2 - value/E

    @property
    def n_failed(self) -> int:
        return int(np.sum((self.lower_margin < 0) | (self.upper_margin < 0)))


def envelope_check(p: RadialProfile, samples: Sequence[float]) -> EnvelopeReport:
    """Check c1 * E <= value <= c2 * E at every sample radius."""
    r = np.atleast_1d(_check_radii(samples))
    if r.size == 0:
        raise ValidationError("need at least one sample radius")
    ratio = np.atleast_1d(profile_value(p, r)) / np.atleast_1d(envelope(p, r))
    c1, c2 = p.envelope
    # Ratios are K up to rounding; allow a few ulps.
    slack = 8 * np.finfo(float).eps * ratio
    lower = ratio - c1 + slack
    upper = c2 - ratio + slack
    return EnvelopeReport(bool(np.all(lower >= 0) and np.all(upper >= 0)), r, lower, upper)


def tabulate(p: RadialProfile, radii: Sequence[float]) -> np.ndarray:
    """Two-column array (r, value) for plotting or CSV export."""
    r = np.atleast_1d(_check_radii(radii))
    return np.column_stack([r, np.atleast_1d(profile_value(p, r))])
