"""Hardy interaction of a concentrating profile with a distant pole.

For a radial profile p and a point xi != 0,

    I = int_{R^N} p(x)^2 |x + xi|^{-2s} dx
      = int_0^inf p(r)^2 r^{N-1} A(r, |xi|) dr,

where A(r, rho) is the integral of |r theta + rho e1|^{-2s} over the unit
sphere. All radial integrals run in u = log r so that the power-law tails and
the origin behaviour become exponential decay.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import hyp2f1

from .errors import ConvergenceError, DivergenceError, DomainError, FitError, ValidationError
from .profile import RadialProfile, _log_envelope, l2_norm_sq
from .special import ProblemParams, sphere_area

__all__ = [
    "angular_kernel",
    "hardy_interaction",
    "theta_integral",
    "RateFit",
    "Regime",
    "predicted_regime",
    "interaction_curve",
    "fit_rate",
    "rate_sweep",
    "default_mus",
]

QUAD_RTOL = 1e-10
ACCEPT_RTOL = 1e-6
TAIL_DECADES = 45.0
LOG_CORRECTION_FACTOR = 5.0
CRITICAL_ATOL = 1e-9


def _log_kernel_shape(gap, N: int, s: float):
    """log of A(r, rho) * max(r, rho)^{2s} as a function of gap = |log r - log rho|."""
    gap = np.asarray(gap, dtype=float)
    t = np.exp(-gap)
    one_minus_t = -np.expm1(-gap)
    if N == 1:
        with np.errstate(divide="ignore"):
            return np.log((1.0 + t) ** (-2 * s) + one_minus_t ** (-2 * s))
    if N == 3:
        # ((1+t)^q - (1-t)^q) / (t q) with q = 2 - 2s, written without cancellation.
        q = 2.0 - 2.0 * s
        with np.errstate(divide="ignore", invalid="ignore"):
            # log((1+t)/(1-t)) = 2 atanh(t) keeps the small-t difference accurate.
            lm = np.log(one_minus_t)
            diff = np.where(t < 0.5, np.exp(q * lm) * np.expm1(2 * q * np.arctanh(t)), (1 + t) ** q - one_minus_t**q)
        small = t < 1e-8
        ratio = np.where(small, 2.0, diff / np.where(small, 1.0, t * q))
        return math.log(2.0 * math.pi) + np.log(ratio)
    return math.log(sphere_area(N)) + np.log(hyp2f1(s, s + 1.0 - N / 2.0, N / 2.0, t * t))


def angular_kernel(r, rho: float, params: ProblemParams):
    """Integral of |r theta + rho e1|^{-2s} over the unit sphere (theta in S^{N-1})."""
    r = np.asarray(r, dtype=float)
    if rho <= 0 or np.any(r <= 0):
        raise DomainError("radii must be positive")
    log_r, log_rho = np.log(r), math.log(rho)
    gap = np.abs(log_r - log_rho)
    out = np.exp(-2 * params.s * np.maximum(log_r, log_rho) + _log_kernel_shape(gap, params.N, params.s))
    return out if out.ndim else float(out)


def _integrate_segments(fun, edges: Sequence[float]) -> tuple[float, float]:
    total, err = [], 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= a:
                continue
            val, e = quad(fun, a, b, limit=500, epsabs=0.0, epsrel=QUAD_RTOL)
            total.append(val)
            err += e
    return math.fsum(total), err


def _radial_against_kernel(log_weight, rate_neg, rate_pos, centers, rho, params, what):
    """int exp(log_weight(u)) A(e^u, rho) du over the real line."""
    if rate_neg <= 0 or rate_pos <= 0:
        raise DivergenceError(f"{what} diverges (tail rates {rate_neg}, {rate_pos})")
    log_rho = math.log(rho)
    N, s = params.N, params.s
    lo = min(centers) - TAIL_DECADES / rate_neg
    hi = max(centers) + TAIL_DECADES / rate_pos
    edges = sorted({lo, hi, *centers})

    def f(u):
        return math.exp(log_weight(u) - 2 * s * max(u, log_rho) + float(_log_kernel_shape(abs(u - log_rho), N, s)))

    val, err = _integrate_segments(f, edges)
    if not (val > 0 and math.isfinite(val)) or err > ACCEPT_RTOL * val:
        raise ConvergenceError(f"{what}: quadrature error estimate {err:.3g} too large for value {val:.6g}", val)
    return val


def _xi_norm(xi, N: int) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size == 1 and N != 1:
        rho = abs(float(xi[0]))
    elif xi.shape != (N,):
        raise ValidationError(f"xi must have {N} coordinates")
    else:
        rho = float(np.linalg.norm(xi))
    if not rho > 0 or not math.isfinite(rho):
        raise DomainError("xi must be a nonzero finite point")
    return rho


def hardy_interaction(p: RadialProfile, xi) -> float:
    """int p(x)^2 |x + xi|^{-2s} dx for the radial profile ``p``.

    ``xi`` is a point of R^N or, as a shortcut, its norm. The value depends
    on |xi| only.
    """
    params = p.params
    rho = _xi_norm(xi, params.N)
    N, s, d = params.N, params.s, p.half_degree
    log_mu = math.log(p.mu)
    log_scale = 2 * math.log(p.K) - 2 * d * log_mu

    def log_weight(u):
        return log_scale + 2 * float(_log_envelope(p, u - log_mu)) + N * u

    # Near the origin p^2 r^N ~ r^{2 alpha + 2s}; at infinity p^2 r^N A ~ r^{-2 alpha}.
    return _radial_against_kernel(
        log_weight, 2 * p.alpha + 2 * s, 2 * p.alpha, (log_mu, math.log(rho)), rho, params, "hardy interaction"
    )


def theta_integral(alpha: float, params: ProblemParams, xi=1.0) -> float:
    """int |x|^{2s - N - 2 alpha} |x + xi|^{-2s} dx, finite for 0 < alpha < s.

    Homogeneous of degree -2 alpha in xi.
    """
    s = params.s
    if not alpha > 0:
        raise DivergenceError(f"theta integral diverges at infinity for alpha={alpha} <= 0")
    if not alpha < s:
        raise DivergenceError(f"theta integral diverges at the origin for alpha={alpha} >= s={s}")
    rho = _xi_norm(xi, params.N)

    def log_weight(u):
        return (2 * s - 2 * alpha) * u

    return _radial_against_kernel(
        log_weight, 2 * s - 2 * alpha, 2 * alpha, (math.log(rho),), rho, params, "theta integral"
    )


@dataclass(frozen=True)
class Regime:
    """Leading-order small-mu behaviour of the interaction.

    ``kind`` is "origin" (I ~ C mu^{2 alpha}), "l2" (I ~ C mu^{2s}) or
    "critical" (I ~ C mu^{2s} |log mu|).
    """

    kind: str
    slope: float
    constant: float


def predicted_regime(p: RadialProfile, xi) -> Regime:
    params = p.params
    s, rho = params.s, _xi_norm(xi, params.N)
    unit = p.rescaled(1.0)
    if abs(p.alpha - s) <= CRITICAL_ATOL:
        return Regime("critical", 2 * s, sphere_area(params.N) * p.K**2 * rho ** (-2 * s))
    if p.alpha < s:
        return Regime("origin", 2 * p.alpha, p.K**2 * theta_integral(p.alpha, params, rho))
    return Regime("l2", 2 * s, rho ** (-2 * s) * l2_norm_sq(unit))


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log I against log mu.

    ``constant`` is C in I ~ C mu^slope. When ``log_corrected`` is set the
    data are better explained by I ~ mu^{2s} (a |log mu| + b), and
    ``log_coefficient`` holds a.
    """

    slope: float
    constant: float
    r_squared: float
    log_corrected: bool
    window: tuple[float, float]
    n_points: int
    log_coefficient: float = math.nan
    log_offset: float = math.nan
    max_residual_power: float = math.nan
    max_residual_log: float = math.nan
    mus: tuple[float, ...] = field(default=(), repr=False)
    values: tuple[float, ...] = field(default=(), repr=False)


def default_mus(n: int = 8, mu_max: float = 1e-1, mu_min: float = 1e-3) -> np.ndarray:
    return np.geomspace(mu_max, mu_min, n)


def interaction_curve(p: RadialProfile, xi, mus: Sequence[float], workers: int = 1) -> np.ndarray:
    """hardy_interaction of ``p`` rescaled to each mu, in input order."""
    mus = [float(m) for m in mus]
    job = lambda m: hardy_interaction(p.rescaled(m), xi)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(job, mus)))
    return np.array([job(m) for m in mus])


def fit_rate(mus: Sequence[float], values: Sequence[float], s: float, factor: float = LOG_CORRECTION_FACTOR) -> RateFit:
    mus = np.asarray(mus, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = (mus > 0) & (values > 0) & np.isfinite(values) & np.isfinite(mus)
    if ok.sum() < 4:
        raise FitError(f"need at least 4 usable points, got {int(ok.sum())}")
    mus, values = mus[ok], values[ok]
    x, y = np.log(mus), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    res_power = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res_power**2)) / ss_tot if ss_tot > 0 else 1.0

    # Same parameter count: I / mu^{2s} = a |log mu| + b.
    L = np.abs(x)
    a, b = np.polyfit(L, values / mus ** (2 * s), 1)
    model = a * L + b
    if np.all(model > 0):
        res_log = y - np.log(mus ** (2 * s) * model)
        max_log = float(np.max(np.abs(res_log)))
    else:
        max_log = math.inf
    max_power = float(np.max(np.abs(res_power)))
    corrected = bool(a > 0 and max_power >= factor * max_log)
    return RateFit(
        slope=float(slope),
        constant=float(math.exp(intercept)),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        log_corrected=corrected,
        window=(float(mus.min()), float(mus.max())),
        n_points=int(mus.size),
        log_coefficient=float(a) if corrected else math.nan,
        log_offset=float(b) if corrected else math.nan,
        max_residual_power=max_power,
        max_residual_log=max_log,
        mus=tuple(float(m) for m in mus),
        values=tuple(float(v) for v in values),
    )


def rate_sweep(
    p: RadialProfile,
    xi,
    mus: Sequence[float] | None = None,
    factor: float = LOG_CORRECTION_FACTOR,
    workers: int = 1,
) -> RateFit:
    """Evaluate the interaction along a mu ladder and fit its rate."""
    mus = default_mus() if mus is None else np.asarray(mus, dtype=float)
    if mus.size < 6:
        raise ValidationError("need at least 6 values of mu")
    if np.any(mus <= 0):
        raise ValidationError("mu values must be positive")
    if math.log10(mus.max() / mus.min()) < 2.0 - 1e-9:
        raise ValidationError("mu values must span at least two decades")
    values = interaction_curve(p, xi, mus, workers)
    return fit_rate(mus, values, p.params.s, factor)
