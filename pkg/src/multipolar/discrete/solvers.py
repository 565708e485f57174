"""Quotient minimization, negativity certificates and threshold formulas.

Both estimators minimize a 0-homogeneous quotient R = Q(u) / D(u) by
gradient descent with Barzilai-Borwein steps and Armijo backtracking, then
renormalize the iterate. The accepted values never increase, and since the
grid form is the exact form of the interpolant, every returned quotient is
an upper bound for the continuum infimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..asymptotics import hardy_interaction
from ..classifier import Configuration
from ..errors import DomainError
from ..profile import RadialProfile, critical_norm as profile_critical_norm
from ..special import ProblemParams, alpha_of_lambda, hardy_constant, kappa
from .forms import DiscreteProblem, QuadraticFormReport
from .grid import Grid1D, GridFunction
from .trials import LogSineWindow, bubble, mollified_power

__all__ = [
    "MinimizationResult",
    "Certificate",
    "estimate_mu",
    "estimate_S",
    "negativity_certificate",
    "ps_threshold",
    "ps_level",
    "interaction_upper_bound",
    "DILATION_LADDER",
]

DEFAULT_ITERS = 2000
DEFAULT_TOL = 1e-9
ARMIJO = 1e-4
MAX_BACKTRACK = 60
# Stop once the quotient has dropped by less than tol over this many steps.
STALL_WINDOW = 10
DILATION_LADDER = tuple(2.0**k for k in range(-8, 9))
GRID_WINDOW_WIDTHS = (4.0, 8.0, 12.0, 16.0, 20.0)
CONTINUUM_WINDOW_WIDTHS = (20.0, 30.0, 40.0, 60.0)


@dataclass(frozen=True)
class MinimizationResult:
    quotient: float
    iterate: GridFunction
    history: tuple[float, ...]
    iterations: int
    converged: bool
    report: QuadraticFormReport
    unbounded: bool = False
    diagnostics: dict = field(default_factory=dict)

    def is_monotone(self, slack: float = 1e-12) -> bool:
        h = np.asarray(self.history)
        return bool(np.all(np.diff(h) <= slack * np.maximum(1.0, np.abs(h[:-1]))))


def _descend(
    value_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    normalize: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    iters: int,
    tol: float,
    stop_below: float | None = None,
):
    v = normalize(np.asarray(v0, dtype=float))
    R, g = value_grad(v)
    history = [R]
    gn = float(np.linalg.norm(g))
    step = 1e-2 * float(np.linalg.norm(v)) / gn if gn > 0 else 0.0
    converged = gn == 0.0
    k = 0
    stalled = False
    for k in range(1, iters + 1):
        if converged:
            k -= 1
            break
        gg = float(np.dot(g, g))
        accepted = False
        for _ in range(MAX_BACKTRACK):
            w = normalize(v - step * g)
            R_new, g_new = value_grad(w)
            if R_new <= R - ARMIJO * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No descent direction left at working precision.
            converged = True
            stalled = True
            k -= 1
            break
        s_vec, y_vec = w - v, g_new - g
        sy = float(np.dot(s_vec, y_vec))
        step = float(np.dot(s_vec, s_vec)) / sy if sy > 0 else 2.0 * step
        v, R, g = w, R_new, g_new
        history.append(R)
        if stop_below is not None and R < stop_below:
            break
        if len(history) > STALL_WINDOW and history[-STALL_WINDOW - 1] - R <= tol * max(1.0, abs(R)):
            converged = True
            break
    return v, history, k, converged, stalled


def _dominant_pole(problem: DiscreteProblem) -> tuple[float, float]:
    if not problem.masses:
        return 0.0, 0.0
    i = int(np.argmax(problem.masses))
    return problem.masses[i], problem.poles[i]


def _problem(config: Configuration, grid: Grid1D) -> DiscreteProblem:
    return DiscreteProblem.from_config(grid, config)


def estimate_mu(
    config: Configuration,
    grid: Grid1D,
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
    initial: GridFunction | None = None,
) -> MinimizationResult:
    """Minimize Q(u) / seminorm^2 over grid functions (coercivity parameter)."""
    prob = _problem(config, grid)
    if initial is None:
        _, a = _dominant_pole(prob)
        # Hardy optimizing sequences drive this quotient, so start from the
        # widest log-sine window the grid holds around the dominant pole.
        outer = 0.9 * (grid.L - abs(a))
        initial = LogSineWindow(a, outer, math.log(outer / grid.h) + 6.0).on_grid(grid)
    v0 = initial.values

    def normalize(v):
        return v / math.sqrt(prob.seminorm_sq(v))

    def value_grad(v):
        Av = prob.apply_stiffness(v)
        Bv = Av - prob.potential.matvec(v)
        D = float(np.dot(v, Av))
        R = float(np.dot(v, Bv)) / D
        return R, 2.0 * (Bv - R * Av) / D

    v, history, k, converged, stalled = _descend(value_grad, normalize, v0, iters, tol)
    u = GridFunction(grid, v)
    rep = prob.report(u)
    return MinimizationResult(
        rep.mu_quotient, u, tuple(history), k, converged, rep,
        diagnostics={"stalled": stalled, "boundary_magnitude": u.boundary_magnitude()},
    )


def estimate_S(
    config: Configuration,
    grid: Grid1D,
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
    initial: GridFunction | None = None,
) -> MinimizationResult:
    """Minimize Q(u) / |u|_{2*}^2 (critical Rayleigh quotient).

    Stops with ``unbounded`` set as soon as the quotient turns negative.
    """
    prob = _problem(config, grid)
    if initial is None:
        _, a = _dominant_pole(prob)
        initial = bubble(grid, a)
    p = prob.p

    def normalize(v):
        return v / prob.crit_power(v) ** (1.0 / p)

    def value_grad(v):
        Bv = prob.apply(v)
        P = prob.crit_power(v)
        D = P ** (2.0 / p)
        R = float(np.dot(v, Bv)) / D
        dD = (2.0 / p) * P ** (2.0 / p - 1.0) * prob.crit_power_grad(v)
        return R, (2.0 * Bv - R * dD) / D

    v, history, k, converged, stalled = _descend(value_grad, normalize, initial.values, iters, tol, stop_below=0.0)
    unbounded = history[-1] < 0.0
    u = GridFunction(grid, v)
    rep = prob.report(u)
    return MinimizationResult(
        rep.s_quotient, u, tuple(history), k, converged and not unbounded, rep, unbounded,
        diagnostics={"stalled": stalled, "boundary_magnitude": u.boundary_magnitude()},
    )


@dataclass(frozen=True)
class Certificate:
    """Trial function with Q < 0, witnessing that the form is not positive.

    ``evaluation`` is "grid" when Q was computed on the grid (then
    ``function`` and ``report`` are set) or "continuum" when the trial is the
    exact log-sine window evaluated by quadrature (then ``error_bound`` is
    the summed quadrature error and ``q_value + error_bound < 0``).
    """

    q_value: float
    rho: float
    center: float
    family: str
    branch: str
    evaluation: str
    trial: LogSineWindow | None = None
    function: GridFunction | None = None
    report: QuadraticFormReport | None = None
    error_bound: float = 0.0

    def to_dict(self) -> dict:
        return {
            "q_value": self.q_value,
            "rho": self.rho,
            "center": self.center,
            "family": self.family,
            "branch": self.branch,
            "evaluation": self.evaluation,
            "error_bound": self.error_bound,
        }


def _grid_trials(grid: Grid1D, center: float, rho: float, anchor: str):
    for width in GRID_WINDOW_WIDTHS:
        w = LogSineWindow(center, rho, width, anchor)
        yield w.label(), w, w.on_grid(grid)
    if anchor == "outer":
        d = grid.params.alpha_max
        # Truncated power with exponent just above the critical one, cut off at scale rho.
        yield "mollified_power", None, mollified_power(grid, center, 0.02 * d - d, rho)


def _branches(masses, poles):
    # Both branches are scanned whenever some mass is positive; below the
    # Hardy thresholds the scan simply finds nothing.
    pos = [(lam, a) for lam, a in zip(masses, poles) if lam > 0]
    if not pos:
        return []
    top = max(pos)[1]
    return [
        ("dominant_pole", top, DILATION_LADDER, "outer"),
        ("large_rho", float(np.mean(poles)), DILATION_LADDER[::-1], "inner"),
    ]


def negativity_certificate(config: Configuration, grid: Grid1D, continuum: bool = True) -> Certificate | None:
    """Scan the dilation ladder for a trial with Q < 0.

    Branch "dominant_pole" centres log-sine windows of support |x - a| < rho
    at the pole of largest mass and scans rho upwards; it succeeds when that
    mass exceeds the Hardy constant. Branch "large_rho" uses windows of
    support |x - c| > rho around the centroid c with rho scanned downwards;
    there all poles look like one pole carrying the total mass. When the grid
    cannot hold a wide enough window, that branch falls back to the exact
    continuum evaluation of wider windows.
    """
    prob = _problem(config, grid)
    branches = _branches(prob.masses, prob.poles)
    for branch, center, ladder, anchor in branches:
        for rho in ladder:
            for family, trial, u in _grid_trials(grid, center, rho, anchor):
                if not np.any(u.values):
                    continue
                q = prob.q_value(u.values)
                if q < 0:
                    return Certificate(q, rho, center, family, branch, "grid", trial, u, prob.report(u))
    if not continuum:
        return None
    for branch, center, ladder, anchor in branches:
        if branch != "large_rho":
            continue
        for rho in ladder:
            for width in CONTINUUM_WINDOW_WIDTHS:
                w = LogSineWindow(center, rho, width, anchor)
                ev = w.evaluate(prob.masses, prob.poles, grid.params)
                if ev.certified_negative:
                    return Certificate(ev.q_value, rho, center, w.label(), branch, "continuum", w, error_bound=ev.error_bound)
    return None


def ps_level(S_la: float, params: ProblemParams) -> float:
    """Energy level s * kappa_s * S / N of a minimizing sequence."""
    return params.s * kappa(params.s) / params.N * S_la


def ps_threshold(S_la: float, S_singles: Sequence[float], S_sigma: float, S_0: float, params: ProblemParams) -> float:
    """(s kappa_s / N) S_la^{1 - N/(2s)} min(S_0, S_singles..., S_sigma)^{N/(2s)}."""
    values = [S_la, S_sigma, S_0, *S_singles]
    if not all(v > 0 and math.isfinite(v) for v in values):
        raise DomainError("all quotient values must be positive and finite")
    e = params.N / (2 * params.s)
    floor = min([S_0, S_sigma, *S_singles])
    return params.s * kappa(params.s) / params.N * S_la ** (1 - e) * floor**e


def interaction_upper_bound(
    config: Configuration, i: int, mus: Sequence[float], single_quotient: float, K: float = 1.0
) -> np.ndarray:
    """S_i - sum_{j != i} lambda_j int z_mu^2 / |x - (a_j - a_i)|^{2s} along ``mus``.

    z_mu is the model profile for lambda_i at scale mu, normalized in L^{2*}.
    """
    params = config.params
    lam_i = config.masses[i]
    h = hardy_constant(params)
    if not (0 < lam_i < h):
        raise DomainError(f"mass {lam_i} of pole {i} must lie in (0, h)")
    base = RadialProfile.from_lambda(params, lam_i, K=K)
    norm_sq = profile_critical_norm(base) ** 2
    a_i = np.asarray(config.pole(i))
    others = [(config.masses[j], np.asarray(config.pole(j)) - a_i) for j in range(config.k) if j != i]
    out = []
    for mu in mus:
        p = base.rescaled(float(mu))
        total = math.fsum(lam * hardy_interaction(p, xi) for lam, xi in others if lam != 0.0)
        out.append(single_quotient - total / norm_sq)
    return np.array(out)
