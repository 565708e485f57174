"""Explicit trial functions for the one-dimensional quadratic form.

The log-sine window

    u(x) = |x - c|^{-(1-2s)/2} sin(pi log(|x - c| / r0) / W),  r0 < |x - c| < r0 e^W,

is the critical Hardy power with a smooth cutoff in log-radius. Its Hardy
quotient tends to the Hardy constant as W grows, at a rate set by the
Mellin symbol near 0, so it is the natural near-optimizer for certificates.

Besides grid sampling, the window can be evaluated in the continuum. The
seminorm follows from Mellin-Plancherel,

    [u]^2 = (2/pi) int_0^inf M(kappa) |phi^(kappa)|^2 d kappa,

with M the Mellin symbol and phi the sine window, and the Hardy terms are
one-dimensional integrals over the support. This reaches log-widths that no
uniform grid can hold.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from ..errors import ConvergenceError, DomainError, ValidationError
from ..special import ProblemParams, mellin_symbol
from .grid import Grid1D, GridFunction

__all__ = ["LogSineWindow", "ContinuumEvaluation", "bubble", "mollified_power"]

QUAD_RTOL = 1e-11


def _quad(f, a, b, **kw) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(f, a, b, limit=1000, epsabs=0.0, epsrel=QUAD_RTOL, **kw)


@dataclass(frozen=True)
class ContinuumEvaluation:
    seminorm_sq: float
    hardy_terms: tuple[float, ...]
    q_value: float
    error_bound: float

    @property
    def certified_negative(self) -> bool:
        return self.q_value + self.error_bound < 0.0


@dataclass(frozen=True)
class LogSineWindow:
    """Sine window on r0 < |x - center| < r0 e^width.

    ``anchor`` picks how the dilation parameter rho enters: "outer" puts the
    support inside |x - c| < rho, "inner" puts it outside |x - c| > rho.
    """

    center: float
    rho: float
    width: float
    anchor: str = "outer"

    def __post_init__(self):
        if not (self.rho > 0 and self.width > 0):
            raise DomainError("rho and width must be positive")
        if self.anchor not in ("outer", "inner"):
            raise ValidationError(f"anchor must be 'outer' or 'inner', got {self.anchor!r}")

    @property
    def r_min(self) -> float:
        return self.rho * math.exp(-self.width) if self.anchor == "outer" else self.rho

    @property
    def r_max(self) -> float:
        return self.rho if self.anchor == "outer" else self.rho * math.exp(self.width)

    def label(self) -> str:
        return f"log_sine(width={self.width:g}, anchor={self.anchor})"

    def __call__(self, x, s: float) -> np.ndarray:
        d = 0.5 - s
        r = np.abs(np.asarray(x, dtype=float) - self.center)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.log(r / self.r_min)
            inside = (t > 0) & (t < self.width)
            out = np.where(inside, r ** (-d) * np.sin(math.pi * np.clip(t, 0, self.width) / self.width), 0.0)
        return out

    def on_grid(self, grid: Grid1D) -> GridFunction:
        return GridFunction.from_callable(grid, lambda x: self(x, grid.s))

    def seminorm_sq(self, params: ProblemParams) -> tuple[float, float]:
        """Continuum seminorm and a quadrature error estimate."""
        _check_params(params)
        W = self.width
        a = math.pi / W
        # |phi^|^2 = 2 a^2 (1 + cos(kappa W)) / (a^2 - kappa^2)^2; the double zero at kappa = a cancels.
        def full(k):
            if abs(k - a) < 1e-7 * a:
                k = a * (1 + 1e-7)
            return mellin_symbol(k, params) * 2 * a * a * (1 + math.cos(k * W)) / (a * a - k * k) ** 2

        split = 4 * a
        v0, e0 = _quad(full, 0.0, split, points=[a])
        smooth = lambda k: mellin_symbol(k, params) * 2 * a * a / (a * a - k * k) ** 2
        v1, e1 = _quad(smooth, split, math.inf)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            v2, e2 = quad(smooth, split, math.inf, weight="cos", wvar=W, limlst=200)
        scale = 2.0 / math.pi
        # Dilation leaves the seminorm unchanged; no dependence on rho.
        return scale * math.fsum((v0, v1, v2)), scale * (e0 + e1 + e2)

    def hardy_term(self, pole: float, params: ProblemParams) -> tuple[float, float]:
        """int u^2 |x - pole|^{-2s} dx over both sides of the center."""
        _check_params(params)
        s, W = params.s, self.width
        total, err = [], 0.0
        for side in (1.0, -1.0):
            # x = c + side * r0 e^t; u^2 dx = r^{2s} sin^2(pi t/W) dt.
            gap = side * (pole - self.center)

            def f(t):
                r = self.r_min * math.exp(t)
                return r ** (2 * s) * math.sin(math.pi * t / W) ** 2 * abs(r - gap) ** (-2 * s)

            pts = []
            if gap > 0:
                tg = math.log(gap / self.r_min)
                if 0 < tg < W:
                    pts = [tg]
            edges = [0.0, *pts, W]
            for lo, hi in zip(edges[:-1], edges[1:]):
                v, e = _quad(f, lo, hi)
                total.append(v)
                err += e
        return math.fsum(total), err

    def evaluate(self, masses: Sequence[float], poles: Sequence[float], params: ProblemParams) -> ContinuumEvaluation:
        semi, err = self.seminorm_sq(params)
        terms = []
        for lam, a in zip(masses, poles):
            v, e = self.hardy_term(float(a), params)
            terms.append(v)
            err += abs(lam) * e
        q = math.fsum([semi] + [-lam * t for lam, t in zip(masses, terms)])
        if not math.isfinite(q):
            raise ConvergenceError("continuum evaluation produced a non-finite value")
        return ContinuumEvaluation(semi, tuple(terms), q, err)


def _check_params(params: ProblemParams) -> None:
    if params.N != 1 or not params.s < 0.5:
        raise ValidationError("trial functions need N = 1 and s < 1/2")


def bubble(grid: Grid1D, center: float = 0.0, scale: float = 1.0) -> GridFunction:
    """(1 + ((x - center)/scale)^2)^{-(1 - 2s)/2}, unnormalized."""
    d = grid.params.alpha_max
    return GridFunction.from_callable(grid, lambda x: (1.0 + ((x - center) / scale) ** 2) ** (-d))


def mollified_power(grid: Grid1D, center: float, exponent: float, width: float) -> GridFunction:
    """((x-c)^2 + h^2)^{exponent/2} tapered by exp(-|x - c|/width)."""
    h = grid.h
    return GridFunction.from_callable(
        grid, lambda x: ((x - center) ** 2 + h * h) ** (exponent / 2) * np.exp(-np.abs(x - center) / width)
    )
