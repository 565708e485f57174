"""Quadratic forms of piecewise-linear functions on a uniform 1D grid.

Every quantity is the exact continuum integral of the interpolant (up to
Gauss quadrature of smooth integrands), so the discrete form is the true
form restricted to a finite-dimensional subspace. In particular the Hardy
inequality holds exactly on the grid and every minimized quotient is an
upper bound for the continuum infimum.

Stiffness. For hat functions on a uniform grid the Gagliardo form
(C/2) int int (u(x) - u(y))^2 / |x - y|^{1+2s} is a symmetric Toeplitz
matrix whose entries are a fourth central difference of |t|^{3-2s}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import matmul_toeplitz

from ..classifier import Configuration
from ..errors import ValidationError
from ..special import ProblemParams, fractional_laplacian_constant
from .grid import Grid1D, GridFunction

__all__ = [
    "stiffness_column",
    "Tridiagonal",
    "hardy_matrix",
    "mass_matrix",
    "DiscreteProblem",
    "QuadraticFormReport",
    "seminorm_sq",
    "hardy_term",
    "l2_sq",
    "critical_norm",
    "q_form",
]

# Above this lag the stiffness entries come from the asymptotic series.
SERIES_FROM = 12
# Taylor coefficients of (2 sinh(x/2))^4 / x^4 in powers of x^2.
_DELTA4_SERIES = (1.0, 1 / 6, 1 / 80, 17 / 30240, 31 / 1814400, 1 / 2661120)
_GL8 = np.polynomial.legendre.leggauss(8)
_GL6 = np.polynomial.legendre.leggauss(6)
# Cells closer than this many steps to a pole use exact moments.
NEAR_CELLS = 2.0


@lru_cache(maxsize=32)
def stiffness_column(n: int, h: float, s: float) -> np.ndarray:
    """First column of the Toeplitz stiffness matrix for n hat functions."""
    C = fractional_laplacian_constant_1d(s)
    p = 3.0 - 2.0 * s
    denom = (-2 * s) * (1 - 2 * s) * (2 - 2 * s) * (3 - 2 * s)
    m = np.arange(n, dtype=float)
    col = np.empty(n)
    small = m < SERIES_FROM
    ms = m[small]
    diff4 = sum(w * np.abs(ms + k) ** p for w, k in zip((1, -4, 6, -4, 1), range(-2, 3)))
    col[small] = diff4 / denom
    # Fourth difference of t^p / denom = t^q * sum c_j (q)_{2j} t^{-2j}, q = p - 4.
    big = m[~small]
    q = p - 4.0
    acc = np.zeros_like(big)
    falling = 1.0
    for j, c in enumerate(_DELTA4_SERIES):
        if j:
            falling *= (q - 2 * j + 2) * (q - 2 * j + 1)
        acc += c * falling * big ** (q - 2 * j)
    col[~small] = acc
    col *= -C * h ** (1 - 2 * s)
    col.setflags(write=False)
    return col


def fractional_laplacian_constant_1d(s: float) -> float:
    return fractional_laplacian_constant(ProblemParams(1, s))


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def quad(self, u: np.ndarray) -> float:
        return float(np.dot(self.diag, u * u) + 2.0 * np.dot(self.off, u[:-1] * u[1:]))

    def combine(self, other: "Tridiagonal", c: float) -> "Tridiagonal":
        return Tridiagonal(self.diag + c * other.diag, self.off + c * other.off)

    @classmethod
    def zeros(cls, n: int) -> "Tridiagonal":
        return cls(np.zeros(n), np.zeros(max(n - 1, 0)))


def _power_antiderivative(t: np.ndarray, k: int, s: float) -> np.ndarray:
    # d/dt [t^{k+1} |t|^{-2s}] = (k + 1 - 2s) t^k |t|^{-2s}, valid on both sides of 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        out = t ** (k + 1) * np.abs(t) ** (-2 * s) / (k + 1 - 2 * s)
    return np.where(t == 0, 0.0, out)


@lru_cache(maxsize=256)
def hardy_matrix(grid: Grid1D, pole: float) -> Tridiagonal:
    """Exact Gram matrix of the hats against |x - pole|^{-2s}."""
    a = grid.check_pole(pole)
    s, h, n = grid.s, grid.h, grid.n
    # Cell c spans [x_c, x_{c+1}] for c = -1..n-1, with virtual nodes x_{-1}, x_n.
    left = grid.nodes[0] - h + h * np.arange(n + 1) - a
    right = left + h
    near = (np.minimum(np.abs(left), np.abs(right)) < NEAR_CELLS * h) | (left * right < 0)

    # Moments M_k = int_0^1 tau^k |left + h tau|^{-2s} h d tau.
    M = np.zeros((3, n + 1))
    xg, wg = _GL8
    tau = 0.5 * (xg + 1.0)
    far = ~near
    weights = 0.5 * wg[None, :] * h * np.abs(left[far, None] + h * tau[None, :]) ** (-2 * s)
    for k in range(3):
        M[k, far] = weights @ tau**k
    t0, t1 = left[near], right[near]
    m = [_power_antiderivative(t1, k, s) - _power_antiderivative(t0, k, s) for k in range(3)]
    M[0, near] = m[0]
    M[1, near] = (m[1] - t0 * m[0]) / h
    M[2, near] = (m[2] - 2 * t0 * m[1] + t0 * t0 * m[0]) / h**2

    left_hat = M[0] - 2 * M[1] + M[2]  # (1 - tau)^2: node c on cell c
    right_hat = M[2]  # tau^2: node c + 1 on cell c
    cross = M[1] - M[2]
    diag = left_hat[1:] + right_hat[:-1]
    off = cross[1:-1]
    diag.setflags(write=False)
    off.setflags(write=False)
    return Tridiagonal(diag, off)


@lru_cache(maxsize=32)
def mass_matrix(grid: Grid1D) -> Tridiagonal:
    n, h = grid.n, grid.h
    return Tridiagonal(np.full(n, 2 * h / 3), np.full(n - 1, h / 6))


def _cell_samples(u: np.ndarray):
    """Values of the interpolant at 6 Gauss points in each of the n+1 cells."""
    xg, wg = _GL6
    tau = 0.5 * (xg + 1.0)
    ul = np.concatenate(([0.0], u))
    ur = np.concatenate((u, [0.0]))
    vals = ul[:, None] * (1 - tau)[None, :] + ur[:, None] * tau[None, :]
    return vals, tau, 0.5 * wg


def _power_integral(u: np.ndarray, h: float, p: float) -> float:
    vals, _, w = _cell_samples(u)
    return float(h * np.sum(np.abs(vals) ** p @ w))


def _power_integral_grad(u: np.ndarray, h: float, p: float) -> np.ndarray:
    """Gradient of int |u|^p with respect to the nodal values."""
    vals, tau, w = _cell_samples(u)
    g = p * h * (np.abs(vals) ** (p - 2) * vals) * w[None, :]
    # Node i receives the right end of cell i and the left end of cell i + 1.
    return g[:-1] @ tau + g[1:] @ (1 - tau)


def _as_values(u) -> np.ndarray:
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def seminorm_sq(u: GridFunction) -> float:
    """Squared D^{s,2} seminorm of the interpolant, int |xi|^{2s} |u^(xi)|^2 d xi / (2 pi)."""
    g = u.grid
    col = stiffness_column(g.n, g.h, g.s)
    v = u.values
    return float(np.dot(v, matmul_toeplitz(col, v)))


def hardy_term(u: GridFunction, pole: float) -> float:
    """int u(x)^2 / |x - pole|^{2s} dx."""
    return hardy_matrix(u.grid, float(pole)).quad(u.values)


def l2_sq(u: GridFunction) -> float:
    return mass_matrix(u.grid).quad(u.values)


def critical_norm(u: GridFunction) -> float:
    """L^{2*} norm of the interpolant, 2* = 2/(1 - 2s)."""
    p = u.grid.params.critical_exponent
    return _power_integral(u.values, u.grid.h, p) ** (1.0 / p)


@dataclass(frozen=True)
class QuadraticFormReport:
    seminorm_sq: float
    hardy_terms: tuple[float, ...]
    masses: tuple[float, ...]
    q_value: float
    l2_sq: float
    crit_norm: float
    mu_quotient: float
    s_quotient: float

    def to_dict(self) -> dict:
        return {
            "seminorm_sq": self.seminorm_sq,
            "hardy_terms": list(self.hardy_terms),
            "masses": list(self.masses),
            "q_value": self.q_value,
            "l2_sq": self.l2_sq,
            "crit_norm": self.crit_norm,
            "mu_quotient": self.mu_quotient,
            "s_quotient": self.s_quotient,
        }


class DiscreteProblem:
    """Q(u) = seminorm^2 - sum_i lambda_i int u^2 / |x - a_i|^{2s} on a fixed grid."""

    def __init__(self, grid: Grid1D, masses: Sequence[float], poles: Sequence[float]):
        if len(masses) != len(poles):
            raise ValidationError("masses and poles must have equal length")
        self.grid = grid
        self.masses = tuple(float(m) for m in masses)
        self.poles = tuple(grid.check_pole(a) for a in poles)
        self.col = stiffness_column(grid.n, grid.h, grid.s)
        potential = Tridiagonal.zeros(grid.n)
        for lam, a in zip(self.masses, self.poles):
            if lam != 0.0:
                potential = potential.combine(hardy_matrix(grid, a), lam)
        self.potential = potential
        self.p = grid.params.critical_exponent

    @classmethod
    def from_config(cls, grid: Grid1D, config: Configuration) -> "DiscreteProblem":
        if config.params.N != 1:
            raise ValidationError("the grid solver needs N = 1")
        if not math.isclose(config.params.s, grid.s, rel_tol=0, abs_tol=1e-15):
            raise ValidationError(f"configuration s={config.params.s} differs from grid s={grid.s}")
        return cls(grid, config.masses, [a[0] for a in config.poles])

    def apply_stiffness(self, v: np.ndarray) -> np.ndarray:
        return matmul_toeplitz(self.col, v)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix of Q applied to nodal values."""
        return self.apply_stiffness(v) - self.potential.matvec(v)

    def seminorm_sq(self, v: np.ndarray) -> float:
        return float(np.dot(v, self.apply_stiffness(v)))

    def q_value(self, v: np.ndarray) -> float:
        return float(np.dot(v, self.apply(v)))

    def crit_power(self, v: np.ndarray) -> float:
        return _power_integral(v, self.grid.h, self.p)

    def crit_power_grad(self, v: np.ndarray) -> np.ndarray:
        return _power_integral_grad(v, self.grid.h, self.p)

    def report(self, u) -> QuadraticFormReport:
        v = _as_values(u)
        semi = self.seminorm_sq(v)
        terms = tuple(hardy_matrix(self.grid, a).quad(v) for a in self.poles)
        q = math.fsum([semi] + [-lam * t for lam, t in zip(self.masses, terms)])
        crit = self.crit_power(v) ** (1.0 / self.p)
        return QuadraticFormReport(
            seminorm_sq=semi,
            hardy_terms=terms,
            masses=self.masses,
            q_value=q,
            l2_sq=mass_matrix(self.grid).quad(v),
            crit_norm=crit,
            mu_quotient=q / semi if semi > 0 else math.nan,
            s_quotient=q / crit**2 if crit > 0 else math.nan,
        )


def q_form(u: GridFunction, config: Configuration) -> QuadraticFormReport:
    """Full report of the multipolar quadratic form at ``u``."""
    return DiscreteProblem.from_config(u.grid, config).report(u)
