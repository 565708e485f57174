import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma as G

from multipolar.classifier import Configuration, interaction_sum
from multipolar.discrete import (
    DiscreteProblem,
    Grid1D,
    GridFunction,
    LogSineWindow,
    bubble,
    critical_norm,
    estimate_mu,
    estimate_S,
    hardy_term,
    interaction_upper_bound,
    l2_sq,
    negativity_certificate,
    ps_level,
    ps_threshold,
    q_form,
    seminorm_sq,
    stiffness_column,
)
from multipolar.discrete.forms import SERIES_FROM, fractional_laplacian_constant_1d
from multipolar.errors import DomainError, ValidationError
from multipolar.special import ProblemParams, hardy_constant, kappa

P = ProblemParams(1, 0.25)
H = hardy_constant(P)
# Sharp Sobolev constant for N = 1, s = 1/4.
SOBOLEV_1_025 = (
    2 ** 0.5 * math.pi**0.25 * G(0.75) / G(0.25) * (G(0.5) / G(1.0)) ** 0.5
)


def gaussian(x):
    return np.exp(-(x**2) / 2)


def fourier_entry(m, h, s):
    """Stiffness entry as (1/2pi) int |w|^{2s} |hat^(w)|^2 cos(m h w) dw, by quadrature."""
    A = 60 * math.pi
    f = lambda x: x ** (2 * s) * (math.sin(x) / x) ** 4 * math.cos(2 * m * x) if x > 0 else 0.0
    edges = np.linspace(0, A, 60 * (m + 2) + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        head = math.fsum(quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
    # sin^4 x cos 2mx split into pure cosines for the Fourier-weighted tail.
    g = lambda x: x ** (2 * s - 4) / 8
    tail = 0.0
    for c, b in [(3, 2 * m), (-2, 2 * (m + 1)), (-2, 2 * abs(m - 1)), (0.5, 2 * (m + 2)), (0.5, 2 * abs(m - 2))]:
        if b == 0:
            tail += c * quad(g, A, math.inf, epsabs=0, epsrel=1e-13)[0]
        else:
            tail += c * quad(g, A, math.inf, weight="cos", wvar=b, epsabs=1e-17)[0]
    return h**2 * (2 / h) ** (1 + 2 * s) * (head + tail) / math.pi


def interpolant(u: GridFunction):
    g = u.grid
    xs = np.concatenate(([g.nodes[0] - g.h], g.nodes, [g.nodes[-1] + g.h]))
    vs = np.concatenate(([0.0], u.values, [0.0]))
    return lambda x: np.interp(x, xs, vs), xs


def config(masses, poles):
    return Configuration(P, tuple(masses), tuple((float(a),) for a in poles))


class TestGrid:
    def test_node_layout(self):
        g = Grid1D(1.0, 0.25)
        np.testing.assert_allclose(g.nodes, [-0.875, -0.625, -0.375, -0.125, 0.125, 0.375, 0.625, 0.875])
        assert Grid1D(1.0, 0.25, offset=0.0).n == 8

    @pytest.mark.parametrize("kw", [dict(L=-1, h=0.1), dict(L=1, h=2), dict(L=1, h=0.1, offset=0.1)])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            Grid1D(**kw)

    def test_rejects_other_dimensions(self):
        with pytest.raises(ValidationError):
            Grid1D(1.0, 0.1, params=ProblemParams(3, 0.5))
        with pytest.raises(ValidationError):
            Grid1D(1.0, 0.1, params=ProblemParams(1, 0.6))

    @pytest.mark.parametrize("pole", [0.025, 0.03, 2.0, -1.0])
    def test_pole_clearance(self, pole):
        with pytest.raises(DomainError):
            Grid1D(1.0, 0.05).check_pole(pole)

    def test_pole_midway_accepted(self):
        assert Grid1D(1.0, 0.05).check_pole(0.0) == 0.0

    def test_values_read_only(self):
        u = GridFunction.zeros(Grid1D(1.0, 0.1))
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_shift_loses_mass(self):
        g = Grid1D(1.0, 0.1)
        u = GridFunction(g, np.ones(g.n))
        with pytest.raises(ValidationError):
            u.shifted(1)

    def test_wrong_length(self):
        with pytest.raises(ValidationError):
            GridFunction(Grid1D(1.0, 0.1), np.ones(3))


class TestStiffness:
    @pytest.mark.parametrize("m", [0, 1, 2, 5, 11, 12, 20, 40])
    def test_fourier_oracle(self, m):
        col = stiffness_column(64, 0.1, 0.25)
        assert col[m] == pytest.approx(fourier_entry(m, 0.1, 0.25), rel=1e-10)

    @pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
    @pytest.mark.parametrize("m", [SERIES_FROM, 16, 50, 300])
    def test_series_against_mpmath(self, s, m):
        # Exact fourth difference at 50 digits, where doubles would cancel.
        with mp.workdps(50):
            ms, p = mp.mpf(m), 3 - 2 * mp.mpf(s)
            diff4 = sum(w * abs(ms + k) ** p for w, k in zip((1, -4, 6, -4, 1), range(-2, 3)))
            exact = -fractional_laplacian_constant_1d(s) * diff4 / ((-2 * mp.mpf(s)) * (1 - 2 * mp.mpf(s)) * (2 - 2 * mp.mpf(s)) * p)
        col = stiffness_column(400, 1.0, s)
        assert col[m] == pytest.approx(float(exact), rel=1e-12)

    @pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
    def test_row_sum_vanishes(self, s):
        # Constants are in the kernel; the tail beyond the window decays like m^{-1-2s}.
        n = 20000
        col = stiffness_column(n, 1.0, s)
        tail_sum = col[0] + 2 * math.fsum(col[1:])
        q = -1 - 2 * s
        missing = -2 * fractional_laplacian_constant_1d(s) * float(
            mp.zeta(-q, n) + q * (q - 1) / 6 * mp.zeta(2 - q, n)
        )
        assert tail_sum + missing == pytest.approx(0.0, abs=1e-12 * col[0])

    def test_off_diagonal_negative(self):
        col = stiffness_column(100, 0.1, 0.25)
        assert col[0] > 0 and np.all(col[1:] < 0)

    def test_cached_and_read_only(self):
        col = stiffness_column(10, 0.1, 0.25)
        assert col is stiffness_column(10, 0.1, 0.25)
        assert not col.flags.writeable


class TestQuadraticForms:
    def test_gaussian_seminorm(self):
        u = GridFunction.from_callable(Grid1D(30, 0.02), gaussian)
        assert seminorm_sq(u) == pytest.approx(G(0.75), rel=0.02)
        assert seminorm_sq(u) == pytest.approx(G(0.75), rel=1e-3)

    @pytest.mark.parametrize("rho", [0.5, 2.0])
    def test_dilation_invariance(self, rho):
        d = P.alpha_max
        base = GridFunction.from_callable(Grid1D(30, 0.02), gaussian)
        scaled = GridFunction.from_callable(Grid1D(30 * rho, 0.02 * rho), lambda x: rho**-d * gaussian(x / rho))
        assert seminorm_sq(scaled) == pytest.approx(seminorm_sq(base), rel=0.01)
        assert seminorm_sq(scaled) == pytest.approx(seminorm_sq(base), rel=1e-3)

    def test_hardy_continuum_oracle(self):
        # Adaptive quadrature of the Gaussian against the pole, split at the singularity.
        pole = 0.013
        f = lambda x: math.exp(-x * x) * abs(x - pole) ** -0.5
        oracle = sum(quad(f, a, b, epsrel=1e-12, limit=200)[0] for a, b in [(-30, pole), (pole, 30)])
        u = GridFunction.from_callable(Grid1D(30, 0.02, offset=0.0), gaussian)
        assert hardy_term(u, pole) == pytest.approx(oracle, rel=5e-3)
        assert hardy_term(u, pole) == pytest.approx(oracle, rel=1e-4)

    @pytest.mark.parametrize("pole", [0.0, 0.3, -1.71])
    def test_hardy_exact_on_interpolant(self, pole):
        g = Grid1D(3, 0.1)
        u = GridFunction.from_callable(g, lambda x: np.cos(x) * np.exp(-x * x))
        f, xs = interpolant(u)
        pts = sorted(set(xs.tolist()) | {pole})
        parts = []
        for a, b in zip(pts[:-1], pts[1:]):
            # Algebraic-weight rule absorbs the endpoint singularity at the pole.
            if a == pole:
                parts.append(quad(lambda x: f(x) ** 2, a, b, weight="alg", wvar=(-0.5, 0.0), epsrel=1e-13)[0])
            elif b == pole:
                parts.append(quad(lambda x: f(x) ** 2, a, b, weight="alg", wvar=(0.0, -0.5), epsrel=1e-13)[0])
            else:
                parts.append(quad(lambda x: f(x) ** 2 * abs(x - pole) ** -0.5, a, b, epsabs=0, epsrel=1e-13)[0])
        total = math.fsum(parts)
        assert hardy_term(u, pole) == pytest.approx(total, rel=1e-11)

    def test_l2_and_critical_norms(self):
        u = GridFunction.from_callable(Grid1D(30, 0.02), gaussian)
        assert l2_sq(u) == pytest.approx(math.sqrt(math.pi), rel=1e-4)
        assert critical_norm(u) ** 4 == pytest.approx(math.sqrt(math.pi / 2), rel=1e-3)

    def test_critical_norm_exact_on_interpolant(self):
        g = Grid1D(2, 0.1)
        u = GridFunction.from_callable(g, lambda x: np.exp(-x * x) * (1 + x))
        f, xs = interpolant(u)
        total = math.fsum(quad(lambda x: f(x) ** 4, a, b, epsabs=0, epsrel=1e-13)[0] for a, b in zip(xs[:-1], xs[1:]))
        assert critical_norm(u) ** 4 == pytest.approx(total, rel=1e-12)

    def test_massless_q_is_seminorm(self):
        u = GridFunction.from_callable(Grid1D(10, 0.05), gaussian)
        rep = q_form(u, config([0.0], [0.0]))
        assert rep.q_value == rep.seminorm_sq
        assert rep.mu_quotient == 1.0

    def test_sign_flip(self):
        u = GridFunction.from_callable(Grid1D(10, 0.05), lambda x: gaussian(x) * (1 + x))
        cfg = config([0.3 * H, 0.5 * H], [0.0, 1.0])
        assert q_form(-u, cfg).to_dict() == q_form(u, cfg).to_dict()

    @pytest.mark.parametrize("m", [3, -7, 20])
    def test_translation_invariance(self, m):
        g = Grid1D(10, 0.05)
        u = GridFunction.from_callable(g, lambda x: np.clip(1 - x * x / 4, 0, None) ** 2)
        cfg = config([0.3 * H, -0.2 * H], [0.0, 1.0])
        moved = config(cfg.masses, [a[0] + g.index_shift(m) for a in cfg.poles])
        a, b = q_form(u, cfg).to_dict(), q_form(u.shifted(m), moved).to_dict()
        for key in a:
            np.testing.assert_allclose(b[key], a[key], rtol=1e-10, atol=0)

    def test_mismatched_s(self):
        cfg = Configuration(ProblemParams(1, 0.3), (0.1,), ((0.0,),))
        with pytest.raises(ValidationError):
            DiscreteProblem.from_config(Grid1D(1, 0.05), cfg)

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.floats(-2 * H, 2 * H), min_size=1, max_size=3),
        st.integers(0, 2**32 - 1),
    )
    def test_bookkeeping_identity(self, masses, seed):
        g = Grid1D(5, 0.05)
        poles = [0.0, 1.0, -2.0][: len(masses)]
        v = np.random.default_rng(seed).standard_normal(g.n)
        rep = q_form(GridFunction(g, v), config(masses, poles))
        expect = math.fsum([rep.seminorm_sq] + [-lam * t for lam, t in zip(rep.masses, rep.hardy_terms)])
        assert rep.q_value == expect
        assert math.fsum(rep.masses) == pytest.approx(math.fsum(sorted(masses)))


class TestHardyPositivity:
    @pytest.mark.parametrize("fraction", [0.5, 0.9, 0.999])
    def test_random_trials(self, fraction):
        # The grid form is exact, so Hardy holds with no discretization slack.
        g = Grid1D(10, 0.05)
        prob = DiscreteProblem(g, [fraction * H], [0.0])
        rng = np.random.default_rng(7)
        for _ in range(100):
            v = rng.standard_normal(g.n) * np.exp(-np.abs(g.nodes) * rng.uniform(0.1, 5))
            assert prob.q_value(v) >= -1e-12 * prob.seminorm_sq(v)

    def test_near_optimal_trial(self):
        g = Grid1D(100, 0.05)
        u = LogSineWindow(0.0, 100.0, 14.0).on_grid(g)
        ratio = seminorm_sq(u) / hardy_term(u, 0.0)
        assert H < ratio < 1.5 * H


class TestLogSineWindow:
    def test_continuum_matches_grid(self):
        w = LogSineWindow(0.0, 1.0, 3.0, "inner")
        semi, err = w.seminorm_sq(P)
        u = w.on_grid(Grid1D(30, 0.005))
        assert err < 1e-8
        assert seminorm_sq(u) == pytest.approx(semi, rel=1e-5)
        assert hardy_term(u, 0.0) == pytest.approx(w.hardy_term(0.0, P)[0], rel=1e-5)
        assert hardy_term(u, 3.3) == pytest.approx(w.hardy_term(3.3, P)[0], rel=1e-5)

    def test_centered_hardy_term_is_width(self):
        # int u^2 |x|^{-2s} = 2 int_0^W sin^2(pi t / W) dt = W.
        for width in (2.0, 7.5):
            assert LogSineWindow(0.0, 0.3, width).hardy_term(0.0, P)[0] == pytest.approx(width, rel=1e-12)

    def test_dilation_invariance(self):
        a = LogSineWindow(0.0, 1.0, 5.0).seminorm_sq(P)[0]
        b = LogSineWindow(0.0, 40.0, 5.0).seminorm_sq(P)[0]
        assert a == b

    def test_ratio_tends_to_hardy_constant(self):
        ratios = []
        for width in (8.0, 16.0, 30.0, 60.0):
            w = LogSineWindow(0.0, 1.0, width)
            ratios.append(w.seminorm_sq(P)[0] / w.hardy_term(0.0, P)[0] / H)
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert 1.0 < ratios[-1] < 1.05

    def test_invalid(self):
        with pytest.raises(DomainError):
            LogSineWindow(0.0, -1.0, 2.0)
        with pytest.raises(ValidationError):
            LogSineWindow(0.0, 1.0, 2.0, "middle")


class TestCertificates:
    def test_single_pole_above_hardy(self):
        cert = negativity_certificate(config([1.5 * H], [0.0]), Grid1D(100, 0.05))
        assert cert is not None
        assert cert.evaluation == "grid" and cert.branch == "dominant_pole"
        assert cert.q_value < 0
        assert cert.report.q_value == pytest.approx(cert.q_value, rel=1e-12)
        assert cert.rho in [2.0**k for k in range(-8, 9)]

    def test_two_poles_large_rho(self):
        cert = negativity_certificate(config([0.6 * H, 0.6 * H], [-0.5, 0.5]), Grid1D(100, 0.05))
        assert cert is not None and cert.branch == "large_rho"
        assert cert.q_value + cert.error_bound < 0

    def test_two_poles_grid_only_has_no_witness(self):
        # A total mass of 1.2h needs a log-window far wider than a uniform grid holds.
        assert negativity_certificate(config([0.6 * H, 0.6 * H], [-0.5, 0.5]), Grid1D(100, 0.05), continuum=False) is None

    @pytest.mark.parametrize("masses,poles", [([0.3 * H], [0.0]), ([0.3 * H, 0.3 * H], [-0.5, 0.5]), ([-H], [0.0])])
    def test_none_below_threshold(self, masses, poles):
        assert negativity_certificate(config(masses, poles), Grid1D(100, 0.05)) is None


class TestEstimators:
    GRID = Grid1D(30, 0.05)

    def test_mu_massless_is_one(self):
        r = estimate_mu(config([0.0], [0.0]), self.GRID)
        assert r.quotient == pytest.approx(1.0, abs=1e-12)

    def test_mu_single_pole(self):
        r = estimate_mu(config([0.5 * H], [0.0]), self.GRID)
        rep = r.report
        assert 0 < r.quotient < 1
        assert r.quotient == pytest.approx(1 - 0.5 * H * rep.hardy_terms[0] / rep.seminorm_sq, rel=1e-12)
        # Upper bound for the continuum value 1 - lambda/h.
        assert r.quotient >= 0.5 - 1e-12
        assert r.is_monotone()

    def test_mu_negative_above_hardy(self):
        # On this grid the Hardy ratio bottoms out near 1.45h, so 1.5h is the test mass.
        r = estimate_mu(config([1.5 * H], [0.0]), Grid1D(100, 0.05), iters=500)
        assert r.quotient < 0
        assert r.is_monotone()

    def test_sobolev_massless_bounds(self):
        r = estimate_S(config([0.0], [0.0]), self.GRID)
        start = DiscreteProblem(self.GRID, [0.0], [0.0]).report(bubble(self.GRID)).s_quotient
        assert r.converged and not r.unbounded
        assert SOBOLEV_1_025 <= r.quotient <= start * (1 + 1e-3)
        assert r.quotient == pytest.approx(SOBOLEV_1_025, rel=0.05)
        assert r.is_monotone()

    def test_initial_scale_irrelevant(self):
        cfg = config([0.3 * H], [0.0])
        a = estimate_S(cfg, self.GRID, tol=1e-11)
        b = estimate_S(cfg, self.GRID, tol=1e-11, initial=bubble(self.GRID).scaled(10.0))
        assert b.quotient == pytest.approx(a.quotient, rel=1e-8)

    def test_unbounded_flag(self):
        r = estimate_S(config([1.5 * H], [0.0]), Grid1D(100, 0.05), initial=LogSineWindow(0.0, 100.0, 14.0).on_grid(Grid1D(100, 0.05)))
        assert r.unbounded and r.quotient < 0 and not r.converged

    def test_interaction_lowers_quotient(self):
        pair = config([0.1 * H, 0.5 * H], [1.0, 0.0])
        assert interaction_sum(pair, 1) > 0
        tol = 1e-10
        both = estimate_S(pair, self.GRID, tol=tol)
        single = estimate_S(config([0.5 * H], [0.0]), self.GRID, tol=tol)
        assert both.quotient < single.quotient - 3 * tol

    def test_result_iterate_normalized(self):
        r = estimate_S(config([0.2 * H], [0.0]), self.GRID)
        assert critical_norm(r.iterate) == pytest.approx(1.0, rel=1e-12)


class TestThresholds:
    def test_equal_arguments(self):
        assert ps_threshold(0.7, [0.7], 0.7, 0.7, P) == pytest.approx(0.25 * kappa(0.25) * 0.7, rel=1e-14)

    def test_exponent_two(self):
        val = ps_threshold(0.5, [0.8, 0.9], 0.75, 0.85, P)
        assert val == pytest.approx(kappa(0.25) / 4 / 0.5 * 0.75**2, rel=1e-14)

    @settings(max_examples=100)
    @given(st.floats(0.01, 10.0), st.lists(st.floats(0.01, 10.0), min_size=1, max_size=4), st.floats(0.01, 10), st.floats(0.01, 10))
    def test_level_below_threshold(self, S_la, singles, S_sigma, S_0):
        floor = min([S_0, S_sigma, *singles])
        if S_la < floor * (1 - 1e-9):
            assert ps_level(S_la, P) < ps_threshold(S_la, singles, S_sigma, S_0, P)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_positive_inputs(self, bad):
        with pytest.raises(DomainError):
            ps_threshold(bad, [1.0], 1.0, 1.0, P)


class TestInteractionUpperBound:
    MUS = np.geomspace(1e-1, 1e-3, 6)

    def test_below_and_approaching(self):
        pair = config([0.1 * H, 0.5 * H], [1.0, 0.0])
        bound = interaction_upper_bound(pair, 1, self.MUS, 0.6)
        assert np.all(bound < 0.6)
        assert np.all(np.diff(bound) > 0)

    def test_massless_neighbour(self):
        pair = config([0.0, 0.5 * H], [1.0, 0.0])
        np.testing.assert_array_equal(interaction_upper_bound(pair, 1, self.MUS, 0.6), np.full(6, 0.6))

    def test_repulsive_neighbour(self):
        pair = config([-0.1 * H, 0.5 * H], [1.0, 0.0])
        assert np.all(interaction_upper_bound(pair, 1, self.MUS, 0.6) > 0.6)

    @pytest.mark.parametrize("lam", [0.0, 1.0, 1.2])
    def test_domain(self, lam):
        cfg = config([0.1 * H, lam * H], [1.0, 0.0])
        with pytest.raises(DomainError):
            interaction_upper_bound(cfg, cfg.masses.index(lam * H), self.MUS, 0.6)
