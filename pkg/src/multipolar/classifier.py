"""Rule engine deciding existence / non-existence of minimizers.

Every rule returns a :class:`RuleResult` carrying the numbers it compared, so
a :class:`Verdict` can be audited without re-running anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .special import ProblemParams, alpha_of_lambda, hardy_constant

__all__ = [
    "Configuration",
    "Outcome",
    "RuleResult",
    "Verdict",
    "validate",
    "interaction_exponent",
    "interaction_sum",
    "check_existence_main",
    "check_mass_feasibility",
    "check_uniform_positivity",
    "check_nonexistence",
    "check_not_achieved",
    "classify",
    "classify_positivity",
]

TIE_TOL = 1e-12


def _compare(a: float, b: float) -> int:
    """Three-way comparison that treats values within TIE_TOL as equal."""
    if abs(a - b) <= TIE_TOL * max(1.0, abs(a), abs(b)):
        return 0
    return 1 if a > b else -1


@dataclass(frozen=True)
class Configuration:
    """Masses and pairwise distinct poles, stored with masses ascending.

    Construction normalizes: masses are stably sorted and the poles follow
    their masses, so ``Configuration`` instances are always valid.
    """

    params: ProblemParams
    masses: tuple[float, ...]
    poles: tuple[tuple[float, ...], ...]
    min_pole_distance: float = field(init=False)

    def __post_init__(self):
        masses = [float(m) for m in self.masses]
        poles = [tuple(float(c) for c in p) for p in self.poles]
        if len(masses) == 0:
            raise ValidationError("a configuration needs at least one pole")
        if len(masses) != len(poles):
            raise ValidationError(f"got {len(masses)} masses but {len(poles)} poles")
        if not all(math.isfinite(m) for m in masses):
            raise ValidationError("masses must be finite")
        N = self.params.N
        for p in poles:
            if len(p) != N or not all(math.isfinite(c) for c in p):
                raise ValidationError(f"each pole needs {N} finite coordinates, got {p}")
        order = sorted(range(len(masses)), key=lambda i: masses[i])
        masses = tuple(masses[i] for i in order)
        poles = tuple(poles[i] for i in order)
        dmin = math.inf
        for i in range(len(poles)):
            for j in range(i + 1, len(poles)):
                d = math.dist(poles[i], poles[j])
                if d == 0.0:
                    raise ValidationError(f"poles {i} and {j} coincide at {poles[i]}")
                dmin = min(dmin, d)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "min_pole_distance", dmin)

    @property
    def k(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        """Sum of all masses (sigma_lambda)."""
        return math.fsum(self.masses)

    @property
    def positive_mass(self) -> float:
        return math.fsum(m for m in self.masses if m > 0)

    def pole(self, i: int) -> np.ndarray:
        return np.asarray(self.poles[i], dtype=float)

    def scaled(self, factor: float) -> "Configuration":
        """Same masses, poles dilated about the origin."""
        return Configuration(self.params, self.masses, tuple(tuple(factor * c for c in p) for p in self.poles))


def validate(config: Configuration) -> Configuration:
    """Return the normalized form of ``config`` (idempotent)."""
    return Configuration(config.params, config.masses, config.poles)


class Outcome(str, Enum):
    EXISTS_MINIMIZER = "ExistsMinimizer"
    NO_SOLUTIONS = "NoSolutions"
    NOT_ACHIEVED = "NotAchieved"
    POSITIVITY_GUARANTEED = "PositivityGuaranteed"
    POSITIVITY_VIOLATED_SOMEWHERE = "PositivityViolatedSomewhere"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RuleResult:
    rule: str
    status: str
    fired: bool
    values: dict = field(default_factory=dict)
    failed_conditions: tuple[str, ...] = ()
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "status": self.status,
            "fired": self.fired,
            "values": dict(self.values),
            "failed_conditions": list(self.failed_conditions),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    fired_rules: tuple[RuleResult, ...]
    notes: tuple[str, ...] = ()
    positivity_certificate: str | None = None

    @property
    def rules(self) -> dict[str, RuleResult]:
        return {r.rule: r for r in self.fired_rules}

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "positivity_certificate": self.positivity_certificate,
            "rules": [r.to_dict() for r in self.fired_rules],
            "notes": list(self.notes),
        }


def interaction_exponent(lam: float, params: ProblemParams) -> float:
    """beta = alpha_lambda when s > alpha_lambda, otherwise s."""
    alpha = alpha_of_lambda(lam, params)
    return alpha if params.s > alpha else params.s


def interaction_sum(config: Configuration, i: int) -> float:
    """Weighted pull of the other poles on pole ``i``: sum_j lambda_j / |a_j - a_i|^(2 beta)."""
    h = hardy_constant(config.params)
    lam_i = config.masses[i]
    if not (0.0 < lam_i < h):
        raise DomainError(f"interaction_sum needs 0 < lambda_i < h = {h}, got {lam_i}")
    beta = interaction_exponent(lam_i, config.params)
    ai = config.pole(i)
    terms = [
        config.masses[j] / float(np.linalg.norm(config.pole(j) - ai)) ** (2.0 * beta)
        for j in range(config.k)
        if j != i
    ]
    return math.fsum(terms)


def _existence_for_index(config: Configuration, i: int, h: float) -> RuleResult:
    lam_top = config.masses[i]
    below = math.fsum(m for j, m in enumerate(config.masses) if j != i)
    values = {"pole_index": i, "lambda_k": lam_top, "hardy_constant": h, "sum_lower_masses": below}
    failed, undecided = [], []

    c = _compare(lam_top, h)
    if c == 0:
        undecided.append("top_mass_below_hardy")
    elif c > 0:
        failed.append("top_mass_below_hardy")
    c = _compare(lam_top, 0.0)
    if c == 0:
        undecided.append("top_mass_positive")
    elif c < 0:
        failed.append("top_mass_positive")
    if below > TIE_TOL * max(1.0, max(abs(m) for m in config.masses)):
        failed.append("lower_mass_sum_nonpositive")

    if 0.0 < lam_top < h:
        alpha = alpha_of_lambda(lam_top, config.params)
        beta = alpha if config.params.s > alpha else config.params.s
        isum = interaction_sum(config, i)
        values.update(alpha_k=alpha, beta=beta, interaction_sum=isum)
        c = _compare(isum, 0.0)
        if c == 0:
            undecided.append("interaction_sum_positive")
        elif c < 0:
            failed.append("interaction_sum_positive")
    else:
        values.update(alpha_k=math.nan, beta=math.nan, interaction_sum=math.nan)

    if failed:
        status = "FAIL"
    elif undecided:
        status = "UNDECIDED"
    else:
        status = "PASS"
    return RuleResult(
        rule="existence_main",
        status=status,
        fired=status == "PASS",
        values=values,
        failed_conditions=tuple(failed + undecided),
        detail="coercivity (mu > 0) must be certified separately",
    )


def check_existence_main(config: Configuration) -> RuleResult:
    """Sufficient mass/geometry conditions for a minimizer of the critical quotient.

    With several poles sharing the largest mass, each of them is tried as the
    distinguished pole; the first passing labelling is reported.
    """
    h = hardy_constant(config.params)
    if config.k < 2:
        return RuleResult(
            rule="existence_main",
            status="FAIL",
            fired=False,
            values={"k": config.k},
            failed_conditions=("at_least_two_poles",),
            detail="stated for k >= 2",
        )
    top = config.masses[-1]
    candidates = [i for i in range(config.k) if _compare(config.masses[i], top) == 0]
    results = [_existence_for_index(config, i, h) for i in reversed(candidates)]
    for r in results:
        if r.status == "PASS":
            return r
    for r in results:
        if r.status == "UNDECIDED":
            return r
    return results[0]


def _mass_params(masses: Sequence[float], params: ProblemParams) -> tuple[list[float], float]:
    return sorted(float(m) for m in masses), hardy_constant(params)


def check_mass_feasibility(masses: Sequence[float], params: ProblemParams) -> RuleResult:
    """Whether some pole placement can make the quadratic form coercive."""
    m, h = _mass_params(masses, params)
    total = math.fsum(m)
    values = {"max_mass": m[-1], "total_mass": total, "hardy_constant": h}
    cmax, ctot = _compare(m[-1], h), _compare(total, h)
    if cmax < 0 and ctot < 0:
        return RuleResult("mass_feasibility", "FEASIBLE", True, values)
    failed = tuple(n for n, c in (("each_mass_below_hardy", cmax), ("total_below_hardy", ctot)) if c >= 0)
    if cmax > 0 or ctot > 0:
        return RuleResult("mass_feasibility", "INFEASIBLE-NECESSITY-VIOLATED", True, values, failed)
    return RuleResult("mass_feasibility", "UNDECIDED", False, values, failed)


def check_uniform_positivity(masses: Sequence[float], params: ProblemParams) -> RuleResult:
    """Coercivity for every pole placement, decided by the positive part of the masses."""
    m, h = _mass_params(masses, params)
    pos = math.fsum(x for x in m if x > 0)
    values = {"positive_mass": pos, "hardy_constant": h}
    c = _compare(pos, h)
    if c < 0:
        return RuleResult("uniform_positivity", "POSITIVE-FOR-ALL-POLES", True, values)
    if c > 0:
        return RuleResult(
            "uniform_positivity",
            "NEGATIVE-FOR-SOME-POLES",
            True,
            values,
            ("positive_mass_below_hardy",),
            "some placement makes the form indefinite; no solutions there",
        )
    return RuleResult("uniform_positivity", "UNDECIDED", False, values, ("positive_mass_below_hardy",))


def check_nonexistence(masses: Sequence[float], params: ProblemParams) -> RuleResult:
    """No solutions for any placement when one mass or the total exceeds h."""
    m, h = _mass_params(masses, params)
    total = math.fsum(m)
    values = {"max_mass": m[-1], "total_mass": total, "hardy_constant": h}
    if len(m) < 2:
        return RuleResult("nonexistence", "NOT-APPLICABLE", False, values, ("at_least_two_poles",))
    cmax, ctot = _compare(m[-1], h), _compare(total, h)
    if cmax > 0 or ctot > 0:
        which = "some_mass_above_hardy" if cmax > 0 else "total_above_hardy"
        return RuleResult("nonexistence", "NO-SOLUTIONS-ALL-POLES", True, values, detail=which)
    status = "UNDECIDED" if (cmax == 0 or ctot == 0) else "NOT-FIRED"
    return RuleResult("nonexistence", status, False, values, ("some_mass_above_hardy", "total_above_hardy"))


def check_not_achieved(masses: Sequence[float], params: ProblemParams) -> RuleResult:
    """Infimum not attained for any placement (two mass patterns)."""
    m, h = _mass_params(masses, params)
    total = math.fsum(m)
    values = {"min_mass": m[0], "max_mass": m[-1], "total_mass": total, "hardy_constant": h}
    if len(m) < 2:
        return RuleResult("not_achieved", "NOT-APPLICABLE", False, values, ("at_least_two_poles",))

    single_attractive = m[0] < 0 and all(x <= 0 for x in m[:-1]) and 0 < m[-1] and _compare(m[-1], h) < 0
    all_repulsive_small = m[0] >= 0 and _compare(m[-1], h) < 0 and _compare(total, h) < 0
    if single_attractive:
        return RuleResult("not_achieved", "NOT-ACHIEVED-ALL-POLES", True, values, detail="one_positive_mass_rest_nonpositive")
    if all_repulsive_small:
        return RuleResult("not_achieved", "NOT-ACHIEVED-ALL-POLES", True, values, detail="nonnegative_masses_total_below_hardy")
    return RuleResult(
        "not_achieved",
        "NOT-FIRED",
        False,
        values,
        ("one_positive_mass_rest_nonpositive", "nonnegative_masses_total_below_hardy"),
    )


def classify(config: Configuration, mu_estimate: float | None = None) -> Verdict:
    """Aggregate the rules with fixed precedence.

    Order: non-existence, then non-attainment, then the existence criterion,
    which additionally needs a coercivity certificate: either the uniform
    positivity rule or a positive numerical estimate ``mu_estimate``.
    """
    config = validate(config)
    params, masses = config.params, config.masses
    h = hardy_constant(params)
    nonex = check_nonexistence(masses, params)
    notach = check_not_achieved(masses, params)
    exist = check_existence_main(config)
    feas = check_mass_feasibility(masses, params)
    upos = check_uniform_positivity(masses, params)
    rules = (nonex, notach, exist, feas, upos)
    notes: list[str] = []

    if config.k == 1 and _compare(masses[0], h) > 0:
        notes.append(
            "single pole with mass above the Hardy constant: the quadratic form is unbounded below "
            "by optimality of the Hardy inequality, but the multi-pole non-existence rule needs k >= 2"
        )

    if nonex.fired:
        return Verdict(Outcome.NO_SOLUTIONS, rules, tuple(notes))
    if notach.fired:
        return Verdict(Outcome.NOT_ACHIEVED, rules, tuple(notes))
    if exist.fired:
        if upos.status == "POSITIVE-FOR-ALL-POLES":
            return Verdict(Outcome.EXISTS_MINIMIZER, rules, tuple(notes), "uniform_positivity")
        if mu_estimate is not None and mu_estimate > 0:
            notes.append(f"coercivity certified numerically: mu estimate {mu_estimate!r}")
            return Verdict(Outcome.EXISTS_MINIMIZER, rules, tuple(notes), "numerical_mu")
        notes.append("existence conditions hold but coercivity is not certified")
    if upos.status == "NEGATIVE-FOR-SOME-POLES":
        return Verdict(Outcome.POSITIVITY_VIOLATED_SOMEWHERE, rules, tuple(notes))
    return Verdict(Outcome.INDETERMINATE, rules, tuple(notes))


def classify_positivity(masses: Sequence[float], params: ProblemParams) -> Verdict:
    """Coercivity-only verdict from the mass conditions."""
    feas = check_mass_feasibility(masses, params)
    upos = check_uniform_positivity(masses, params)
    rules = (upos, feas)
    if upos.status == "POSITIVE-FOR-ALL-POLES":
        return Verdict(Outcome.POSITIVITY_GUARANTEED, rules, positivity_certificate="uniform_positivity")
    if upos.status == "NEGATIVE-FOR-SOME-POLES":
        notes = ()
        if feas.status == "INFEASIBLE-NECESSITY-VIOLATED":
            notes = ("no placement of the poles makes the form coercive",)
        return Verdict(Outcome.POSITIVITY_VIOLATED_SOMEWHERE, rules, notes)
    return Verdict(Outcome.INDETERMINATE, rules)
