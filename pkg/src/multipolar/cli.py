"""Batch command line: read a JSON request, run one computation, write a report.

Commands: spectral, classify, asymptotics, minimize, sweep, report.

Exit status: 0 success, 1 other failure, 2 unreadable or malformed JSON,
3 invalid request, 4 solver non-convergence (the partial report is still
written).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .asymptotics import default_mus, interaction_curve, predicted_regime, rate_sweep
from .classifier import Configuration, classify, interaction_sum
from .errors import ConvergenceError, DivergenceError, DomainError, MultipolarError, ValidationError
from .io import (
    SCHEMA_VERSION,
    RequestError,
    check_schema,
    configuration_to_dict,
    dumps,
    load_document,
    parse_configuration,
    parse_params,
    rows_to_csv,
)
from .profile import RadialProfile
from .special import ProblemParams, alpha_of_lambda, hardy_constant, kappa

EXIT_OK, EXIT_FAILURE, EXIT_MALFORMED, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4
THREADS_ENV = "MULTIPOLAR_THREADS"
DEFAULT_FRACTIONS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
DEFAULT_SOLVER = {"L": 30.0, "h": 0.05, "offset": None, "iters": 2000, "tol": 1e-9, "quotient": "S", "initial": "default"}


class NotConverged(MultipolarError):
    """Carries a finished-but-unconverged report out of a command."""

    def __init__(self, message: str, document: dict, rows: list[dict] | None = None):
        super().__init__(message)
        self.document = document
        self.rows = rows


# ---------------------------------------------------------------- helpers


def _threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"thread count must be at least 1, got {n}")
    return n


def _block(doc: dict, name: str) -> dict:
    block = doc.get(name, {})
    if not isinstance(block, dict):
        raise ValidationError(f"field {name!r} must be an object")
    return block


def _scaled_configuration(doc: dict) -> Configuration:
    """Configuration with masses optionally given in units of the Hardy constant."""
    unit = doc.get("mass_unit", "absolute")
    config = parse_configuration(doc)
    if unit == "absolute":
        return config
    if unit != "hardy":
        raise ValidationError(f"mass_unit must be 'absolute' or 'hardy', got {unit!r}")
    h = hardy_constant(config.params)
    return Configuration(config.params, tuple(m * h for m in config.masses), config.poles)


def _need_config(doc: dict | None, command: str) -> dict:
    if doc is None:
        raise ValidationError(f"command {command!r} needs --config")
    return doc


def _envelope(command: str, threads: int, seed: int | None) -> dict:
    return {"schema": SCHEMA_VERSION, "command": command, "version": __version__, "run": {"threads": threads, "seed": seed}}


def _grid(config: Configuration, solver: dict):
    from .discrete import Grid1D

    if config.params.N != 1:
        raise ValidationError("the grid solver needs N = 1")
    return Grid1D(float(solver["L"]), float(solver["h"]), solver.get("offset"), config.params)


def _solver_settings(doc: dict) -> dict:
    solver = dict(DEFAULT_SOLVER)
    solver.update(_block(doc, "solver"))
    unknown = set(solver) - set(DEFAULT_SOLVER)
    if unknown:
        raise ValidationError(f"unknown solver fields: {sorted(unknown)}")
    if solver["quotient"] not in ("S", "mu"):
        raise ValidationError(f"solver.quotient must be 'S' or 'mu', got {solver['quotient']!r}")
    if solver["initial"] not in ("default", "random"):
        raise ValidationError(f"solver.initial must be 'default' or 'random', got {solver['initial']!r}")
    if int(solver["iters"]) < 1 or not float(solver["tol"]) > 0:
        raise ValidationError("solver.iters must be >= 1 and solver.tol > 0")
    return solver


def _profile(doc: dict, params: ProblemParams) -> tuple[RadialProfile, Any, np.ndarray]:
    block = _block(doc, "profile")
    K = float(block.get("K", 1.0))
    keys = [k for k in ("alpha", "lambda", "lambda_over_h") if k in block]
    if len(keys) != 1:
        raise ValidationError("profile needs exactly one of 'alpha', 'lambda', 'lambda_over_h'")
    if keys[0] == "alpha":
        p = RadialProfile.from_alpha(params, float(block["alpha"]), K=K)
    else:
        lam = float(block[keys[0]]) * (hardy_constant(params) if keys[0] == "lambda_over_h" else 1.0)
        p = RadialProfile.from_lambda(params, lam, K=K)
    xi = block.get("xi", 1.0)
    mus = block.get("mus")
    if mus is None:
        mus = default_mus()
    elif isinstance(mus, dict):
        mus = default_mus(int(mus.get("n", 8)), float(mus.get("max", 1e-1)), float(mus.get("min", 1e-3)))
    else:
        mus = np.asarray(mus, dtype=float)
    return p, xi, mus


def _random_initial(grid, center: float, seed: int | None):
    from .discrete import GridFunction, bubble

    rng = np.random.default_rng(seed)
    base = bubble(grid, center)
    # Smooth multiplicative noise: a few random Fourier modes on the grid extent.
    x = grid.nodes / grid.L
    k = np.arange(1, 6)
    noise = (rng.standard_normal(5)[:, None] * np.cos(np.pi * k[:, None] * x[None, :])).sum(axis=0) / k.size
    return GridFunction(grid, base.values * (1.0 + 0.2 * noise))


def _run_minimizer(config: Configuration, solver: dict, seed: int | None):
    from .discrete import estimate_mu, estimate_S

    grid = _grid(config, solver)
    initial = None
    if solver["initial"] == "random":
        top = int(np.argmax(config.masses))
        initial = _random_initial(grid, config.poles[top][0], seed)
    fun = estimate_S if solver["quotient"] == "S" else estimate_mu
    return grid, fun(config, grid, iters=int(solver["iters"]), tol=float(solver["tol"]), initial=initial)


# ---------------------------------------------------------------- commands


def cmd_spectral(args, doc: dict | None, threads: int) -> tuple[dict, list[dict]]:
    if args.N is not None or args.s is not None:
        if args.N is None or args.s is None:
            raise ValidationError("spectral needs both --N and --s")
        params = ProblemParams(args.N, args.s)
        block = {}
    else:
        doc = _need_config(doc, "spectral")
        check_schema(doc)
        params = parse_params(doc)
        block = _block(doc, "spectral")
    fractions = block.get("lambda_over_h", list(DEFAULT_FRACTIONS))
    h = hardy_constant(params)
    rows = []
    for f in fractions:
        f = float(f)
        if not (0.0 <= f < 1.0):
            raise ValidationError(f"lambda_over_h entries must lie in [0, 1), got {f}")
        rows.append({"lambda_over_h": f, "lambda": f * h, "alpha": alpha_of_lambda(f * h, params)})
    out = _envelope("spectral", threads, args.seed)
    out["params"] = {"N": params.N, "s": params.s}
    out["result"] = {
        "hardy_constant": h,
        "kappa": kappa(params.s),
        "critical_exponent": params.critical_exponent,
        "alpha_max": params.alpha_max,
        "alpha_table": rows,
    }
    return out, rows


def cmd_classify(args, doc: dict | None, threads: int) -> tuple[dict, list[dict]]:
    doc = _need_config(doc, "classify")
    config = _scaled_configuration(doc)
    out = _envelope("classify", threads, args.seed)
    out["configuration"] = configuration_to_dict(config)
    mu_estimate = None
    if args.certify:
        from .discrete import negativity_certificate

        solver = _solver_settings(doc)
        grid, res = _run_minimizer(config, {**solver, "quotient": "mu", "initial": "default"}, args.seed)
        mu_estimate = res.quotient
        cert = negativity_certificate(config, grid)
        out["discrete"] = {
            "grid": {"L": grid.L, "h": grid.h, "offset": grid.offset, "n": grid.n},
            "mu_estimate": res.quotient,
            "mu_converged": res.converged,
            "negativity_certificate": None if cert is None else cert.to_dict(),
        }
    verdict = classify(config, mu_estimate=mu_estimate if (mu_estimate is not None and mu_estimate > 0) else None)
    out["verdict"] = verdict.to_dict()
    rows = [
        {"rule": r.rule, "status": r.status, "fired": r.fired, "failed_conditions": ";".join(r.failed_conditions)}
        for r in verdict.fired_rules
    ]
    return out, rows


def cmd_asymptotics(args, doc: dict | None, threads: int) -> tuple[dict, list[dict]]:
    doc = _need_config(doc, "asymptotics")
    check_schema(doc)
    params = parse_params(doc)
    p, xi, mus = _profile(doc, params)
    regime = predicted_regime(p, xi)
    fit = rate_sweep(p, xi, mus=mus, workers=threads)
    rows = [
        {"mu": m, "value": v, "value_over_predicted": v / (regime.constant * m**regime.slope * (abs(math.log(m)) if regime.kind == "critical" else 1.0))}
        for m, v in zip(fit.mus, fit.values)
    ]
    out = _envelope("asymptotics", threads, args.seed)
    out["params"] = {"N": params.N, "s": params.s}
    out["profile"] = {"lambda": p.lam, "alpha": p.alpha, "K": p.K, "xi_norm": float(np.linalg.norm(np.atleast_1d(xi)))}
    out["regime"] = {"kind": regime.kind, "slope": regime.slope, "constant": regime.constant}
    out["fit"] = {
        "slope": fit.slope,
        "constant": fit.constant,
        "r_squared": fit.r_squared,
        "log_corrected": fit.log_corrected,
        "log_coefficient": fit.log_coefficient,
        "log_offset": fit.log_offset,
        "max_residual_power": fit.max_residual_power,
        "max_residual_log": fit.max_residual_log,
        "window": list(fit.window),
        "n_points": fit.n_points,
    }
    out["rows"] = rows
    return out, rows


def cmd_minimize(args, doc: dict | None, threads: int) -> tuple[dict, list[dict]]:
    doc = _need_config(doc, "minimize")
    config = _scaled_configuration(doc)
    solver = _solver_settings(doc)
    grid, res = _run_minimizer(config, solver, args.seed)
    rows = [{"iteration": i, "quotient": q} for i, q in enumerate(res.history)]
    out = _envelope("minimize", threads, args.seed)
    out["configuration"] = configuration_to_dict(config)
    out["grid"] = {"L": grid.L, "h": grid.h, "offset": grid.offset, "n": grid.n}
    out["solver"] = {k: solver[k] for k in ("quotient", "iters", "tol", "initial")}
    out["result"] = {
        "quotient": res.quotient,
        "converged": res.converged,
        "unbounded": res.unbounded,
        "iterations": res.iterations,
        "boundary_magnitude": float(res.diagnostics.get("boundary_magnitude", math.nan)),
        "report": res.report.to_dict(),
    }
    out["history"] = [q for q in res.history]
    if not res.converged:
        reason = "quotient became negative" if res.unbounded else f"no convergence after {res.iterations} iterations"
        raise NotConverged(f"minimize: {reason}", out, rows)
    return out, rows


def cmd_sweep(args, doc: dict | None, threads: int) -> tuple[dict, list[dict]]:
    doc = _need_config(doc, "sweep")
    block = _block(doc, "sweep")
    parameter = block.get("parameter")
    values = block.get("values")
    if parameter not in ("mass", "pole", "mu"):
        raise ValidationError("sweep.parameter must be 'mass', 'pole' or 'mu'")
    if not isinstance(values, list) or not values:
        raise ValidationError("sweep.values must be a non-empty list")
    out = _envelope("sweep", threads, args.seed)
    out["parameter"] = parameter
    if parameter == "mu":
        check_schema(doc)
        params = parse_params(doc)
        p, xi, _ = _profile(doc, params)
        mus = np.asarray(values, dtype=float)
        if np.any(mus <= 0):
            raise ValidationError("mu values must be positive")
        curve = interaction_curve(p, xi, mus, workers=threads)
        rows = [{"mu": m, "interaction": v} for m, v in zip(mus, curve)]
        out["rows"] = rows
        return out, rows

    index = int(block.get("index", 0))
    coordinate = int(block.get("coordinate", 0))
    estimate = block.get("estimate", "none")
    if estimate not in ("none", "mu", "S"):
        raise ValidationError("sweep.estimate must be 'none', 'mu' or 'S'")
    base_masses = list(doc.get("masses", []))
    if not 0 <= index < len(base_masses):
        raise ValidationError(f"sweep.index {index} out of range")
    solver = _solver_settings(doc) if estimate != "none" else None
    rows, unconverged = [], []
    for v in values:
        variant = dict(doc)
        if parameter == "mass":
            variant["masses"] = [float(v) if i == index else m for i, m in enumerate(base_masses)]
        else:
            poles = [list(p) if isinstance(p, list) else [p] for p in doc.get("poles", [])]
            if not 0 <= coordinate < len(poles[index]):
                raise ValidationError(f"sweep.coordinate {coordinate} out of range")
            poles[index][coordinate] = float(v)
            variant["poles"] = poles
        config = _scaled_configuration(variant)
        verdict = classify(config)
        h = hardy_constant(config.params)
        top = config.masses[-1]
        isum = interaction_sum(config, config.k - 1) if 0 < top < h else math.nan
        row = {
            "value": float(v),
            "outcome": verdict.outcome.value,
            "total_mass": config.total_mass,
            "top_mass": top,
            "interaction_sum": isum,
        }
        if solver is not None:
            _, res = _run_minimizer(config, {**solver, "quotient": estimate}, args.seed)
            row["estimate"] = res.quotient
            row["converged"] = res.converged
            if not res.converged:
                unconverged.append(float(v))
        rows.append(row)
    out["index"] = index
    if parameter == "pole":
        out["coordinate"] = coordinate
    out["rows"] = rows
    if unconverged:
        raise NotConverged(f"sweep: estimator did not converge at values {unconverged}", out, rows)
    return out, rows


def cmd_report(args, doc: dict | None, threads: int) -> tuple[dict, list[dict]]:
    if not args.inputs:
        raise ValidationError("report needs at least one input document")
    out = _envelope("report", threads, args.seed)
    documents = []
    for path in args.inputs:
        sub = load_document(path)
        check_schema(sub)
        documents.append({"source": Path(path).name, "command": sub.get("command"), "document": sub})
    out["documents"] = documents
    rows = [{"source": d["source"], "command": d["command"]} for d in documents]
    return out, rows


COMMANDS = {
    "spectral": (cmd_spectral, "Hardy constant, kappa, critical exponent and the alpha table"),
    "classify": (cmd_classify, "apply the existence / non-existence rules to a configuration"),
    "asymptotics": (cmd_asymptotics, "interaction rate of a concentrating profile"),
    "minimize": (cmd_minimize, "grid estimate of the critical or coercivity quotient (N = 1)"),
    "sweep": (cmd_sweep, "vary a mass, a pole coordinate or mu and tabulate"),
    "report": (cmd_report, "bundle earlier JSON reports into one document"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multipolar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON request file")
    common.add_argument("--out", type=Path, help="output path (default: standard output)")
    common.add_argument("--format", choices=("json", "csv"), help="output format")
    common.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized initial guesses")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "spectral":
            p.add_argument("--N", type=int, help="dimension (instead of --config)")
            p.add_argument("--s", type=float, help="fractional order (instead of --config)")
        if name == "classify":
            p.add_argument("--certify", action="store_true", help="run the grid estimator for mu and the certificate search (N = 1)")
        if name == "report":
            p.add_argument("inputs", nargs="+", type=Path, help="JSON reports to bundle")
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _render(document: dict, rows: list[dict] | None, fmt: str) -> str:
    if fmt == "csv":
        return rows_to_csv(rows or [])
    return dumps(document)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    handler = COMMANDS[args.command][0]
    try:
        threads = _threads(args.threads)
        doc = load_document(args.config) if args.config is not None else None
        document, rows = handler(args, doc, threads)
    except RequestError as exc:
        print(f"multipolar: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except NotConverged as exc:
        _emit(_render(exc.document, exc.rows, fmt), args.out)
        print(f"multipolar: warning: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ConvergenceError as exc:
        print(f"multipolar: error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ValidationError, DomainError, DivergenceError) as exc:
        print(f"multipolar: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TypeError, ValueError) as exc:
        # Wrongly typed request values, e.g. a string where a number belongs.
        print(f"multipolar: error: invalid request: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MultipolarError as exc:
        print(f"multipolar: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    _emit(_render(document, rows, fmt), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
