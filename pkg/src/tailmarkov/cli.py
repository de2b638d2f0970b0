"""Command-line front end.

Every subcommand writes rows ``curve,t,value`` (CSV) or the same rows plus a
metadata block (JSON).  Exit codes: 0 success, 2 configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .copulas import copula_from_spec, extract_tail
from .errors import DomainError, NumericError, SpecError, UnsupportedRepresentationError
from .iterates import classify_limit, iterates
from .numerics import LimitSchedule, StepFunction
from .product import generalized_product, star_product
from .substoch import (apply_operator, check_equivariance, is_markov_operator,
                       majorization_check, materialize, operator_norms,
                       operator_to_subdistribution)
from .tdf import CappedMin, clayton, linear_min, plateau, tdf_from_spec

FIGURE_GRID = 101
COPULAS = (("C-", "lower_frechet"), ("Pi", "product"), ("C+", "upper_frechet"))


def _fmt(x) -> str:
    return format(float(x), ".12g")


# spec loading
def _load_json(text: str, field: str):
    """A JSON literal, a path to a JSON file, or a bare family name."""
    path = Path(text)
    if not text.lstrip().startswith(("{", "[", '"')) and path.suffix == ".json":
        try:
            text = path.read_text()
        except OSError as exc:
            raise SpecError(field, f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if text.replace("_", "").replace("-", "").replace("+", "").isalnum():
            return text
        raise SpecError(field, "not valid JSON") from None


def _tdf(text: str):
    spec = _load_json(text, "tdf")
    if isinstance(spec, str):
        spec = {"family": spec}
    return tdf_from_spec(spec)


def _kernel(text: str):
    spec = _load_json(text, "kernel")
    if isinstance(spec, dict) and spec.get("family") == "capped_min":
        cap = spec.get("cap", 1.0)
        if isinstance(cap, bool) or not isinstance(cap, (int, float)) or not cap > 0:
            raise SpecError("cap", "expected a positive number")
        return CappedMin(float(cap))
    if isinstance(spec, str):
        spec = {"family": spec}
    return tdf_from_spec(spec)


def _step(text: str) -> StepFunction:
    spec = _load_json(text, "step")
    if not isinstance(spec, dict):
        raise SpecError("step", "expected an object with breaks and values")
    for key in ("breaks", "values"):
        if not isinstance(spec.get(key), list):
            raise SpecError(key, "expected a list of numbers")
    try:
        return StepFunction(spec["breaks"], spec["values"], float(spec.get("tail", 0.0)))
    except (DomainError, TypeError, ValueError) as exc:
        raise SpecError("breaks", str(exc)) from exc


def _schedule(text: str | None) -> LimitSchedule:
    if text is None:
        return LimitSchedule()
    parts = text.split(",")
    if len(parts) != 3:
        raise SpecError("schedule", "expected s0,ratio,steps")
    try:
        return LimitSchedule(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise SpecError("schedule", str(exc)) from exc


def _simplex(n: int) -> np.ndarray:
    if n < 3:
        raise SpecError("grid", "grid size must be at least 3")
    return np.linspace(0.0, 1.0, n)


# curve builders
def _curve(rows, name, t, values):
    rows.extend((name, float(a), float(b)) for a, b in zip(t, np.asarray(values, dtype=float)))


def _bound_rows(rows, t):
    _curve(rows, "upper_bound", t, np.minimum(t, 1.0 - t))


def product_rows(factors, copula, t, star=False):
    rows = []
    for k, f in enumerate(factors, 1):
        _curve(rows, f"operand{k}", t, f(t, 1.0 - t))
    res = star_product(*factors) if star else generalized_product(copula, factors)
    _curve(rows, "product", t, res.angular_values(t))
    _bound_rows(rows, t)
    return rows, res


def figure_rows(number: int, t):
    rows = []
    if number in (1, 2):
        if number == 1:
            pair = [linear_min(2 / 3, 1.0), linear_min(0.5, 0.25)]
        else:
            pair = [linear_min(0.5, 1.0), clayton(1.0)]
        for k, f in enumerate(pair, 1):
            _curve(rows, f"operand{k}", t, f(t, 1.0 - t))
        for label, family in COPULAS:
            res = generalized_product(copula_from_spec(family), pair)
            _curve(rows, f"product[{label}]", t, res.angular_values(t))
    elif number == 3:
        l1, l2, l3 = linear_min(0.5, 1.0), linear_min(0.25, 0.5), clayton(1.0)
        for name, f in (("L1", l1), ("L2", l2), ("L3", l3)):
            _curve(rows, name, t, f(t, 1.0 - t))
        _curve(rows, "L1*L3", t, star_product(l1, l3).angular_values(t))
        _curve(rows, "L2*L3", t, star_product(l2, l3).angular_values(t))
    elif number == 4:
        runs = iterates(plateau(1 / 3), 5)
        for n in (1, 2, 3, 5):
            _curve(rows, f"iterate{n}", t, runs[n - 1].angular_values(t))
    else:
        raise SpecError("figure", "figure number must be 1, 2, 3 or 4")
    _bound_rows(rows, t)
    return rows


def iterate_rows(tdf, n, t, tol):
    if n < 1:
        raise SpecError("n", "n must be at least 1")
    rows = []
    for k, res in enumerate(iterates(tdf, n), 1):
        _curve(rows, f"iterate{k}", t, res.angular_values(t))
    verdict = classify_limit(tdf, tol=tol)
    summary = {"limit": verdict.limit, "n_reached": verdict.n_reached,
               "n_certified": verdict.n_certified, "converged": verdict.converged}
    return rows, summary


def extract_rows(copula, t, schedule):
    rows = []
    for s in t:
        res = extract_tail(copula, [s, 1.0 - s], schedule)
        rows.append(("tail", float(s), res.value))
        rows.append(("converged", float(s), float(res.converged)))
    return rows


OPERATOR_CHECKS = ("positivity", "norms", "majorization", "markov", "equivariance", "roundtrip")
_POINTS = np.array([0.3, 0.9, 1.7, 4.0])


def operator_report(F, f, checks, tol):
    """Pass flag and defect for each requested check."""
    report = {}
    for name in checks:
        if name == "positivity":
            defect = max(0.0, -float(np.min(materialize(F, f).values, initial=0.0)))
            report[name] = (defect <= tol, defect)
        elif name == "norms":
            nm = operator_norms(F, f)
            excess = max(nm.norm1_out - nm.norm1_in, nm.sup_out - nm.sup_in, 0.0)
            report[name] = (excess <= 1e-10, excess)
        elif name == "majorization":
            ok = majorization_check(F, f)
            report[name] = (ok, 0.0 if ok else 1.0)
        elif name == "markov":
            mk = is_markov_operator(F)
            defect = max(mk.constant_defect, mk.mass_defect,
                         mk.transpose_constant_defect, mk.transpose_mass_defect)
            report[name] = (mk.markov, defect)
        elif name == "equivariance":
            defect = check_equivariance(F, f, 2.0, _POINTS)
            ok = defect <= 1e-8 if getattr(F, "homogeneous", False) else True
            report[name] = (ok, defect)
        elif name == "roundtrip":
            K = operator_to_subdistribution(F)
            x, y = _POINTS, _POINTS[::-1]
            values = float(np.max(np.abs(K(x, y) - F(x, y))))
            action = float(np.max(np.abs(apply_operator(K, f, x) - apply_operator(F, f, x))))
            defect = max(values, action)
            report[name] = (defect <= 1e-6, defect)
        else:
            raise SpecError("checks", f"unknown check {name!r}")
    return report


# output
def _write(rows, fmt, out, meta):
    if fmt == "csv":
        lines = ["curve,t,value"] + [f"{c},{_fmt(t)},{_fmt(v)}" for c, t, v in rows]
        text = "\n".join(lines) + "\n"
    else:
        body = {"metadata": meta,
                "rows": [{"curve": c, "t": float(_fmt(t)), "value": float(_fmt(v))} for c, t, v in rows]}
        text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=FIGURE_GRID, help="number of simplex points")
    common.add_argument("--tol", type=float, default=1e-3, help="tolerance for limits and checks")
    common.add_argument("--schedule", help="scale sweep s0,ratio,steps for tail extraction")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised checks")

    parser = argparse.ArgumentParser(prog="tailmarkov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("product", parents=[common], help="generalized Markov product of TDFs")
    p.add_argument("--spec", action="append", required=True,
                   help="TDF spec (JSON, .json path or family name); repeat per factor")
    p.add_argument("--copula", default="product", help="inducing copula spec or name (C-, Pi, C+)")
    p.add_argument("--star", action="store_true", help="star product of the two factors")

    p = sub.add_parser("iterate", parents=[common], help="Markov iterates and the limit verdict")
    p.add_argument("--spec", required=True)
    p.add_argument("-n", type=int, default=5)

    p = sub.add_parser("extract-tail", parents=[common], help="tail dependence of a copula")
    p.add_argument("--copula", required=True)

    p = sub.add_parser("operator", parents=[common], help="operator checks for a kernel")
    p.add_argument("--kernel", required=True, help='TDF spec or {"family":"capped_min","cap":c}')
    p.add_argument("--step", default='{"breaks":[0,0.5,1.5],"values":[1,0.4]}',
                   help="step function spec with breaks, values and optional tail")
    p.add_argument("--checks", default=",".join(OPERATOR_CHECKS))

    p = sub.add_parser("figure", parents=[common], help="data for one of the four canonical figures")
    p.add_argument("number", type=int)
    return parser


def run(args) -> dict:
    if not args.tol > 0:
        raise SpecError("tol", "tolerance must be positive")
    t = _simplex(args.grid)
    meta = {"command": args.command, "grid": args.grid, "tol": args.tol,
            "seed": args.seed, "version": __version__}
    if args.command == "product":
        factors = [_tdf(s) for s in args.spec]
        if len(factors) < 2:
            raise SpecError("spec", "need at least two factors")
        if args.star and len(factors) != 2:
            raise SpecError("star", "the star product takes exactly two factors")
        copula = copula_from_spec(_load_json(args.copula, "copula"))
        if len(factors) != 2:
            copula = copula_from_spec({"family": _copula_name(copula), "dim": len(factors)})
        rows, res = product_rows(factors, copula, t, star=args.star)
        meta.update(specs=[f.to_spec() for f in factors], copula=args.copula,
                    star=args.star, method=res.method)
    elif args.command == "iterate":
        tdf = _tdf(args.spec)
        rows, summary = iterate_rows(tdf, args.n, t, args.tol)
        meta.update(spec=tdf.to_spec(), n=args.n, classification=summary)
        sys.stderr.write(f"limit={summary['limit']} n_reached={summary['n_reached']} "
                         f"n_certified={summary['n_certified']}\n")
    elif args.command == "extract-tail":
        schedule = _schedule(args.schedule)
        copula = copula_from_spec(_load_json(args.copula, "copula"))
        rows = extract_rows(copula, t, schedule)
        meta.update(copula=args.copula, schedule=[schedule.s0, schedule.ratio, schedule.max_steps])
    elif args.command == "operator":
        F, f = _kernel(args.kernel), _step(args.step)
        checks = [c.strip() for c in args.checks.split(",") if c.strip()]
        report = operator_report(F, f, checks, 1e-12)
        rows = []
        for name in checks:
            ok, defect = report[name]
            rows.append((f"{name}.passed", 0.0, float(ok)))
            rows.append((f"{name}.defect", 0.0, defect))
        meta.update(kernel=args.kernel, step=args.step,
                    report={k: {"passed": bool(v[0]), "defect": float(_fmt(v[1]))} for k, v in report.items()})
    else:
        rows = figure_rows(args.number, t)
        meta.update(figure=args.number)
    _write(rows, args.format, args.out, {"config": meta, "version": __version__})
    return meta


def _copula_name(C):
    return {"LowerFrechet": "lower_frechet", "Product": "product",
            "UpperFrechet": "upper_frechet"}.get(type(C).__name__, "product")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except SpecError as exc:
        sys.stderr.write(f"error: invalid spec, field {exc}\n")
        return 2
    except (DomainError, UnsupportedRepresentationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericError as exc:
        sys.stderr.write(f"error: numerical procedure did not converge: {exc}\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
