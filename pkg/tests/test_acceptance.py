"""Acceptance suite: one check per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

from __future__ import annotations

import io
import sys
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from tailmarkov import tdf as T
from tailmarkov.cli import main as cli_main
from tailmarkov.copulas import (EVSurvival, LowerFrechet, MarkovProduct, Product, UpperFrechet,
                                copula_from_spec, extract_tail)
from tailmarkov.iterates import classify_limit, is_idempotent, iterates, lambda_p_value
from tailmarkov.numerics import StepFunction
from tailmarkov.product import generalized_product, min_bound, star_product
from tailmarkov.substoch import (adjoint_pairing, apply_operator, check_equivariance,
                                 compose_check, is_markov_operator, majorization_check,
                                 materialize, operator_norms, operator_to_subdistribution)

SEED = 20240607
FIXTURES = Path(__file__).parent / "fixtures"
SIMPLEX21 = np.linspace(0.0, 1.0, 21)
SIMPLEX11 = np.linspace(0.0, 1.0, 11)


def _families():
    return {
        "comonotone": T.comonotone(),
        "independence": T.independence(),
        "plateau": T.plateau(1 / 3),
        "linear_min": T.linear_min(0.5, 1.0),
        "clayton": T.clayton(1.0),
    }


def _random_family(rng):
    k = rng.integers(4)
    if k == 0:
        return T.random_piecewise_linear(rng)
    if k == 1:
        return T.clayton(float(rng.uniform(1.0, 4.0)))
    if k == 2:
        return T.plateau(float(rng.uniform(0.05, 0.5)))
    return T.linear_min(float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.1, 1.0)))


def _pairs(rng, n):
    return [(T.random_piecewise_linear(rng), T.random_piecewise_linear(rng)) for _ in range(n)]


COPULAS = {"C-": LowerFrechet(), "Pi": Product(), "C+": UpperFrechet()}


def criterion_1():
    rng = np.random.default_rng(SEED)
    worst, failures = 0.0, 0
    for a, b in _pairs(rng, 200):
        for C in COPULAS.values():
            res = generalized_product(C, [a, b])
            rep = res.validate()
            failures += not rep.valid
            # homogeneity and 2-increasingness from the evaluator itself
            x, y, s = rng.uniform(0, 2, 20), rng.uniform(0, 2, 20), rng.uniform(0.1, 5, 20)
            hom = np.max(np.abs(res(s * x, s * y) - s * res(x, y))) - 1e-12 * np.max(s)
            vol = -np.min(T.rectangle_volumes(res, rng, 200))
            worst = max(worst, hom, vol, *(v.amount for v in rep.violations))
    return failures == 0 and worst <= 1e-9, f"600 products, worst excess {worst:.2e}"


def criterion_2():
    worst = 0.0
    x, y = SIMPLEX21, 1.0 - SIMPLEX21
    for lam in _families().values():
        unit = star_product(T.comonotone(), lam)
        null = star_product(T.independence(), lam)
        worst = max(worst, np.max(np.abs(unit(x, y) - lam(x, y))), np.max(np.abs(null(x, y))))
    return worst <= 1e-8, f"five families, worst deviation {worst:.2e}"


def criterion_3():
    rng = np.random.default_rng(SEED + 3)
    x, y = SIMPLEX21, 1.0 - SIMPLEX21
    worst = -np.inf
    violations = 0
    for a, b in _pairs(rng, 200):
        bound = min_bound([a, b])(x, y)
        for name in ("C-", "Pi"):
            worst = max(worst, np.max(generalized_product(COPULAS[name], [a, b])(x, y) - bound))
        violations += np.max(generalized_product(COPULAS["C+"], [a, b])(x, y) - bound) > 1e-9
    # left-invertibility of C-: both tails vanish, yet C- * C- = C+ has tail Lambda+
    extracted = extract_tail(MarkovProduct(LowerFrechet(), LowerFrechet()), [1.0, 1.0]).value
    ok = worst <= 1e-10 and violations > 0 and extracted > 1.0 - 1e-3
    return ok, (f"max excess over bound {worst:.2e}; C+ violations {violations}/200; "
                f"tail of C-*C- at (1,1) = {extracted:.4f} > 0")


def criterion_4():
    rng = np.random.default_rng(SEED + 4)
    worst = 0.0
    for _ in range(50):
        a, b = _random_family(rng), _random_family(rng)
        res = star_product(a, b)
        e0 = abs(res.angular_slope(0.0) - a.angular.slope0 * b.angular.slope0)
        e1 = abs(res.angular_slope(1.0, "left") + a.angular.slope1 * b.angular.slope1)
        worst = max(worst, e0, e1)
    return worst <= 1e-4, f"50 pairs, worst slope error {worst:.2e}"


def criterion_5():
    rng = np.random.default_rng(SEED + 5)
    x, y = SIMPLEX21, 1.0 - SIMPLEX21
    worst = 0.0
    for a, b in _pairs(rng, 100):
        exact = generalized_product(Product(), [a, b], method="exact")
        quad = generalized_product(Product(), [a, b], method="quadrature")
        worst = max(worst, np.max(np.abs(exact(x, y) - quad(x, y))))
    return worst <= 1e-8, f"100 pairs, worst gap {worst:.2e}"


def criterion_6():
    x, y = SIMPLEX21, 1.0 - SIMPLEX21
    worst = 0.0
    for p in (0.25, 1 / 3, 0.5):
        for n, res in enumerate(iterates(T.plateau(p), 8), 1):
            worst = max(worst, np.max(np.abs(res(x, y) - lambda_p_value(p, n - 1, x, y))))
    verdict = classify_limit(T.plateau(1 / 3), tol=1e-3)
    half = max(abs(res(0.5, 0.5) - 0.5) for res in iterates(T.plateau(0.5), 8))
    ok = (worst <= 1e-8 and verdict.limit == "independence" and verdict.converged
          and verdict.n_reached <= verdict.n_certified and half <= 1e-9)
    return ok, (f"closed-form gap {worst:.2e}; limit {verdict.limit} at n={verdict.n_reached} "
                f"(certified {verdict.n_certified}); p=1/2 midpoint drift {half:.1e}")


def _idempotent_cases():
    rng = np.random.default_rng(SEED + 7)
    cases = list(_families().items())
    cases += [(f"plateau {p}", T.plateau(p)) for p in (0.1, 0.25, 0.45, 0.5)]
    cases += [(f"clayton {a}", T.clayton(a)) for a in (0.5, 2.0, 4.0)]
    cases += [("linear_min 1,1", T.linear_min(1.0, 1.0)), ("linear_min .3,.8", T.linear_min(0.3, 0.8))]
    cases += [(f"random {k}", T.random_piecewise_linear(rng)) for k in range(5)]
    return cases


def criterion_7():
    t = np.linspace(0.0, 1.0, 1001)
    wrong = []
    for name, lam in _idempotent_cases():
        vals = lam.angular(t)
        trivial = (np.max(np.abs(vals)) <= 1e-12
                   or np.max(np.abs(vals - np.minimum(t, 1.0 - t))) <= 1e-12)
        if is_idempotent(lam, tol=1e-4) != trivial:
            wrong.append(name)
    n = len(_idempotent_cases())
    return not wrong, f"{n} instances, misclassified: {wrong or 'none'}"


def criterion_8():
    clay = extract_tail(copula_from_spec({"family": "clayton", "theta": 1.0}), [1.0, 1.0]).value
    worst = 0.0
    for lam in (T.plateau(1 / 3), T.clayton(2.0), T.linear_min(0.5, 1.0)):
        C = EVSurvival(lam)
        ext = np.array([extract_tail(C, [s, 1.0 - s]).value for s in SIMPLEX11])
        worst = max(worst, np.max(np.abs(ext - lam.angular(SIMPLEX11))))
    ok = abs(clay - 0.5) <= 1e-3 and worst <= 2e-3
    return ok, f"Clayton tail at (1,1) = {clay:.6f}; EV recovery worst {worst:.2e}"


def criterion_9():
    worst = 0.0
    pairs = [(T.clayton(1.0), T.clayton(2.0)), (T.plateau(1 / 3), T.clayton(1.5))]
    for a, b in pairs:
        assert T.is_strict(a).strict and T.is_strict(b).strict
        C = MarkovProduct(EVSurvival(a), EVSurvival(b))
        ext = np.array([extract_tail(C, [s, 1.0 - s]).value for s in SIMPLEX11])
        worst = max(worst, np.max(np.abs(ext - star_product(a, b).angular_values(SIMPLEX11))))
    return worst <= 2e-3, f"{len(pairs)} strict pairs, worst gap {worst:.2e}"


def _kernels():
    return dict(_families(), **{"clayton 2.5": T.clayton(2.5), "capped_min": T.CappedMin(1.0)})


STEPS = [StepFunction([0.0, 0.5, 1.5], [1.0, 0.4]),
         StepFunction([0.2, 0.7, 1.0, 2.6], [0.3, 1.0, 0.6])]


def criterion_10():
    notes = []
    ok = True
    kernels = _kernels()
    xs = np.array([0.3, 0.9, 1.7, 4.0])
    pos = contr = major = 0.0
    rt1 = rt2 = adj = 0.0
    for F in kernels.values():
        for f in STEPS:
            nm = operator_norms(F, f)
            pos = max(pos, -nm.min_value, -float(np.min(materialize(F, f).values, initial=0.0)))
            contr = max(contr, nm.norm1_out - nm.norm1_in * (1 + 1e-10),
                        nm.sup_out - nm.sup_in * (1 + 1e-10))
            major += not majorization_check(F, f)
        K = operator_to_subdistribution(F)
        rt1 = max(rt1, np.max(np.abs(K(xs, xs[::-1]) - F(xs, xs[::-1]))))
        rt2 = max(rt2, np.max(np.abs(apply_operator(K, STEPS[0], xs) - apply_operator(F, STEPS[0], xs))))
        ab = adjoint_pairing(F, STEPS[0], STEPS[1])
        adj = max(adj, ab.defect)
    ok &= pos <= 1e-12 and contr <= 0.0 and major == 0 and rt1 <= 1e-6 and rt2 <= 1e-6 and adj <= 1e-6
    notes.append(f"positivity {pos:.1e}, contraction excess {max(contr, 0):.1e}, "
                 f"majorization failures {int(major)}, round trips {rt1:.1e}/{rt2:.1e}, adjoint {adj:.1e}")

    rng = np.random.default_rng(SEED + 10)
    pool = [T.plateau(1 / 3), T.clayton(1.0), T.linear_min(0.5, 1.0), T.clayton(2.5), T.comonotone()]
    comp, n = 0.0, 0
    while n < 50:
        F = pool[rng.integers(len(pool))] if rng.uniform() < 0.7 else T.random_piecewise_linear(rng)
        G = pool[rng.integers(len(pool))] if rng.uniform() < 0.7 else T.random_piecewise_linear(rng)
        f = STEPS[n % 2]
        x = float(rng.uniform(0.1, 3.0))
        comp = max(comp, compose_check(F, G, f, x).defect)
        n += 1
    ok &= comp < 1e-5
    notes.append(f"composition worst defect {comp:.1e} over 50 cases")

    disagree = [name for name, F in kernels.items() if name != "capped_min"
                and T.is_strict(F).strict != is_markov_operator(F).markov]
    ok &= not disagree
    notes.append(f"strict/Markov disagreements {disagree or 'none'}")

    eq_h = max(check_equivariance(F, f, s, xs) for name, F in kernels.items() if name != "capped_min"
               for f in STEPS for s in (0.5, 2.0, 3.7))
    eq_c = check_equivariance(kernels["capped_min"], STEPS[0], 2.0, xs)
    ok &= eq_h <= 1e-8 and eq_c > 1e-3
    notes.append(f"equivariance homogeneous {eq_h:.1e}, counterexample {eq_c:.2f}")
    return bool(ok), "; ".join(notes)


def _figure(n):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["figure", str(n)])
    return code, buf.getvalue()


def _spot(text, curve, t):
    for line in text.splitlines()[1:]:
        c, tt, v = line.split(",")
        if c == curve and float(tt) == t:
            return float(v)
    raise KeyError((curve, t))


def criterion_11():
    mismatched = []
    texts = {}
    for n in (1, 2, 3, 4):
        code, text = _figure(n)
        texts[n] = (FIXTURES / f"figure{n}.csv").read_text()
        if code != 0 or text != texts[n]:
            mismatched.append(n)
    spots = [(texts[1], "product[Pi]", 1 / 12), (texts[3], "L1*L3", 1 / 6),
             (texts[4], "iterate2", 1 / 3), (texts[4], "iterate3", 7 / 27)]
    audit = max(abs(_spot(text, curve, 0.5) - value) for text, curve, value in spots)
    return not mismatched and audit <= 1e-11, (
        f"byte mismatches: {mismatched or 'none'}; spot audit worst {audit:.1e}")


CRITERIA = {
    1: ("closure of products", criterion_1),
    2: ("unit and null identities", criterion_2),
    3: ("dependence reduction", criterion_3),
    4: ("derivative factorization", criterion_4),
    5: ("exact versus quadrature", criterion_5),
    6: ("plateau iterates", criterion_6),
    7: ("idempotents", criterion_7),
    8: ("tail extraction", criterion_8),
    9: ("commutation", criterion_9),
    10: ("operator suite", criterion_10),
    11: ("figure regression", criterion_11),
}


def _report(number):
    title, check = CRITERIA[number]
    ok, detail = check()
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = _report(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [_report(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
