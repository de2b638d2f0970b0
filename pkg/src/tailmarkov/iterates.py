"""Markov iterates, Cesaro means and the plateau-family closed form."""

from __future__ import annotations

from math import comb
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .product import ProductResult, _operand, star_product
from .tdf import DEFAULT_GRID, PiecewiseLinear, TailDependenceFunction, plateau

MAX_BREAKPOINTS = 10_000
LIMIT_TOL = 1e-3


def _simplex(grid_n):
    return np.linspace(0.0, 1.0, grid_n)


def _wrap(tdf: TailDependenceFunction) -> ProductResult:
    ang = tdf.angular if tdf.angular.is_piecewise_linear else None
    return ProductResult(lambda x, y: tdf(x, y), 2, "exact" if ang is not None else "closed_form",
                         {"operand": tdf}, angular=ang)


def _resample(res: ProductResult, grid: int) -> ProductResult:
    # breakpoint growth guard: fall back to the sampled representation
    if res.exact and res.angular.t.size > MAX_BREAKPOINTS:
        t = np.linspace(0.0, 1.0, grid)
        lam = PiecewiseLinear.from_samples(t, res.angular(t))
        tdf = TailDependenceFunction(lam, check=False)
        return ProductResult(lambda x, y: tdf(x, y), 2, "sampled", res.provenance, angular=lam)
    return res


def iterates(tdf, n: int, grid: int = DEFAULT_GRID) -> list:
    """``[L^{*1}, ..., L^{*n}]`` by left folding the star product."""
    if n < 1:
        raise DomainError("n must be at least 1")
    base = _operand(tdf)
    out = [_wrap(base)]
    for _ in range(n - 1):
        out.append(_resample(star_product(out[-1], base, grid=grid), grid))
    return out


def iterate_n(tdf, n: int, grid: int = DEFAULT_GRID) -> ProductResult:
    """The ``n``-th Markov iterate ``L * ... * L``."""
    return iterates(tdf, n, grid)[-1]


def lambda_p_value(p: float, n: int, w1, w2):
    """``(n+1)``-th iterate of the plateau function at ``(w1, w2)``.

    ``p**n * sum_l binom(n, l) * L_p(q**(n-l) w1, q**l w2)`` with
    ``q = (1 - p) / p``.
    """
    if not 0.0 <= p <= 0.5:
        raise DomainError("p must lie in [0, 1/2]")
    if n < 0:
        raise DomainError("n must be nonnegative")
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if p == 0.0:
        out = np.zeros(np.broadcast(w1, w2).shape)
        return out if out.ndim else float(out)
    base = plateau(p)
    q = (1.0 - p) / p
    total = np.zeros(np.broadcast(w1, w2).shape)
    for ell in range(n + 1):
        total = total + comb(n, ell) * base(q ** (n - ell) * w1, q ** ell * w2)
    out = p ** n * total
    return out if out.ndim else float(out)


def plateau_midpoint_bound(p: float, k: int) -> float:
    """Upper bound for the ``(2k+1)``-th plateau iterate at ``(1/2, 1/2)``."""
    head = sum(comb(2 * k, ell) * (1 - p) ** ell * p ** (2 * k - ell) for ell in range(k + 1))
    return head - comb(2 * k, k) * p ** (k + 1) * (1 - p) ** k


def certified_iterations(p: float, tol: float, k_max: int = 100_000) -> int:
    """Smallest odd ``n = 2k+1`` whose plateau bound falls below ``tol``."""
    if p >= 0.5:
        raise DomainError("no certificate for p = 1/2: the iterates do not decay")
    for k in range(k_max):
        if plateau_midpoint_bound(p, k) < tol:
            return 2 * k + 1
    raise DomainError("certificate search exhausted")


class IterateTrace(NamedTuple):
    n: int
    sup_norm: float
    dist_independence: float
    dist_comonotone: float


def _trace(n, res, t):
    vals = res.angular_values(t) if not res.exact else res.angular(t)
    sup = float(np.max(np.abs(vals)))
    plus = float(np.max(np.abs(vals - np.minimum(t, 1.0 - t))))
    return IterateTrace(n, sup, sup, plus)


def trace_iterates(tdf, n: int, grid_n: int = 21) -> list:
    t = _simplex(grid_n)
    return [_trace(k + 1, r, t) for k, r in enumerate(iterates(tdf, n))]


class CesaroMean:
    """Pointwise average of the first ``n`` iterates."""

    def __init__(self, members):
        self.members = list(members)
        self.n = len(self.members)
        self.arity = 2

    def __call__(self, x, y):
        return sum(m(x, y) for m in self.members) / self.n

    def angular_values(self, t):
        t = np.asarray(t, dtype=float)
        return self(t, 1.0 - t)


def cesaro_mean(tdf, n: int, grid: int = DEFAULT_GRID) -> CesaroMean:
    """Average of ``L^{*1}, ..., L^{*n}``."""
    return CesaroMean(iterates(tdf, n, grid))


class LimitClassification(NamedTuple):
    limit: str
    n_reached: int
    n_certified: int | None
    converged: bool
    trace: list


def classify_limit(tdf, tol: float = LIMIT_TOL, n_max: int = 500,
                   grid: int = DEFAULT_GRID) -> LimitClassification:
    """Decide whether the iterates tend to ``Lambda+`` or to ``Lambda_Pi``.

    ``Lambda+`` is a fixed point.  Any other function lies below the plateau
    ``L_p`` with ``p = max lam < 1/2``, so its iterates lie below those of
    ``L_p``; the binomial bound then certifies in advance how many steps
    bring the sup norm below ``tol``.  The iterates themselves are run
    until their sup norm (the value at the diagonal for symmetric
    functions, the grid maximum otherwise) drops below ``tol``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    base = _operand(tdf)
    lam = base.angular
    t = _simplex(grid)
    if np.max(np.abs(lam(t) - np.minimum(t, 1.0 - t))) <= 1e-12 and lam.max_value() >= 0.5 - 1e-12:
        return LimitClassification("comonotone", 0, 0, True, [])
    p = lam.max_value()
    cert = certified_iterations(p, tol) if p > 0 else 1
    trace = []
    current = _wrap(base)
    for n in range(1, n_max + 1):
        if n > 1:
            current = _resample(star_product(current, base, grid=grid), grid)
        if current.exact:
            sup = current.angular.max_value()
        else:
            sup = float(np.max(current.angular_values(t)))
        trace.append((n, sup))
        if sup < tol:
            return LimitClassification("independence", n, cert, True, trace)
    return LimitClassification("independence", n_max, cert, False, trace)


def is_idempotent(tdf, tol: float = 1e-4, grid_n: int = DEFAULT_GRID) -> bool:
    """Sup distance between ``L`` and ``L * L`` on the simplex grid below ``tol``."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    base = _operand(tdf)
    sq = star_product(base, base)
    t = _simplex(grid_n)
    return bool(np.max(np.abs(sq.angular_values(t) - base.angular(t))) < tol)
