"""Copula families, partial derivatives, tail extraction and the Markov product.

Every copula is a vectorised callable ``C(u1, ..., ud)``.  Bivariate
copulas also expose the right partial derivatives ``d1`` and ``d2`` and,
where a closed form exists, the density.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, SpecError
from .numerics import (LimitResult, LimitSchedule, QuadratureConfig, extrapolate_limit,
                       integrate, integrate_halfline, one_sided_derivative)
from .tdf import Clayton as ClaytonAngular
from .tdf import TailDependenceFunction, as_angular, tdf_from_spec

# product integrals are probed near the corner, so accuracy must be relative
PRODUCT_QUADRATURE = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-10, max_subdivisions=20000)


def _cube(*u):
    arrs = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in u])
    for a in arrs:
        if np.any(a < 0) or np.any(a > 1) or np.any(np.isnan(a)):
            raise DomainError("copula arguments must lie in [0, 1]")
    return arrs


def _out(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim else float(x)


class Copula:
    """Base class; subclasses set ``arity`` and implement ``_eval``."""

    arity = 2
    family = "abstract"

    def __call__(self, *u):
        if len(u) != self.arity:
            raise DomainError(f"{self.family} copula takes {self.arity} arguments, got {len(u)}")
        return _out(self._eval(*_cube(*u)))

    def _eval(self, *u):
        raise NotImplementedError

    def d1(self, u, v):
        """Right partial derivative in the first argument."""
        self._bivariate()
        u, v = _cube(u, v)
        return _out(self._d1(u, v))

    def d2(self, u, v):
        """Right partial derivative in the second argument."""
        self._bivariate()
        u, v = _cube(u, v)
        return _out(self._d2(u, v))

    def _d1(self, u, v):
        return _fd_partial(self, u, v, 0)

    def _d2(self, u, v):
        return _fd_partial(self, u, v, 1)

    def density(self, u, v):
        """Mixed second derivative, or None when no closed form is known."""
        return None

    def transpose(self) -> "Copula":
        self._bivariate()
        return Transposed(self)

    def _bivariate(self):
        if self.arity != 2:
            raise DomainError(f"operation needs a bivariate copula, got arity {self.arity}")

    def to_spec(self) -> dict:
        return {"family": self.family}


def _fd_partial(C, u, v, index):
    # one-sided difference quotients; right-sided except at the upper boundary
    out = np.empty(np.broadcast(u, v).shape)
    for k, (a, b) in enumerate(zip(np.ravel(u), np.ravel(v))):
        x = (a, b)[index]
        side = "right" if x < 1.0 else "left"
        h0 = min(1e-2, max(x, 1.0 - x) / 4)

        def f(z, a=a, b=b):
            return C(z, b) if index == 0 else C(a, z)

        out.flat[k] = one_sided_derivative(f, x, side, h0=h0).value
    return out


class LowerFrechet(Copula):
    family = "lower_frechet"

    def __init__(self, dim=2):
        if dim != 2:
            raise DomainError("the lower Frechet bound is a copula only for d = 2")

    def _eval(self, u, v):
        return np.maximum(u + v - 1.0, 0.0)

    def _d1(self, u, v):
        return (u + v >= 1.0).astype(float)

    def _d2(self, u, v):
        return (u + v >= 1.0).astype(float)

    def transpose(self):
        return self


class Product(Copula):
    family = "product"

    def __init__(self, dim=2):
        if dim < 2:
            raise DomainError("copula dimension must be at least 2")
        self.arity = int(dim)

    def _eval(self, *u):
        return np.prod(np.stack(np.broadcast_arrays(*u)), axis=0)

    def _d1(self, u, v):
        return v + 0.0 * u

    def _d2(self, u, v):
        return u + 0.0 * v

    def density(self, u, v):
        return np.ones(np.broadcast(u, v).shape)

    def transpose(self):
        return self

    def to_spec(self):
        return {"family": self.family, "dim": self.arity}


class UpperFrechet(Copula):
    family = "upper_frechet"

    def __init__(self, dim=2):
        if dim < 2:
            raise DomainError("copula dimension must be at least 2")
        self.arity = int(dim)

    def _eval(self, *u):
        return np.min(np.stack(np.broadcast_arrays(*u)), axis=0)

    def _d1(self, u, v):
        return (u < v).astype(float)

    def _d2(self, u, v):
        return (v < u).astype(float)

    def transpose(self):
        return self

    def to_spec(self):
        return {"family": self.family, "dim": self.arity}


class Clayton(Copula):
    """``(sum u_i**-theta - d + 1)**(-1/theta)``."""

    family = "clayton"

    def __init__(self, theta, dim=2):
        theta = float(theta)
        if not theta > 0 or math.isinf(theta):
            raise DomainError(f"clayton theta must be positive and finite, got {theta}")
        if dim < 2:
            raise DomainError("copula dimension must be at least 2")
        self.theta = theta
        self.arity = int(dim)

    def _eval(self, *u):
        th = self.theta
        u = np.stack(np.broadcast_arrays(*u))
        zero = np.any(u <= 0.0, axis=0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            # sum of expm1 keeps precision when every u_i is close to 1
            s = np.sum(np.expm1(-th * np.log(np.where(u > 0, u, 1.0))), axis=0)
            out = (1.0 + s) ** (-1.0 / th)
        return np.where(zero, 0.0, out)

    def _d1(self, u, v):
        th = self.theta
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            base = 1.0 + (u / v) ** th - u ** th
            out = base ** (-(1.0 + th) / th)
        out = np.where(v <= 0.0, 0.0, out)
        return np.where((u <= 0.0) & (v > 0.0), 1.0, out)

    def _d2(self, u, v):
        return self._d1(v, u)

    def density(self, u, v):
        u, v = _cube(u, v)
        th = self.theta
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = ((1.0 + th) * (u * v) ** (-th - 1.0)
                   * (u ** -th + v ** -th - 1.0) ** (-1.0 / th - 2.0))
        return np.where((u > 0) & (v > 0), out, 0.0)

    def transpose(self):
        return self

    def to_spec(self):
        return {"family": self.family, "theta": self.theta}


class EVSurvival(Copula):
    """Survival copula of the extreme-value copula with tail function ``Lambda``.

    Its lower tail dependence function is ``Lambda`` itself.
    """

    family = "ev_survival"

    def __init__(self, tdf):
        if not isinstance(tdf, TailDependenceFunction):
            tdf = TailDependenceFunction(as_angular(tdf))
        self.tdf = tdf

    def _exponent(self, u, v):
        with np.errstate(divide="ignore"):
            x = -np.log1p(-u)
            y = -np.log1p(-v)
        return x, y

    def _eval(self, u, v):
        x, y = self._exponent(u, v)
        finite = np.isfinite(x) & np.isfinite(y)
        xs, ys = np.where(finite, x, 0.0), np.where(finite, y, 0.0)
        e = -xs - ys + self.tdf(xs, ys)
        out = u + v + np.expm1(e)
        # u = 1 or v = 1: the extreme-value copula vanishes
        out = np.where(finite, out, u + v - 1.0)
        return np.clip(out, 0.0, np.minimum(u, v))

    def _partial(self, u, v, d):
        x, y = self._exponent(u, v)
        finite = np.isfinite(x) & np.isfinite(y)
        xs, ys = np.where(finite, x, 1.0), np.where(finite, y, 1.0)
        ev = np.exp(-xs - ys + self.tdf(xs, ys))
        safe = np.where((xs + ys) > 0, 1, 0)
        px = np.where(safe, d(np.where(safe, xs, 1.0), np.where(safe, ys, 1.0)), 0.0)
        # d/du of the extreme-value part at (1-u, 1-v), with exp(x) = 1/(1-u)
        out = 1.0 - ev * np.exp(xs) * (1.0 - px)
        return np.where(finite, np.clip(out, 0.0, 1.0), np.where(np.isinf(x), 1.0, 0.0))

    def _d1(self, u, v):
        small = (u <= 0.0) & (v <= 0.0)
        out = self._partial(u, v, self.tdf.d1)
        return np.where(small, self.tdf.angular.slope0, out)

    def _d2(self, u, v):
        small = (u <= 0.0) & (v <= 0.0)
        out = self._partial(v, u, lambda a, b: self.tdf.d2(b, a))
        return np.where(small, -self.tdf.angular.slope1, out)

    def density(self, u, v):
        lam = self.tdf.angular
        if not isinstance(lam, ClaytonAngular):
            return None
        u, v = _cube(u, v)
        a = lam.alpha
        x = -np.log1p(-u)
        y = -np.log1p(-v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            big = self.tdf(x, y)
            s = x ** -a + y ** -a
            d12 = (1.0 + a) * (x * y) ** (-a - 1.0) * s ** (-1.0 / a - 2.0)
            ev = np.exp(-x - y + big)
            out = ev * np.exp(x + y) * ((1.0 - self.tdf.d1(x, y)) * (1.0 - self.tdf.d2(x, y)) + d12)
        return np.where(np.isfinite(out), out, 0.0)

    def transpose(self):
        return EVSurvival(self.tdf.transpose())

    def to_spec(self):
        return {"family": self.family, "tdf": self.tdf.to_spec()}


class Transposed(Copula):
    family = "transposed"

    def __init__(self, base: Copula):
        base._bivariate()
        self.base = base

    def _eval(self, u, v):
        return self.base._eval(v, u)

    def _d1(self, u, v):
        return self.base._d2(v, u)

    def _d2(self, u, v):
        return self.base._d1(v, u)

    def density(self, u, v):
        d = self.base.density(v, u)
        return d

    def transpose(self):
        return self.base

    def to_spec(self):
        return {"family": "transposed", "base": self.base.to_spec()}


class Permuted(Copula):
    """``C^pi(u) = C(u_pi(1), ..., u_pi(d))``."""

    family = "permuted"

    def __init__(self, base: Copula, perm: Sequence[int]):
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(base.arity)):
            raise DomainError("perm must be a permutation of the coordinates")
        self.base = base
        self.perm = perm
        self.arity = base.arity

    def _eval(self, *u):
        return self.base._eval(*[u[p] for p in self.perm])


def _product_points(u, v):
    pts = {u, v, 1.0 - u, 1.0 - v}
    m = min(u, v)
    if m > 0:
        pts.update(m * 2.0 ** np.arange(-8, 7))
    return sorted(p for p in pts if 0.0 < p < 1.0)


class MarkovProduct(Copula):
    """Lazily evaluated product ``int_0^1 d2 C1(u, t) d1 C2(t, v) dt``."""

    family = "markov_product"

    def __init__(self, left: Copula, right: Copula, cfg: QuadratureConfig = PRODUCT_QUADRATURE):
        left._bivariate()
        right._bivariate()
        self.left = left
        self.right = right
        self.cfg = cfg

    def _integral(self, u, v, lf, rf):
        out = np.empty(np.broadcast(u, v).shape)
        for k, (a, b) in enumerate(zip(*[np.ravel(x) for x in np.broadcast_arrays(u, v)])):
            if (a <= 0.0 or b <= 0.0) and lf is None and rf is None:
                out.flat[k] = 0.0
                continue

            def g(t, a=a, b=b):
                left = lf(a, t) if lf is not None else self.left._d2(np.full_like(t, a), t)
                right = rf(t, b) if rf is not None else self.right._d1(t, np.full_like(t, b))
                return left * right

            out.flat[k] = integrate(g, 0.0, 1.0, self.cfg, _product_points(a, b)).value
        return out

    def _eval(self, u, v):
        return self._integral(u, v, None, None)

    def _d1(self, u, v):
        if self.left.density(0.5, 0.5) is None:
            return super()._d1(u, v)
        return self._integral(u, v, lambda a, t: self.left.density(np.full_like(t, a), t), None)

    def _d2(self, u, v):
        if self.right.density(0.5, 0.5) is None:
            return super()._d2(u, v)
        return self._integral(u, v, None, lambda t, b: self.right.density(t, np.full_like(t, b)))

    def to_spec(self):
        return {"family": self.family, "left": self.left.to_spec(), "right": self.right.to_spec()}


class Lifted(Copula):
    """``(u0, v) -> int_0^u0 C(d1 C_1(t, v_1), ..., d1 C_d(t, v_d)) dt``.

    At ``u0 = 1`` this is the generalized Markov product induced by ``C``.
    """

    family = "lifted"

    def __init__(self, base: Copula, factors: Sequence[Copula],
                 cfg: QuadratureConfig = PRODUCT_QUADRATURE):
        if len(factors) != base.arity:
            raise DomainError(f"base copula has arity {base.arity} but {len(factors)} factors given")
        for f in factors:
            f._bivariate()
        self.base = base
        self.factors = list(factors)
        self.arity = base.arity + 1
        self.cfg = cfg

    def _eval(self, u0, *v):
        arrs = np.broadcast_arrays(u0, *v)
        out = np.empty(arrs[0].shape)
        for k in range(out.size):
            top = float(arrs[0].flat[k])
            vk = [float(a.flat[k]) for a in arrs[1:]]
            if top <= 0.0:
                out.flat[k] = 0.0
                continue

            def g(t, vk=vk):
                parts = [f._d1(t, np.full_like(t, b)) for f, b in zip(self.factors, vk)]
                return self.base._eval(*parts)

            pts = sorted({p for b in vk for p in _product_points(b, b) if p < top})
            out.flat[k] = integrate(g, 0.0, top, self.cfg, pts).value
        return out


def markov_product_copulas(left: Copula, right: Copula) -> MarkovProduct:
    """Copula-level Markov product ``left * right``."""
    return MarkovProduct(left, right)


def lift_copulas(base: Copula, factors: Sequence[Copula], u0: float, v: Sequence[float]) -> float:
    """Evaluate the ``base``-lifting of ``factors`` at ``(u0, v)``."""
    return float(Lifted(base, factors)(u0, *v))


def eval_copula(C: Copula, u: Sequence[float]) -> float:
    return float(C(*u))


def partial_1(C: Copula, u: float, v: float) -> float:
    return float(C.d1(u, v))


def extract_tail(C: Copula, w: Sequence[float], schedule: LimitSchedule = LimitSchedule()) -> LimitResult:
    """Sweep ``C(s w) / s`` along the schedule.

    The start scale is lowered when needed so that ``s w`` stays in the cube.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise DomainError("tail extraction needs a nonnegative direction")
    if len(w) != C.arity:
        raise DomainError(f"direction has {len(w)} coordinates, copula arity is {C.arity}")
    top = float(np.max(w)) if w.size else 0.0
    if top > 0 and schedule.s0 * top > 1.0:
        schedule = LimitSchedule(1.0 / top, schedule.ratio, schedule.max_steps, schedule.stall_tol)
    return extrapolate_limit(lambda s: C(*(s * w)) / s, schedule)


class SobolevReport(NamedTuple):
    defects: list
    decreasing: bool


def sobolev_diagnostic(C: Copula, tdf, w: float, schedule: LimitSchedule = LimitSchedule(max_steps=8),
                       cfg: QuadratureConfig = QuadratureConfig(abs_tol=1e-9)) -> SobolevReport:
    """Truncated L1 distance between rescaled copula and tail derivatives.

    For each scale ``s`` computes
    ``int_0^inf |d1 C(s t, s w) 1_[0, 1/s](t) - d1 Lambda(t, w)| dt``.
    """
    w = float(w)
    if not 0 < w:
        raise DomainError("w must be positive")
    defects = []
    for s in schedule.scales():
        if s * w > 1.0:
            continue

        def g(t, s=s):
            inside = t <= 1.0 / s
            tc = np.where(inside, s * t, 0.0)
            dc = np.where(inside, C.d1(tc, np.full_like(t, s * w)), 0.0)
            return np.abs(dc - tdf.d1(t, np.full_like(t, w)))

        defects.append((float(s), integrate_halfline(g, cfg, [w, 1.0 / s]).value))
    vals = [d for _, d in defects]
    dec = all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    return SobolevReport(defects, dec)


class CopulaCheck(NamedTuple):
    margin_defect: float
    ground_defect: float
    min_volume: float


def check_copula(C: Copula, rng: np.random.Generator, n_rect: int = 200) -> CopulaCheck:
    """Sampled margin, groundedness and 2-increasing checks for a bivariate copula."""
    C._bivariate()
    u = np.linspace(0.0, 1.0, 11)
    ones = np.ones_like(u)
    margin = max(np.max(np.abs(C(u, ones) - u)), np.max(np.abs(C(ones, u) - u)))
    zeros = np.zeros_like(u)
    ground = max(np.max(np.abs(C(u, zeros))), np.max(np.abs(C(zeros, u))))
    x = np.sort(rng.uniform(0, 1, (n_rect, 2)), axis=1)
    y = np.sort(rng.uniform(0, 1, (n_rect, 2)), axis=1)
    vol = (C(x[:, 1], y[:, 1]) - C(x[:, 0], y[:, 1]) - C(x[:, 1], y[:, 0]) + C(x[:, 0], y[:, 0]))
    return CopulaCheck(float(margin), float(ground), float(np.min(vol)))


_ALIASES = {
    "lower_frechet": "lower_frechet", "countermonotone": "lower_frechet", "C-": "lower_frechet",
    "product": "product", "independence": "product", "Pi": "product",
    "upper_frechet": "upper_frechet", "comonotone": "upper_frechet", "C+": "upper_frechet",
}


def copula_from_spec(spec) -> Copula:
    """Build a copula from its JSON spec; a bare string names an extreme copula."""
    if isinstance(spec, str):
        spec = {"family": spec}
    if not isinstance(spec, dict):
        raise SpecError("copula", "spec must be a JSON object or a family name")
    family = spec.get("family")
    dim = spec.get("dim", 2)
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise SpecError("dim", "expected an integer")
    try:
        name = _ALIASES.get(family, family)
        if name == "lower_frechet":
            return LowerFrechet(dim)
        if name == "product":
            return Product(dim)
        if name == "upper_frechet":
            return UpperFrechet(dim)
        if name == "clayton":
            theta = spec.get("theta")
            if isinstance(theta, bool) or not isinstance(theta, (int, float)):
                raise SpecError("theta", "expected a number")
            return Clayton(theta, dim)
        if name == "ev_survival":
            if "tdf" not in spec:
                raise SpecError("tdf", "missing")
            return EVSurvival(tdf_from_spec(spec["tdf"]))
        if name == "markov_product":
            for key in ("left", "right"):
                if key not in spec:
                    raise SpecError(key, "missing")
            return MarkovProduct(copula_from_spec(spec["left"]), copula_from_spec(spec["right"]))
    except DomainError as exc:
        field = "theta" if family == "clayton" else "dim"
        raise SpecError(field, str(exc)) from exc
    raise SpecError("family", f"unknown copula family {family!r}")
