"""Tail dependence functions and subdistribution functions.

A bivariate tail dependence function is stored through its angular
restriction ``lam(t) = Lambda(t, 1 - t)`` and recovered by homogeneity,
``Lambda(x, y) = (x + y) * lam(x / (x + y))``.

Derivative convention: every partial derivative is a right-derivative in
its own argument.  Raising ``x`` moves the angle ``s = x / (x + y)`` to the
right and raising ``y`` moves it to the left, so ``d1`` reads the right
slope of ``lam`` and ``d2`` the left slope.  Where the needed one-sided
slope does not exist (``s = 1`` for ``d1``, ``s = 0`` for ``d2``) the other
one is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, SpecError, UnsupportedRepresentationError
from .numerics import one_sided_derivative

STRUCTURAL_TOL = 1e-9
SAMPLED_TOL = 1e-6
DEFAULT_GRID = 513


def _as_float(x):
    return np.asarray(x, dtype=float)


class AngularFunction:
    """Base class for angular functions on ``[0, 1]``.

    Subclasses provide ``__call__`` and ``slope``; the angular forms of the
    two partial derivatives default to the tangent-line intercepts.
    """

    kind = "abstract"
    is_piecewise_linear = False

    def __call__(self, t):
        raise NotImplementedError

    def slope(self, t, side="right"):
        """One-sided derivative of ``lam`` at ``t``."""
        raise NotImplementedError

    def d1(self, s):
        """``d1 Lambda`` at angle ``s``: ``lam(s) + (1 - s) lam'(s+)``."""
        s = _as_float(s)
        side = np.where(s >= 1.0, 0, 1)
        right = self.slope(s, "right")
        left = self.slope(s, "left")
        # partials of a tail dependence function lie in [0, 1]; difference quotients may not
        return np.clip(self(s) + (1.0 - s) * np.where(side == 1, right, left), 0.0, 1.0)

    def d2(self, s):
        """``d2 Lambda`` at angle ``s``: ``lam(s) - s lam'(s-)``."""
        s = _as_float(s)
        right = self.slope(s, "right")
        left = self.slope(s, "left")
        return np.clip(self(s) - s * np.where(s <= 0.0, right, left), 0.0, 1.0)

    def transpose(self) -> "AngularFunction":
        raise NotImplementedError

    @property
    def slope0(self) -> float:
        return float(self.slope(0.0, "right"))

    @property
    def slope1(self) -> float:
        return float(self.slope(1.0, "left"))

    def max_value(self) -> float:
        grid = np.linspace(0.0, 1.0, 4097)
        return float(np.max(self(grid)))

    def to_spec(self) -> dict:
        raise UnsupportedRepresentationError(f"{self.kind} has no spec form")

    def sample(self, n: int = DEFAULT_GRID) -> "PiecewiseLinear":
        """Concave re-projection of ``n`` uniform samples."""
        t = np.linspace(0.0, 1.0, n)
        return PiecewiseLinear.from_samples(t, self(t))


class PiecewiseLinear(AngularFunction):
    """Continuous piecewise-linear angular function.

    Parameters
    ----------
    t : array_like
        Strictly increasing breakpoints with ``t[0] = 0`` and ``t[-1] = 1``.
    v : array_like
        Values at the breakpoints.
    kind : str
        Family tag carried into specs and reports.

    Only the shape of the breakpoint table is checked here; the tail
    dependence invariants are left to ``validate``.
    """

    is_piecewise_linear = True

    def __init__(self, t, v, kind="piecewise_linear", params=None, prune=True):
        t = _as_float(t).ravel()
        v = _as_float(v).ravel()
        if t.size < 2 or t.size != v.size:
            raise DomainError("need matching breakpoint and value arrays of length >= 2")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DomainError("breakpoints and values must be finite")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise DomainError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(t) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        if prune:
            t, v = _prune_collinear(t, v)
        t.setflags(write=False)
        v.setflags(write=False)
        self.t = t
        self.v = v
        self.kind = kind
        self.params = dict(params or {})
        self.slopes = np.diff(v) / np.diff(t)
        # tangent intercepts at t = 1 and t = 0 give the piecewise constant derivatives
        self.h1 = _snap(v[:-1] + self.slopes * (1.0 - t[:-1]))
        self.h2 = _snap(v[:-1] - self.slopes * t[:-1])

    # factories
    @classmethod
    def comonotone(cls):
        return cls([0.0, 0.5, 1.0], [0.0, 0.5, 0.0], kind="comonotone")

    @classmethod
    def independence(cls):
        return cls([0.0, 1.0], [0.0, 0.0], kind="independence")

    @classmethod
    def plateau(cls, p):
        """``min(t, p, 1 - t)``."""
        p = float(p)
        if not 0.0 <= p <= 0.5:
            raise DomainError(f"plateau level p must lie in [0, 1/2], got {p}")
        if p == 0.0:
            return cls([0.0, 1.0], [0.0, 0.0], kind="plateau", params={"p": p})
        if p == 0.5:
            return cls([0.0, 0.5, 1.0], [0.0, 0.5, 0.0], kind="plateau", params={"p": p})
        return cls([0.0, p, 1.0 - p, 1.0], [0.0, p, p, 0.0], kind="plateau", params={"p": p})

    @classmethod
    def linear_min(cls, alpha, beta):
        """Angular form of ``min(alpha * w1, beta * w2)``."""
        a, b = float(alpha), float(beta)
        if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
            raise DomainError("linear_min coefficients must lie in [0, 1]")
        params = {"alpha": a, "beta": b}
        if a == 0.0 or b == 0.0:
            return cls([0.0, 1.0], [0.0, 0.0], kind="linear_min", params=params)
        k = b / (a + b)
        return cls([0.0, k, 1.0], [0.0, a * k, 0.0], kind="linear_min", params=params)

    @classmethod
    def from_samples(cls, t, v):
        """Least concave majorant of ``v`` clipped by ``min(t, 1 - t)``."""
        t = _as_float(t)
        v = np.clip(_as_float(v), 0.0, np.minimum(t, 1.0 - t))
        ht, hv = concave_majorant(t, v)
        return cls(ht, hv, kind="sampled")

    def __call__(self, t):
        return np.interp(t, self.t, self.v)

    def _piece(self, s, side):
        s = _as_float(s)
        k = np.searchsorted(self.t, s, side="right" if side == "right" else "left") - 1
        return np.clip(k, 0, self.t.size - 2)

    def slope(self, t, side="right"):
        return self.slopes[self._piece(t, side)]

    def d1(self, s):
        return self.h1[self._piece(s, "right")]

    def d2(self, s):
        return self.h2[self._piece(s, "left")]

    def transpose(self):
        params = dict(self.params)
        if self.kind == "linear_min":
            params = {"alpha": params["beta"], "beta": params["alpha"]}
        return PiecewiseLinear(1.0 - self.t[::-1], self.v[::-1], kind=self.kind, params=params)

    @property
    def kinks(self) -> np.ndarray:
        return self.t[1:-1]

    def max_value(self):
        return float(self.v.max())

    def to_spec(self):
        if self.kind in ("comonotone", "independence"):
            return {"family": self.kind}
        if self.kind in ("plateau", "linear_min"):
            return {"family": self.kind, **self.params}
        return {"family": "piecewise_linear", "t": self.t.tolist(), "v": self.v.tolist()}

    def __repr__(self):
        return f"PiecewiseLinear(t={self.t.tolist()}, v={self.v.tolist()}, kind={self.kind!r})"


def _snap(h, tol=1e-12):
    # roundoff in the intercepts can leave derivative heights a hair outside [0, 1]
    h = np.where((h < 0.0) & (h > -tol), 0.0, h)
    return np.where((h > 1.0) & (h < 1.0 + tol), 1.0, h)


def _prune_collinear(t, v, tol=1e-14):
    keep = [0]
    for i in range(1, t.size - 1):
        j = keep[-1]
        s_left = (v[i] - v[j]) / (t[i] - t[j])
        s_right = (v[i + 1] - v[i]) / (t[i + 1] - t[i])
        if abs(s_left - s_right) > tol * max(1.0, abs(s_left), abs(s_right)):
            keep.append(i)
    keep.append(t.size - 1)
    return t[keep].copy(), v[keep].copy()


def concave_majorant(t, v):
    """Vertices of the least concave majorant of the points ``(t_i, v_i)``."""
    t = _as_float(t)
    v = _as_float(v)
    hull = []
    for p in zip(t.tolist(), v.tolist()):
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            # drop the middle point when it lies on or below the chord
            if (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    arr = np.array(hull)
    return arr[:, 0], arr[:, 1]


class Clayton(AngularFunction):
    """Angular form of ``(w1**-alpha + w2**-alpha)**(-1/alpha)``."""

    kind = "clayton"

    def __init__(self, alpha):
        alpha = float(alpha)
        if not alpha > 0 or math.isinf(alpha):
            raise DomainError(f"clayton alpha must lie in (0, inf), got {alpha}")
        self.alpha = alpha
        self.params = {"alpha": alpha}

    def __call__(self, t):
        t = _as_float(t)
        a = self.alpha
        lo = np.minimum(t, 1.0 - t)
        hi = np.maximum(t, 1.0 - t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = lo * (1.0 + (lo / hi) ** a) ** (-1.0 / a)
        return np.where(lo <= 0.0, 0.0, out)

    def _partial(self, r):
        # d1 Lambda as a function of r = x / y
        a = self.alpha
        with np.errstate(over="ignore", divide="ignore"):
            return (1.0 + r ** a) ** (-(1.0 + a) / a)

    def d1(self, s):
        s = _as_float(s)
        with np.errstate(divide="ignore"):
            return np.where(s >= 1.0, 0.0, self._partial(s / (1.0 - s)))

    def d2(self, s):
        s = _as_float(s)
        with np.errstate(divide="ignore"):
            return np.where(s <= 0.0, 0.0, self._partial((1.0 - s) / s))

    def slope(self, t, side="right"):
        # smooth inside, one-sided limits +1 and -1 at the ends
        return self.d1(t) - self.d2(t)

    def d12(self, s):
        """Mixed partial ``d1 d2 Lambda`` at angle ``s`` on the simplex ``x + y = 1``."""
        s = _as_float(s)
        a = self.alpha
        lo = np.minimum(s, 1.0 - s)
        hi = np.maximum(s, 1.0 - s)
        ra = (lo / hi) ** a
        return (1.0 + a) * ra / hi * (1.0 + ra) ** (-1.0 / a - 2.0)

    def transpose(self):
        return self

    def max_value(self):
        return float(self(0.5))

    def to_spec(self):
        return {"family": "clayton", "alpha": self.alpha}

    def __repr__(self):
        return f"Clayton(alpha={self.alpha})"


class CallableAngular(AngularFunction):
    """Angular candidate given by a plain vectorised function.

    Slopes come from one-sided difference quotients; meant for validation
    of candidates rather than for products.
    """

    kind = "callable"

    def __init__(self, fn: Callable):
        self.fn = fn

    def __call__(self, t):
        return _as_float(self.fn(_as_float(t)))

    def slope(self, t, side="right"):
        t = np.atleast_1d(_as_float(t))
        out = np.empty_like(t)
        for i, x in enumerate(t):
            sd = side
            if x <= 0.0:
                sd = "right"
            elif x >= 1.0:
                sd = "left"
            h0 = min(1e-2, max(x, 1.0 - x) / 2)
            out[i] = one_sided_derivative(lambda z: float(self.fn(np.array(z))), float(x),
                                          sd, h0=h0).value
        return out if out.size > 1 else out[0]

    def transpose(self):
        return CallableAngular(lambda t: self.fn(1.0 - t))


def as_angular(obj) -> AngularFunction:
    if isinstance(obj, AngularFunction):
        return obj
    if isinstance(obj, TailDependenceFunction):
        return obj.angular
    if callable(obj):
        return CallableAngular(obj)
    raise UnsupportedRepresentationError(f"cannot read {type(obj).__name__} as an angular function")


class TailDependenceFunction:
    """Bivariate tail dependence function backed by an angular function."""

    arity = 2
    homogeneous = True

    def __init__(self, angular: AngularFunction, check: bool = True):
        angular = as_angular(angular)
        if check:
            report = validate(angular)
            if not report.valid:
                raise DomainError(f"not a tail dependence function: {report.violations[0]}")
        self.angular = angular

    def __call__(self, x, y):
        x, y = _check_point(x, y)
        s = x + y
        with np.errstate(invalid="ignore", divide="ignore"):
            out = s * self.angular(np.where(s > 0, x / np.where(s > 0, s, 1.0), 0.0))
        out = np.where(s > 0, out, 0.0)
        return out if out.ndim else float(out)

    def _angle(self, x, y):
        x, y = _check_point(x, y)
        s = x + y
        if np.any(s <= 0):
            raise DomainError("partial derivatives are undefined at the origin")
        return x / s

    def d1(self, x, y):
        """Right partial derivative in the first argument."""
        out = self.angular.d1(self._angle(x, y))
        return out if np.ndim(out) else float(out)

    def d2(self, x, y):
        """Right partial derivative in the second argument."""
        out = self.angular.d2(self._angle(x, y))
        return out if np.ndim(out) else float(out)

    @property
    def has_mixed_partial(self) -> bool:
        return hasattr(self.angular, "d12")

    def d12(self, x, y):
        """Mixed partial ``d1 d2 Lambda``, homogeneous of degree -1."""
        if not self.has_mixed_partial:
            raise UnsupportedRepresentationError(f"{self.angular.kind} has no mixed partial")
        out = self.angular.d12(self._angle(x, y)) / (_as_float(x) + _as_float(y))
        return out if np.ndim(out) else float(out)

    def d1_at_infinity(self, x):
        """``lim_{y -> inf} d1 Lambda(x, y) = lam'(0)``."""
        return np.full_like(_as_float(x), self.angular.slope0)

    def transpose(self) -> "TailDependenceFunction":
        return TailDependenceFunction(self.angular.transpose(), check=False)

    @property
    def is_piecewise_linear(self) -> bool:
        return self.angular.is_piecewise_linear

    def to_spec(self) -> dict:
        return self.angular.to_spec()

    def __repr__(self):
        return f"TailDependenceFunction({self.angular!r})"


def _check_point(x, y):
    x = _as_float(x)
    y = _as_float(y)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("tail dependence functions live on the nonnegative quadrant")
    if np.any(np.isnan(x)) or np.any(np.isnan(y)):
        raise DomainError("NaN argument")
    return x, y


# family constructors
def comonotone() -> TailDependenceFunction:
    return TailDependenceFunction(PiecewiseLinear.comonotone(), check=False)


def independence() -> TailDependenceFunction:
    return TailDependenceFunction(PiecewiseLinear.independence(), check=False)


def plateau(p: float) -> TailDependenceFunction:
    return TailDependenceFunction(PiecewiseLinear.plateau(p), check=False)


def linear_min(alpha: float, beta: float) -> TailDependenceFunction:
    return TailDependenceFunction(PiecewiseLinear.linear_min(alpha, beta), check=False)


def clayton(alpha: float) -> TailDependenceFunction:
    if math.isinf(float(alpha)):
        return comonotone()
    return TailDependenceFunction(Clayton(alpha), check=False)


def piecewise_linear(t, v) -> TailDependenceFunction:
    return TailDependenceFunction(PiecewiseLinear(t, v))


def random_piecewise_linear(rng: np.random.Generator, knots: int = 4) -> TailDependenceFunction:
    """Random piecewise-linear tail dependence function.

    Upper concave hull of random points under ``min(t, 1 - t)`` together
    with the two grounded endpoints.
    """
    t = np.sort(rng.uniform(0.0, 1.0, knots))
    v = rng.uniform(0.0, 1.0, knots) * np.minimum(t, 1.0 - t)
    ht, hv = concave_majorant(np.concatenate([[0.0], t, [1.0]]),
                              np.concatenate([[0.0], v, [0.0]]))
    return TailDependenceFunction(PiecewiseLinear(ht, hv), check=False)


def tdf_from_spec(spec) -> TailDependenceFunction:
    """Build a tail dependence function from its JSON spec."""
    if not isinstance(spec, dict):
        raise SpecError("tdf", "spec must be a JSON object")
    family = spec.get("family")
    try:
        if family == "comonotone":
            return comonotone()
        if family == "independence":
            return independence()
        if family == "clayton":
            return clayton(_number(spec, "alpha"))
        if family == "linear_min":
            return linear_min(_number(spec, "alpha"), _number(spec, "beta"))
        if family == "plateau":
            return plateau(_number(spec, "p"))
        if family == "piecewise_linear":
            for key in ("t", "v"):
                if not isinstance(spec.get(key), list):
                    raise SpecError(key, "expected a list of numbers")
            return piecewise_linear(spec["t"], spec["v"])
    except DomainError as exc:
        raise SpecError(_field_hint(family), str(exc)) from exc
    raise SpecError("family", f"unknown tdf family {family!r}")


def _field_hint(family):
    return {"clayton": "alpha", "linear_min": "alpha", "plateau": "p",
            "piecewise_linear": "v"}.get(family, "family")


def _number(spec, key):
    value = spec.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(key, "expected a number")
    return float(value)


# validation
class Violation(NamedTuple):
    invariant: str
    location: float
    amount: float

    def __str__(self):
        return f"{self.invariant} at t={self.location:.6g} (by {self.amount:.3g})"


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: list = field(default_factory=list)


def validate(candidate, grid_n: int = DEFAULT_GRID, tol: float | None = None) -> ValidationReport:
    """Check the angular invariants of a candidate on a uniform grid.

    Checks groundedness, ``0 <= lam <= min(t, 1 - t)``, discrete concavity
    and chord slopes in ``[-1, 1]``.  Piecewise-linear candidates are also
    checked exactly at their breakpoints.  The default tolerance is 1e-9,
    or 1e-6 for sampled representations.
    """
    if grid_n < 3:
        raise DomainError("grid_n must be at least 3")
    lam = as_angular(candidate)
    if tol is None:
        tol = SAMPLED_TOL if lam.kind == "sampled" else STRUCTURAL_TOL
    grid = np.linspace(0.0, 1.0, grid_n)
    if isinstance(lam, PiecewiseLinear):
        grid = np.union1d(grid, lam.t)
    vals = _as_float(lam(grid))
    found = []
    for end in (0, -1):
        if abs(vals[end]) > tol:
            found.append(Violation("boundary", float(grid[end]), float(abs(vals[end]))))
    cap = np.minimum(grid, 1.0 - grid)
    _worst(found, "lower bound", grid, -vals, tol)
    _worst(found, "upper bound", grid, vals - cap, tol)
    chords = np.diff(vals) / np.diff(grid)
    mids = 0.5 * (grid[:-1] + grid[1:])
    _worst(found, "lipschitz", mids, np.abs(chords) - 1.0, tol)
    # chord slopes must not increase; scale by the gap so the check is in value units
    gaps = 0.5 * (np.diff(grid)[:-1] + np.diff(grid)[1:])
    _worst(found, "concavity", grid[1:-1], np.diff(chords) * gaps, tol)
    if isinstance(lam, PiecewiseLinear):
        _worst(found, "concavity", lam.t[1:-1], np.diff(lam.slopes), tol)
    return ValidationReport(not found, found)


def _worst(found, name, where, excess, tol):
    if excess.size and np.max(excess) > tol:
        i = int(np.argmax(excess))
        found.append(Violation(name, float(where[i]), float(excess[i])))


def rectangle_volumes(F, rng: np.random.Generator, n: int = 1000, scale: float = 2.0) -> np.ndarray:
    """2-increasing defects ``F(x2,y2) - F(x1,y2) - F(x2,y1) + F(x1,y1)``."""
    x = np.sort(rng.uniform(0.0, scale, (n, 2)), axis=1)
    y = np.sort(rng.uniform(0.0, scale, (n, 2)), axis=1)
    return (F(x[:, 1], y[:, 1]) - F(x[:, 0], y[:, 1]) - F(x[:, 1], y[:, 0])
            + F(x[:, 0], y[:, 0]))


class StrictReport(NamedTuple):
    first: bool
    second: bool
    slope0: float
    slope1: float

    @property
    def strict(self) -> bool:
        return self.first and self.second


def is_strict(tdf, tol: float = 1e-9) -> StrictReport:
    """Strictness in each margin read off the boundary slopes of ``lam``."""
    lam = as_angular(tdf)
    s0, s1 = lam.slope0, lam.slope1
    return StrictReport(abs(s0 - 1.0) <= tol, abs(s1 + 1.0) <= tol, s0, s1)


class ZeroOneClass(NamedTuple):
    comonotone_scaled: bool
    alpha: float | None


def classify_zero_one_derivative(tdf, tol: float = 1e-6, grid_n: int = DEFAULT_GRID) -> ZeroOneClass:
    """Detect ``Lambda(w1, w2) = min(w1, alpha * w2)`` from a 0/1 derivative.

    ``d1 Lambda`` depends on the angle only; when it takes just the values
    1 then 0 along the simplex the jump angle ``s`` gives
    ``alpha = s / (1 - s)``.
    """
    if not 0 < tol < 0.5:
        raise DomainError("tol must lie in (0, 1/2)")
    lam = as_angular(tdf)
    s = np.linspace(0.0, 1.0, grid_n)
    d = _as_float(lam.d1(s))
    ones = np.abs(d - 1.0) <= tol
    zeros = np.abs(d) <= tol
    if not np.all(ones | zeros):
        return ZeroOneClass(False, None)
    if np.any(np.diff(ones.astype(int)) > 0):
        return ZeroOneClass(False, None)
    if not ones.any():
        return ZeroOneClass(True, 0.0)
    last = int(np.flatnonzero(ones)[-1])
    if last == grid_n - 1:
        return ZeroOneClass(False, None)
    if isinstance(lam, PiecewiseLinear):
        # exact jump: the breakpoint inside the bracketing grid cell
        inside = lam.t[(lam.t > s[last]) & (lam.t <= s[last + 1])]
        jump = float(inside[0]) if inside.size else float(s[last + 1])
    else:
        lo, hi = float(s[last]), float(s[last + 1])
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if abs(float(lam.d1(mid)) - 1.0) <= tol:
                lo = mid
            else:
                hi = mid
        jump = hi
    # d1 = 1 on [0, jump) needs lam(s) = s there, so lam = min(s, alpha (1 - s))
    alpha = jump / (1.0 - jump)
    check = np.minimum(s, alpha * (1.0 - s))
    if np.max(np.abs(_as_float(lam(s)) - check)) > max(tol, 1e-9):
        return ZeroOneClass(False, None)
    return ZeroOneClass(True, float(alpha))


# subdistribution functions
class SubdistributionFunction:
    """Bivariate subdistribution function interface.

    Subclasses provide ``__call__``, ``d1``, ``d2``, ``d1_at_infinity`` and
    ``transpose``.  Tail dependence functions satisfy the same interface.
    """

    arity = 2
    homogeneous = False

    def __call__(self, x, y):
        raise NotImplementedError

    def d1(self, x, y):
        raise NotImplementedError

    def d2(self, x, y):
        raise NotImplementedError

    def d1_at_infinity(self, x):
        raise NotImplementedError

    def transpose(self):
        raise NotImplementedError


class CappedMin(SubdistributionFunction):
    """``min(x, y, c)``: a subdistribution function that is not homogeneous."""

    def __init__(self, cap: float = 1.0):
        if not cap > 0:
            raise DomainError("cap must be positive")
        self.cap = float(cap)

    def __call__(self, x, y):
        x, y = _check_point(x, y)
        out = np.minimum(np.minimum(x, y), self.cap)
        return out if out.ndim else float(out)

    def d1(self, x, y):
        x, y = _check_point(x, y)
        out = (x < np.minimum(y, self.cap)).astype(float)
        return out if out.ndim else float(out)

    def d2(self, x, y):
        return self.d1(y, x)

    def d1_at_infinity(self, x):
        return (_as_float(x) < self.cap).astype(float)

    def transpose(self):
        return self

    def __repr__(self):
        return f"CappedMin(cap={self.cap})"


def is_subdistribution(F, rng: np.random.Generator, n: int = 1000, scale: float = 4.0,
                       tol: float = 1e-12) -> bool:
    """Sampled check of positivity, 2-increasingness, the ``min`` bound and Lipschitz-1."""
    x = rng.uniform(0.0, scale, n)
    y = rng.uniform(0.0, scale, n)
    vals = _as_float(F(x, y))
    if np.any(vals < -tol) or np.any(vals > np.minimum(x, y) + tol):
        return False
    if np.min(rectangle_volumes(F, rng, n, scale)) < -tol:
        return False
    x2 = x + rng.uniform(-0.5, 0.5, n).clip(-x)
    y2 = y + rng.uniform(-0.5, 0.5, n).clip(-y)
    lip = np.abs(_as_float(F(x2, y2)) - vals) - (np.abs(x2 - x) + np.abs(y2 - y))
    return bool(np.max(lip) <= tol)
