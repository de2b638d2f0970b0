"""The Markov product of tail dependence and subdistribution functions.

``phi_C(L_1, ..., L_d)(w) = int_0^inf C(d1 L_1(t, w_1), ..., d1 L_d(t, w_d)) dt``

Three evaluation paths, recorded in ``ProductResult.method``:

exact
    Every factor piecewise linear.  Each ``d1 L_i(., w_i)`` is a step
    function of ``t`` with breaks ``w_i * r_k`` (``r_k = t_k / (1 - t_k)``)
    and a vanishing last piece, so the integral is a finite sum.  In two
    dimensions the result is again piecewise linear with breakpoints among
    the angles where two break rays meet.
mixed
    One factor piecewise linear and ``C`` one of ``C-``, ``Pi``, ``C+``.  On
    each constant piece of the step factor the integral of the other
    factor's derivative is a difference of values of that factor, cut at a
    threshold found by bisection for the Frechet bounds.
quadrature
    Adaptive half-line quadrature of the integrand.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .copulas import Copula, LowerFrechet, Product, UpperFrechet
from .errors import DomainError, UnsupportedRepresentationError
from .numerics import (DEFAULT_QUADRATURE, QuadratureConfig, integrate, integrate_halfline,
                       one_sided_derivative)
from .tdf import (DEFAULT_GRID, PiecewiseLinear, SubdistributionFunction,
                  TailDependenceFunction, validate)

_RAY_TOL = 1e-12
_BISECT_TOL = 1e-12


def _as_float(x):
    return np.asarray(x, dtype=float)


class ProductResult:
    """Value of a Markov product.

    Parameters
    ----------
    evaluator : callable
        Vectorised ``(*w) -> value`` on broadcast arrays.
    arity : int
    method : {"exact", "mixed", "quadrature"}
    provenance : dict
        Operands, inducing copula and method.
    angular : PiecewiseLinear, optional
        Exact angular function, when known (bivariate homogeneous only).
    homogeneous : bool
        False for products of general subdistribution functions.
    grid : int
        Size of the sampled angular grid used when no exact form exists.
    partials : tuple of callable, optional
        Closed-form ``(d1, d2)`` used in place of finite differences.
    """

    def __init__(self, evaluator, arity, method, provenance, angular=None,
                 homogeneous=True, grid=DEFAULT_GRID, d1_at_infinity=None, partials=None):
        self._evaluator = evaluator
        self.arity = arity
        self.method = method
        self.provenance = dict(provenance, method=method)
        self._angular = angular
        self._exact = angular is not None
        self.homogeneous = homogeneous
        self.grid = grid
        self._d1_inf = d1_at_infinity
        self._partials = partials

    def __call__(self, *w):
        if len(w) != self.arity:
            raise DomainError(f"product takes {self.arity} arguments, got {len(w)}")
        arrs = np.broadcast_arrays(*[_as_float(x) for x in w])
        for a in arrs:
            if np.any(a < 0) or np.any(np.isnan(a)):
                raise DomainError("products live on the nonnegative orthant")
        out = _as_float(self._evaluator(*arrs))
        return out if out.ndim else float(out)

    @property
    def exact(self) -> bool:
        """True when the angular form is exact rather than sampled."""
        return self._exact

    @property
    def is_piecewise_linear(self) -> bool:
        return self.exact

    @property
    def angular(self) -> PiecewiseLinear:
        """Exact angular function, or the concave projection of grid samples."""
        if self.arity != 2 or not self.homogeneous:
            raise UnsupportedRepresentationError("only bivariate homogeneous products have an angular form")
        if self._angular is None:
            t = np.linspace(0.0, 1.0, self.grid)
            self._angular = PiecewiseLinear.from_samples(t, self(t, 1.0 - t))
        return self._angular

    def angular_values(self, t):
        """``lam(t) = phi(t, 1 - t)`` from the direct evaluator."""
        t = _as_float(t)
        return self(t, 1.0 - t)

    @property
    def tdf(self) -> TailDependenceFunction:
        return TailDependenceFunction(self.angular, check=False)

    def _bivariate(self):
        if self.arity != 2:
            raise DomainError("operation needs a bivariate product")

    def _fd(self, x, y, index):
        x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
        out = np.empty(x.shape)
        for k, (a, b) in enumerate(zip(x.ravel(), y.ravel())):
            if a + b <= 0:
                raise DomainError("partial derivatives are undefined at the origin")
            h0 = 1e-2 * (a + b)
            if index == 0:
                est = one_sided_derivative(lambda z: self(z, b), float(a), "right", h0=h0)
            else:
                est = one_sided_derivative(lambda z: self(a, z), float(b), "right", h0=h0)
            out.flat[k] = est.value
        return out if out.ndim else float(out)

    def d1(self, x, y):
        """Right partial derivative in the first argument."""
        self._bivariate()
        if self.exact and self.homogeneous:
            return self.tdf.d1(x, y)
        if self._partials is not None:
            return self._closed(x, y, 0)
        return self._fd(x, y, 0)

    def d2(self, x, y):
        """Right partial derivative in the second argument."""
        self._bivariate()
        if self.exact and self.homogeneous:
            return self.tdf.d2(x, y)
        if self._partials is not None:
            return self._closed(x, y, 1)
        return self._fd(x, y, 1)

    def _closed(self, x, y, index):
        x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
        if np.any(x + y <= 0):
            raise DomainError("partial derivatives are undefined at the origin")
        out = np.array(self._partials[index](x, y), dtype=float)
        miss = np.isnan(out)
        if np.any(miss):
            out[miss] = self._fd(x[miss], y[miss], index)
        return out if out.ndim else float(out)

    def d1_at_infinity(self, x):
        if self._d1_inf is not None:
            return np.full_like(_as_float(x), self._d1_inf)
        return np.full_like(_as_float(x), self.angular.slope0)

    def angular_slope(self, t: float, side: str = "right") -> float:
        """One-sided slope of ``lam``; exact when the angular form is exact."""
        if self.exact:
            return float(self.angular.slope(t, side))
        if t <= 0.0:
            side = "right"
        elif t >= 1.0:
            side = "left"
        room = t if side == "left" else 1.0 - t
        h0 = min(1e-2, room / 2)
        return one_sided_derivative(lambda z: self.angular_values(z), float(t), side, h0=h0).value

    def transpose(self) -> "ProductResult":
        self._bivariate()
        ev = self._evaluator
        ang = self._angular.transpose() if self._exact else None
        parts = None
        if self._partials is not None:
            p1, p2 = self._partials
            parts = (lambda x, y: p2(y, x), lambda x, y: p1(y, x))
        return ProductResult(lambda x, y: ev(y, x), 2, self.method,
                             dict(self.provenance, transposed=True), angular=ang,
                             homogeneous=self.homogeneous, grid=self.grid, partials=parts)

    def validate(self, grid_n: int = DEFAULT_GRID):
        return validate(self.angular, grid_n)

    def __repr__(self):
        return f"ProductResult(arity={self.arity}, method={self.method!r})"


# operand handling
def _operand(x):
    """Normalise an operand: products become their angular tail function."""
    if isinstance(x, ProductResult):
        if x.arity != 2:
            raise DomainError("only bivariate products can be factors")
        if x.homogeneous:
            return x.tdf
        return x
    if isinstance(x, (TailDependenceFunction, SubdistributionFunction)):
        return x
    raise UnsupportedRepresentationError(f"cannot use {type(x).__name__} as a product factor")


def _is_pl(x):
    return isinstance(x, TailDependenceFunction) and x.angular.is_piecewise_linear


def _step(tdf: TailDependenceFunction):
    """Rays and heights of ``t -> d1 Lambda(t, 1)``; the last height is 0."""
    lam = tdf.angular
    r = lam.t[:-1] / (1.0 - lam.t[:-1])
    h = np.array(lam.h1, dtype=float)
    if abs(h[-1]) > 1e-12:
        raise DomainError("piecewise-linear factor is not grounded at 1")
    h[-1] = 0.0
    return r, h


def _copula_kind(C):
    if isinstance(C, Product) and C.arity == 2:
        return "product"
    if isinstance(C, UpperFrechet) and C.arity == 2:
        return "upper"
    if isinstance(C, LowerFrechet):
        return "lower"
    return None


def _chunks(n, width):
    size = max(1, int(2_000_000 // max(width, 1)))
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def _exact2(C, A, B, cap=None):
    """Vectorised exact evaluator for two piecewise-linear factors."""
    ra, ha = _step(A)
    rb, hb = _step(B)
    kind = _copula_kind(C)
    if kind == "product" and cap is None:
        # telescoping sum over the pieces of the coarser factor against
        # values of the other; the integral is symmetric in (A, x) <-> (B, y)
        if ra.size <= rb.size:
            return _telescope(ra, ha, B)
        inner = _telescope(rb, hb, A)
        return lambda x, y: inner(y, x)

    cmat = C(ha[:-1, None] * np.ones((1, hb.size - 1)), np.ones((ha.size - 1, 1)) * hb[None, :-1])
    a_lo, a_hi = ra[:-1], ra[1:]
    b_lo, b_hi = rb[:-1], rb[1:]

    def ev(x, y):
        x, y = np.broadcast_arrays(x, y)
        xs, ys = x.ravel(), y.ravel()
        out = np.empty(xs.size)
        for sl in _chunks(xs.size, cmat.size):
            X, Y = xs[sl, None, None], ys[sl, None, None]
            hi = np.minimum(X * a_hi[None, :, None], Y * b_hi[None, None, :])
            lo = np.maximum(X * a_lo[None, :, None], Y * b_lo[None, None, :])
            if cap is not None:
                c = np.asarray(cap, dtype=float).ravel()
                c = c[sl] if c.size > 1 else c
                hi = np.minimum(hi, c[:, None, None])
            over = np.maximum(hi - lo, 0.0)
            out[sl] = np.einsum("pij,ij->p", over, cmat)
        return out.reshape(x.shape)
    return ev


def _telescope(r, h, other):
    ends = np.concatenate([r[1:], [np.inf]])

    def ev(x, y):
        x, y = np.broadcast_arrays(x, y)
        out = np.zeros(x.shape)
        for k in range(r.size - 1):
            out = out + h[k] * (other(x * ends[k], y) - other(x * r[k], y))
        return out
    return ev


def _exact_general(C, factors, w0=None):
    """Exact evaluator for any arity by breakpoint merging, one point at a time."""
    steps = [_step(f) for f in factors]

    def ev(*w):
        arrs = np.broadcast_arrays(*w)
        out = np.empty(arrs[0].shape)
        for k in range(out.size):
            wk = [float(a.flat[k]) for a in arrs]
            top = math.inf if w0 is None else float(np.ravel(w0)[k if np.size(w0) > 1 else 0])
            breaks = np.unique(np.concatenate([[0.0]] + [wi * r for wi, (r, _) in zip(wk, steps)]))
            # the integrand vanishes beyond the first factor support end
            end = min(wi * r[-1] for wi, (r, _) in zip(wk, steps))
            end = min(end, top)
            breaks = breaks[breaks < end]
            edges = np.concatenate([breaks, [end]]) if end > 0 else np.zeros(1)
            if edges.size < 2:
                out.flat[k] = 0.0
                continue
            lefts = edges[:-1]
            vals = []
            for wi, (r, h) in zip(wk, steps):
                if wi <= 0:
                    vals.append(np.zeros_like(lefts))
                else:
                    idx = np.searchsorted(r * wi, lefts, side="right") - 1
                    vals.append(h[idx])
            out.flat[k] = float(np.sum(C(*vals) * np.diff(edges)))
        return out
    return ev


def _exact_angular(ev, A, B, ray_tol=_RAY_TOL):
    ra = A.angular.t[1:-1] / (1.0 - A.angular.t[1:-1])
    rb = B.angular.t[1:-1] / (1.0 - B.angular.t[1:-1])
    if ra.size and rb.size:
        cand = (rb[None, :] / (ra[:, None] + rb[None, :])).ravel()
    else:
        cand = np.zeros(0)
    t = np.unique(np.concatenate([[0.0, 1.0], cand]))
    # merge rays closer than the tolerance
    keep = np.concatenate([[True], np.diff(t) > ray_tol * np.maximum(1.0, t[1:])])
    keep[-1] = True
    t = t[keep]
    if t.size > 2 and t[-2] >= 1.0 - ray_tol:
        t = np.delete(t, -2)
    v = _as_float(ev(t, 1.0 - t))
    v[0] = v[-1] = 0.0
    return _prune(t, v)


def _prune(t, v, tol=1e-11):
    keep = [0]
    for i in range(1, t.size - 1):
        j = keep[-1]
        s_left = (v[i] - v[j]) / (t[i] - t[j])
        s_right = (v[i + 1] - v[i]) / (t[i + 1] - t[i])
        if abs(s_left - s_right) > tol:
            keep.append(i)
    keep.append(t.size - 1)
    return PiecewiseLinear(t[keep], v[keep], kind="product", prune=False)


def _bisect(cond, lo, hi):
    """Largest point of ``[lo, hi]`` where the monotone ``cond`` still holds."""
    lo, hi = lo.copy(), hi.copy()
    width = np.max(hi - lo) if hi.size else 0.0
    steps = int(np.ceil(np.log2(max(width, 1e-300) / _BISECT_TOL))) + 1 if width > 0 else 0
    for _ in range(max(0, min(steps, 200))):
        mid = 0.5 * (lo + hi)
        ok = cond(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return np.where(cond(lo), lo, lo)  # left endpoint on flat stretches


def _mixed2(kind, A, B, cap=None):
    """One piecewise-linear factor ``A`` against any factor ``B``."""
    ra, ha = _step(A)
    ends = np.concatenate([ra[1:], [np.inf]])

    def ev(x, y):
        x, y = np.broadcast_arrays(x, y)
        shape = x.shape
        xs, ys = x.ravel(), y.ravel()
        out = np.zeros(xs.size)
        top = None if cap is None else np.broadcast_to(_as_float(cap), shape).ravel()
        for k in range(ra.size - 1):
            c = ha[k]
            a = xs * ra[k]
            b = xs * ends[k]
            if top is not None:
                a = np.minimum(a, top)
                b = np.minimum(b, top)
            live = (b > a) & (ys > 0)
            if not np.any(live):
                continue
            al, bl, yl = a[live], b[live], ys[live]
            if kind == "product":
                part = c * (B(bl, yl) - B(al, yl))
            elif kind == "upper":
                # d1 B(., y) >= c before the cut, min(c, d1 B) integrates piecewise
                p = _bisect(lambda t: B.d1(t, yl) >= c, al, bl)
                part = c * (p - al) + B(bl, yl) - B(p, yl)
            else:
                p = _bisect(lambda t: B.d1(t, yl) >= 1.0 - c, al, bl)
                part = (c - 1.0) * (p - al) + B(p, yl) - B(al, yl)
            out[live] += part
        return out.reshape(shape)
    return ev


def _mixed_partials(A, B):
    """``(d1, d2)`` of the mixed ``Pi`` product, differentiated term by term."""
    ra, ha = _step(A)
    ends = np.concatenate([ra[1:], [np.inf]])
    pieces = [k for k in range(ra.size) if ha[k] != 0.0]

    def d1(x, y):
        x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
        out = np.zeros(x.shape)
        for k in pieces:
            out += ha[k] * (ends[k] * B.d1(x * ends[k], y) - ra[k] * _safe(B.d1, x * ra[k], y))
        return out

    def d2(x, y):
        x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
        out = np.zeros(x.shape)
        for k in pieces:
            out += ha[k] * (B.d2(x * ends[k], y) - _safe(B.d2, x * ra[k], y))
        return out
    return d1, d2


def _safe(fn, x, y):
    # partials of a tail function vanish along the axis x = 0
    live = x + y > 0
    out = np.zeros(np.broadcast(x, y).shape)
    if np.any(live):
        x, y = np.broadcast_arrays(x, y)
        out[live] = fn(x[live], y[live])
    return out


def _factor_points(f, w):
    if _is_pl(f):
        r = f.angular.t[1:-1] / (1.0 - f.angular.t[1:-1])
        return list(w * r) + [w]
    return [w]


def _quadrature(C, factors, cfg, w0=None):
    def ev(*w):
        arrs = np.broadcast_arrays(*w)
        out = np.empty(arrs[0].shape)
        for k in range(out.size):
            wk = [float(a.flat[k]) for a in arrs]
            top = None if w0 is None else float(np.ravel(w0)[k if np.size(w0) > 1 else 0])
            if min(wk) <= 0.0 or (top is not None and top <= 0.0):
                out.flat[k] = 0.0
                continue

            def g(t, wk=wk):
                t = np.maximum(t, 0.0)
                return C(*[f.d1(t, np.full_like(t, wi)) for f, wi in zip(factors, wk)])

            pts = sorted({p for f, wi in zip(factors, wk) for p in _factor_points(f, wi) if p > 0})
            if top is None:
                out.flat[k] = integrate_halfline(g, cfg, pts).value
            else:
                out.flat[k] = integrate(g, 0.0, top, cfg, [p for p in pts if p < top]).value
        return out
    return ev


def _quadrature_partials(factors, cfg):
    """``(d1, d2)`` of the ``Pi`` product of two smooth factors.

    Differentiating under the integral moves the derivative onto the
    mixed partial of one factor.
    """
    A, B = factors

    def make(first):
        def part(x, y):
            x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
            out = np.zeros(x.shape)
            for k in range(out.size):
                a, b = float(x.flat[k]), float(y.flat[k])
                if a <= 0.0 or b <= 0.0:
                    # the mixed partial concentrates at the axis: left to finite differences
                    out.flat[k] = np.nan
                    continue

                def g(t):
                    t = np.maximum(t, 0.0)
                    ta, tb = np.full_like(t, a), np.full_like(t, b)
                    if first:
                        return A.d12(t, ta) * B.d1(t, tb)
                    return A.d1(t, ta) * B.d12(t, tb)
                out.flat[k] = integrate_halfline(g, cfg, sorted({a, b})).value
            return out
        return part
    return make(True), make(False)


def generalized_product(C: Copula, factors: Sequence, method: str | None = None,
                        cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                        grid: int = DEFAULT_GRID) -> ProductResult:
    """Generalized Markov product ``phi_C`` of ``d`` factors.

    ``method`` forces a path ("exact", "mixed" or "quadrature"); by default
    the cheapest available one is used.
    """
    return _build(C, factors, None, method, cfg, grid)


def lifting(C: Copula, factors: Sequence, w0: float | None = None, method: str | None = None,
            cfg: QuadratureConfig = DEFAULT_QUADRATURE, grid: int = DEFAULT_GRID) -> ProductResult:
    """``C``-lifting: the product integral truncated at ``w0``.

    With ``w0`` given the result is the ``d``-variate slice; without it the
    result takes ``w0`` as its first argument.
    """
    if w0 is None:
        def ev(top, *w):
            return _build(C, factors, top, method, cfg, grid, sliced=False)(*w)
        return ProductResult(ev, len(factors) + 1, method or "auto",
                             {"copula": C, "factors": list(factors), "lifted": True})
    if w0 < 0:
        raise DomainError("lifting cap must be nonnegative")
    return _build(C, factors, float(w0), method, cfg, grid)


def _build(C, factors, w0, method, cfg, grid, sliced=True):
    factors = [_operand(f) for f in factors]
    d = len(factors)
    if C.arity != d:
        raise DomainError(f"copula arity {C.arity} does not match {d} factors")
    if d < 2:
        raise DomainError("need at least two factors")
    all_pl = all(_is_pl(f) for f in factors)
    homogeneous = all(getattr(f, "homogeneous", False) for f in factors)
    kind = _copula_kind(C)
    pl_index = [i for i, f in enumerate(factors) if _is_pl(f)]
    if method is None:
        if all_pl:
            method = "exact"
        elif d == 2 and kind is not None and pl_index and homogeneous:
            method = "mixed"
        else:
            method = "quadrature"
    prov = {"copula": C, "factors": factors}
    if w0 is not None:
        prov["w0"] = w0

    if method == "exact":
        if not all_pl:
            raise UnsupportedRepresentationError("the exact path needs piecewise-linear factors")
        if d == 2:
            ev = _exact2(C, factors[0], factors[1], cap=w0)
            angular = _exact_angular(ev, factors[0], factors[1]) if w0 is None else None
        else:
            ev = _exact_general(C, factors, w0)
            angular = None
        if not sliced:
            return ev
        return ProductResult(ev, d, "exact", prov, angular=angular, grid=grid,
                             homogeneous=w0 is None)

    if method == "mixed":
        if d != 2 or kind is None or not pl_index:
            raise UnsupportedRepresentationError(
                "the mixed path needs two factors, one piecewise linear, and C in {C-, Pi, C+}")
        parts = None
        if pl_index[0] == 0:
            ev = _mixed2(kind, factors[0], factors[1], cap=w0)
            if kind == "product" and w0 is None:
                parts = _mixed_partials(factors[0], factors[1])
        else:
            # the three extreme copulas are symmetric: swap factors and arguments
            inner = _mixed2(kind, factors[1], factors[0], cap=w0)
            if w0 is None:
                def ev(x, y, inner=inner):
                    return inner(y, x)
                if kind == "product":
                    p1, p2 = _mixed_partials(factors[1], factors[0])
                    parts = (lambda x, y: p2(y, x), lambda x, y: p1(y, x))
            else:
                ev = _quadrature(C, factors, cfg, w0)
                method = "quadrature"
        if not sliced:
            return ev
        return ProductResult(ev, 2, method, prov, grid=grid,
                             homogeneous=homogeneous and w0 is None, partials=parts)

    if method != "quadrature":
        raise DomainError(f"unknown method {method!r}")
    ev = _quadrature(C, factors, cfg, w0)
    if not sliced:
        return ev
    parts = None
    if (d == 2 and w0 is None and _copula_kind(C) == "product"
            and all(getattr(f, "has_mixed_partial", False) for f in factors)):
        parts = _quadrature_partials(factors, cfg)
    return ProductResult(ev, d, "quadrature", prov, grid=grid,
                         homogeneous=homogeneous and w0 is None and d == 2, partials=parts)


def star_product(left, right, method: str | None = None,
                 cfg: QuadratureConfig = DEFAULT_QUADRATURE, grid: int = DEFAULT_GRID) -> ProductResult:
    """``(L1 * L2)(w1, w2) = int d2 L1(w1, t) d1 L2(t, w2) dt``."""
    a = _operand(left)
    b = _operand(right)
    res = _build(Product(), [a.transpose(), b], None, method, cfg, grid)
    res.provenance.update(left=left, right=right, star=True)
    return res


def exact_pl_product(factors: Sequence, C: Copula = None) -> ProductResult:
    """Exact product of piecewise-linear factors; ``C`` defaults to ``Pi``."""
    C = Product(len(factors)) if C is None else C
    factors = [_operand(f) for f in factors]
    if not all(_is_pl(f) for f in factors):
        raise UnsupportedRepresentationError("exact_pl_product needs piecewise-linear factors")
    return _build(C, factors, None, "exact", DEFAULT_QUADRATURE, DEFAULT_GRID)


def min_bound(factors: Sequence):
    """Reduction bound ``min over m != k of Lambda_k(w_m, w_k)`` for two factors.

    For ``phi_C(L1, L2)`` this is ``min(L1(w2, w1), L2(w1, w2))``.
    """
    a, b = [_operand(f) for f in factors]

    def bound(x, y):
        return np.minimum(a(y, x), b(x, y))
    return bound
