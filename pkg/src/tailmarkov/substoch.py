"""Doubly substochastic operators backed by subdistribution kernels.

A kernel ``F`` acts on step functions by
``T_F 1_[a, b)(x) = d1 F(x, b) - d1 F(x, a)``, extended linearly; the
tail piece of a step function uses ``d1 F(x, inf)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError
from .numerics import (QuadratureConfig, StepFunction, integrate, integrate_halfline,
                       majorizes)
from .product import ProductResult, star_product
from .tdf import SubdistributionFunction, TailDependenceFunction, CappedMin

OPERATOR_QUADRATURE = QuadratureConfig(abs_tol=1e-11, max_subdivisions=20000)
_LOCAL_QUADRATURE = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-11)


def _as_float(x):
    return np.asarray(x, dtype=float)


def _check_kernel(F):
    if isinstance(F, ProductResult):
        if F.arity != 2:
            raise DomainError("kernels are bivariate")
        return F
    if isinstance(F, (TailDependenceFunction, SubdistributionFunction)):
        return F
    raise DomainError(f"{type(F).__name__} is not a subdistribution kernel")


def _d1(F, x, y):
    """``d1 F(x, y)`` with ``d1 F(x, 0) = 0`` and the tail limit at ``y = inf``."""
    x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
    out = np.zeros(x.shape)
    inf = np.isinf(y)
    if np.any(inf):
        out[inf] = F.d1_at_infinity(x[inf])
    mid = (y > 0) & ~inf
    if np.any(mid):
        out[mid] = F.d1(x[mid], y[mid])
    return out


def _value(F, x, y):
    """``F(x, y)`` allowing ``y = inf``."""
    x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
    out = np.zeros(x.shape)
    inf = np.isinf(y)
    if np.any(inf):
        if getattr(F, "homogeneous", False):
            out[inf] = x[inf] * F.d1_at_infinity(x[inf])
        else:
            out[inf] = F(x[inf], np.full(int(inf.sum()), np.inf))
    fin = ~inf
    if np.any(fin):
        out[fin] = F(x[fin], y[fin])
    return out


def kinks(F, y: float) -> list:
    """Locations in ``x`` where ``d1 F(x, y)`` may jump."""
    if isinstance(F, CappedMin):
        return [min(y, F.cap)]
    lam = None
    if isinstance(F, TailDependenceFunction):
        lam = F.angular
    elif isinstance(F, ProductResult) and F.exact:
        lam = F.angular
    if lam is None or not lam.is_piecewise_linear or math.isinf(y):
        return []
    t = lam.t[1:-1]
    return list(y * t / (1.0 - t))


def column_kinks(F, x: float) -> list:
    """Locations in ``y`` where ``d1 F(x, y)`` may jump."""
    if isinstance(F, CappedMin):
        return [x] if x < F.cap else []
    lam = None
    if isinstance(F, TailDependenceFunction):
        lam = F.angular
    elif isinstance(F, ProductResult) and F.exact:
        lam = F.angular
    if lam is None or not lam.is_piecewise_linear:
        return []
    t = lam.t[1:-1]
    return list(x * (1.0 - t) / t)


def apply_operator(F, f: StepFunction, x):
    """``T_F f(x)``, right-continuous in ``x``."""
    F = _check_kernel(F)
    x = _as_float(x)
    if np.any(x < 0):
        raise DomainError("operators act on functions of the half-line")
    out = np.zeros(x.shape)
    for a, b, c in f.pieces():
        out = out + c * (_d1(F, x, b) - _d1(F, x, a))
    return out if out.ndim else float(out)


def _points(F, f: StepFunction) -> list:
    pts = set(f.breaks.tolist())
    for b in f.breaks:
        pts.update(kinks(F, float(b)))
    return sorted(p for p in pts if p > 0)


def materialize(F, f: StepFunction, refine: int = 4, tail_decades: int = 8,
                per_octave: int = 4, probes: Sequence[float] = (),
                probe_width: float = 1e-7) -> StepFunction:
    """Cell averages of ``T_F f`` as a step function.

    Cells come from the merged breakpoints of ``f`` and the kinks of ``F``,
    each split ``refine`` times, followed by geometric cells over
    ``tail_decades`` decades when ``T_F f`` may not have compact support.
    Averages are exact rectangle volumes of ``F``, so the result keeps the
    integral of ``T_F f`` over the covered range and is majorized by it.

    ``probes`` get a narrow cell of relative width ``probe_width`` centred
    on them, so that a later point evaluation there sees the local value
    rather than a coarse average.
    """
    F = _check_kernel(F)
    base = np.unique(np.concatenate([[0.0], _points(F, f)]))
    if base.size < 2:
        base = np.array([0.0, 1.0])
    cells = [np.linspace(lo, hi, refine + 1)[:-1] for lo, hi in zip(base[:-1], base[1:])]
    edges = np.concatenate(cells + [base[-1:]])
    compact = f.compact and _compact_kernel(F)
    if not compact:
        top = base[-1]
        n = int(per_octave * tail_decades * math.log2(10))
        edges = np.concatenate([edges, top * 2.0 ** (np.arange(1, n + 1) / per_octave)])
    for p in probes:
        if 0 < p < edges[-1]:
            half = 0.5 * probe_width * p
            edges = np.concatenate([edges, [p - half, p + half]])
    edges = np.unique(edges)
    lo, hi = edges[:-1], edges[1:]
    mass = np.zeros(lo.size)
    for a, b, c in f.pieces():
        mass += c * (_value(F, hi, b) - _value(F, lo, b) - _value(F, hi, a) + _value(F, lo, a))
    return StepFunction(edges, mass / (hi - lo))


def _compact_kernel(F):
    if isinstance(F, CappedMin):
        return True
    if isinstance(F, TailDependenceFunction):
        return F.angular.is_piecewise_linear
    return isinstance(F, ProductResult) and F.exact


_ROUNDOFF = 1e-13


class OperatorKernel(SubdistributionFunction):
    """``F_T(x, y) = int_0^x T 1_[0, y](s) ds`` for the operator ``T = T_G``.

    Values and derivatives come from quadrature of the operator output, so
    the round trip back to ``G`` is a genuine numerical check.
    """

    def __init__(self, G, cfg: QuadratureConfig = OPERATOR_QUADRATURE, h: float = 1e-8):
        self.G = _check_kernel(G)
        self.cfg = cfg
        self.h = h
        self.homogeneous = getattr(G, "homogeneous", False)

    def _column(self, y):
        ind = StepFunction.indicator(0.0, y) if y > 0 else StepFunction.constant(0.0)
        return lambda s: apply_operator(self.G, ind, s)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
        out = np.empty(x.shape)
        for k, (a, b) in enumerate(zip(x.ravel(), y.ravel())):
            if a <= 0 or b <= 0:
                out.flat[k] = 0.0
                continue
            if math.isinf(b):
                col = lambda s: _d1(self.G, s, np.full_like(s, np.inf))
                pts = []
            else:
                col = self._column(float(b))
                pts = kinks(self.G, float(b))
            out.flat[k] = integrate(col, 0.0, float(a), self.cfg,
                                    [p for p in pts if 0 < p < a]).value
        return out if out.ndim else float(out)

    def d1(self, x, y):
        # average of the operator output over [x, x + h]
        x, y = np.broadcast_arrays(_as_float(x), _as_float(y))
        out = np.empty(x.shape)
        for k, (a, b) in enumerate(zip(x.ravel(), y.ravel())):
            if b <= 0:
                out.flat[k] = 0.0
                continue
            col = self._column(float(b))
            h = self.h * max(1.0, a)
            out.flat[k] = integrate(col, float(a), float(a) + h, _LOCAL_QUADRATURE).value / h
        return out if out.ndim else float(out)

    def d2(self, x, y):
        return OperatorKernel(self.G.transpose(), self.cfg, self.h).d1(y, x)

    def d1_at_infinity(self, x):
        return apply_operator(self.G, StepFunction.constant(1.0), x)

    def transpose(self):
        return OperatorKernel(self.G.transpose(), self.cfg, self.h)


def operator_to_subdistribution(F) -> OperatorKernel:
    """Kernel of the operator ``T_F`` rebuilt from its action on indicators."""
    return OperatorKernel(F)


class ComposeCheck(NamedTuple):
    lhs: float
    rhs: float
    defect: float


def compose_check(F, G, f: StepFunction, x: float, refine: int = 4) -> ComposeCheck:
    """Compare ``T_{F*G} f(x)`` with ``T_F (T_G f)(x)``."""
    lhs = float(apply_operator(star_product(F, G), f, x))
    smooth = not _compact_kernel(G)
    inner = materialize(G, f, refine=256 if smooth else refine, per_octave=128 if smooth else 4,
                        probes=column_kinks(F, x))
    rhs = float(apply_operator(F, inner, x))
    return ComposeCheck(lhs, rhs, abs(lhs - rhs))


class AdjointPairing(NamedTuple):
    forward: float
    backward: float

    @property
    def defect(self) -> float:
        return abs(self.forward - self.backward)


def adjoint_pairing(F, f: StepFunction, g: StepFunction,
                    cfg: QuadratureConfig = OPERATOR_QUADRATURE) -> AdjointPairing:
    """``<T_F f, g>`` and ``<f, T_{F^T} g>``, both by quadrature."""
    F = _check_kernel(F)
    if not g.compact:
        raise DomainError("g must have compact support")
    Ft = F.transpose()
    pts_f = _points(F, f) + _points(F, g) + _points(Ft, f) + _points(Ft, g)

    def fwd(x):
        return apply_operator(F, f, x) * g(x)

    def bwd(x):
        return f(x) * apply_operator(Ft, g, x)

    top = float(g.breaks[-1])
    forward = integrate(fwd, 0.0, top, cfg, [p for p in pts_f if p < top]).value
    backward = integrate_halfline(bwd, cfg, sorted(set(pts_f))).value
    return AdjointPairing(forward, backward)


class MarkovReport(NamedTuple):
    markov: bool
    constant_defect: float
    mass_defect: float
    transpose_constant_defect: float
    transpose_mass_defect: float


def _markov_defects(F, xs, ys, cfg):
    one = StepFunction.constant(1.0)
    const = float(np.max(np.abs(apply_operator(F, one, xs) - 1.0)))
    mass = 0.0
    for y in ys:
        ind = StepFunction.indicator(0.0, y)
        total = integrate_halfline(lambda s: apply_operator(F, ind, s), cfg, _points(F, ind)).value
        mass = max(mass, abs(total - y))
    return const, mass


def is_markov_operator(F, tol: float = 1e-6, xs: Sequence[float] = (0.0, 0.3, 1.0, 2.5, 7.0),
                       ys: Sequence[float] = (0.5, 1.0, 3.0),
                       cfg: QuadratureConfig = OPERATOR_QUADRATURE) -> MarkovReport:
    """Check ``T 1 = 1`` and ``int T f = int f`` for ``T_F`` and ``T_{F^T}``."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    F = _check_kernel(F)
    xs = _as_float(xs)
    c1, m1 = _markov_defects(F, xs, ys, cfg)
    c2, m2 = _markov_defects(F.transpose(), xs, ys, cfg)
    ok = max(c1, m1, c2, m2) <= tol
    return MarkovReport(ok, c1, m1, c2, m2)


def check_equivariance(F, f: StepFunction, s: float, x) -> float:
    """``max |T_F(f o sigma)(x) - (T_F f)(x / s)|`` with ``sigma(x) = x / s``."""
    if not s > 0:
        raise DomainError("dilation factor must be positive")
    x = _as_float(x)
    lhs = apply_operator(F, f.dilate(s), x)
    rhs = apply_operator(F, f, x / s)
    return float(np.max(np.abs(_as_float(lhs) - _as_float(rhs))))


class OperatorNorms(NamedTuple):
    min_value: float
    norm1_in: float
    norm1_out: float
    sup_in: float
    sup_out: float


def operator_norms(F, f: StepFunction, cfg: QuadratureConfig = OPERATOR_QUADRATURE) -> OperatorNorms:
    """Minimum, L1 and sup norms of ``T_F f`` next to those of ``f``.

    The sup and minimum are taken over the breakpoints, kinks and cell
    midpoints where the step structure of ``T_F f`` is resolved.
    """
    F = _check_kernel(F)
    pts = np.array(_points(F, f) or [1.0])
    probe = np.unique(np.concatenate([[0.0], pts, 0.5 * (pts[:-1] + pts[1:]),
                                      pts[-1] * np.geomspace(1.01, 1e6, 60)]))
    vals = _as_float(apply_operator(F, f, probe))
    if f.compact:
        n1 = integrate_halfline(lambda s: np.abs(apply_operator(F, f, s)), cfg, list(pts)).value
    else:
        n1 = math.inf
    return OperatorNorms(float(vals.min()), f.norm1(), n1, f.sup_norm(), float(np.max(np.abs(vals))))


def majorization_check(F, f: StepFunction, refine: int = 4) -> bool:
    """``T_F f`` (materialized) is majorized by ``f``."""
    g = materialize(F, f, refine=refine)
    # cancellation in the rectangle volumes leaves values like -1e-16
    floor = _ROUNDOFF * max(1.0, float(np.max(np.abs(g.values), initial=0.0)))
    vals = np.where(np.abs(g.values) <= floor, 0.0, g.values)
    return majorizes(f, StepFunction(g.breaks, vals, g.tail))
