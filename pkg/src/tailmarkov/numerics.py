"""Shared numerical kernels.

Adaptive Gauss-Kronrod quadrature on bounded intervals and on the half-line,
scale-limit sweeps, one-sided difference quotients, and the step-function
toolkit (decreasing rearrangement, majorization) used by the operator checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, NumericError

# 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5 and the centre).
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _GW[_i] = _w
    _GW[14 - _i] = _w
_GW[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the adaptive integrator.

    ``compactify`` selects the half-line strategy: a change of variables
    onto a bounded interval when true, geometric panel marching otherwise.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 0.0
    max_subdivisions: int = 5000
    compactify: bool = True

    def __post_init__(self):
        if not self.abs_tol > 0 and not self.rel_tol > 0:
            raise DomainError("quadrature tolerance must be positive")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("quadrature tolerance must be nonnegative")
        if self.max_subdivisions < 8:
            raise DomainError("max_subdivisions must be at least 8")


DEFAULT_QUADRATURE = QuadratureConfig()


class QuadResult(NamedTuple):
    value: float
    residual: float


_EDGE_GAP = 1.0 - _XGK[0]
_EXTRAP = _EDGE_GAP / (_XGK[0] - _XGK[1])
_NODES17 = np.concatenate([[-1.0], _NODES, [1.0]])


def _gk15(f, a, b):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[:, None] + half[:, None] * _NODES17[None, :]
    x[:, 0] = a
    x[:, -1] = b
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    inner = y[:, 1:-1]
    kron = half * (inner @ _KW)
    gauss = half * (inner @ _GW)
    # a jump between an endpoint and the outermost node is invisible to both
    # rules; endpoint samples expose it
    # compare against a linear extrapolation so smooth integrands add O(h**3)
    with np.errstate(invalid="ignore"):
        left = y[:, 1] + (y[:, 1] - y[:, 2]) * _EXTRAP
        right = y[:, -2] + (y[:, -2] - y[:, -3]) * _EXTRAP
        edge = np.abs(y[:, 0] - left) + np.abs(y[:, -1] - right)
    edge = np.where(np.isfinite(edge), edge, 0.0) * half * _EDGE_GAP
    return kron, np.abs(kron - gauss) + edge


def _adaptive(f, edges, cfg):
    return _adaptive_pieces(f, edges[:-1].copy(), edges[1:].copy(), cfg)


def _adaptive_pieces(f, a, b, cfg):
    val, err = _gk15(f, a, b)
    while True:
        total = float(val.sum())
        toterr = float(err.sum())
        target = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if toterr <= target:
            return QuadResult(total, toterr)
        if len(a) >= cfg.max_subdivisions:
            raise NumericError(
                f"subdivision budget exhausted ({len(a)} intervals)", residual=toterr)
        # split the worst offenders only; spreading work over intervals that
        # already sit at the roundoff floor just doubles the partition
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        live = np.flatnonzero((b - a) > 64 * np.finfo(float).eps * scale)
        stuck = toterr - float(err[live].sum())
        if live.size == 0 or stuck > target:
            raise NumericError("error concentrated on unresolvable intervals",
                               residual=toterr)
        order = live[np.argsort(-err[live])]
        cum = np.cumsum(err[order])
        k = int(np.searchsorted(cum, toterr - 0.5 * (target + stuck))) + 1
        pick = order[:k]
        pick = pick[err[pick] >= err[order[0]] / 16.0]
        if pick.size == 0:
            raise NumericError("error concentrated on unresolvable intervals",
                               residual=toterr)
        mid = 0.5 * (a[pick] + b[pick])
        na = np.concatenate([a[pick], mid])
        nb = np.concatenate([mid, b[pick]])
        nval, nerr = _gk15(f, na, nb)
        keep = np.ones(len(a), dtype=bool)
        keep[pick] = False
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])


def _initial_edges(lo, hi, points, pieces=7):
    # uneven start partition keeps jump locations off symmetric node patterns
    base = lo + (hi - lo) * np.linspace(0.0, 1.0, pieces + 1) ** 1.1
    extra = [] if points is None else [p for p in points if lo < p < hi]
    return np.unique(np.concatenate([base, np.asarray(extra, dtype=float)]))


def integrate(f: Callable, a: float, b: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
              points: Sequence[float] | None = None) -> QuadResult:
    """Integrate a vectorised ``f`` over ``[a, b]``.

    ``points`` are optional interior locations added to the starting
    partition (known kinks or scale hints); they never change the result
    beyond the tolerance.
    """
    if b < a:
        res = integrate(f, b, a, cfg, points)
        return QuadResult(-res.value, res.residual)
    if b == a:
        return QuadResult(0.0, 0.0)
    return _adaptive(f, _initial_edges(a, b, points), cfg)


def integrate_halfline(g: Callable, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                       points: Sequence[float] | None = None) -> QuadResult:
    """Integrate ``g`` over ``[0, inf)``.

    With compactification, ``[0, 1]`` is integrated directly and the tail
    through ``t = v**-4`` on ``(0, 1]``; the quartic map keeps integrands
    decaying like ``t**-(1 + a)`` bounded for ``a >= 1/4``.
    """
    if not cfg.compactify:
        return _panel_march(g, cfg, points)

    def tail(v):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            # keep the argument finite so integrands never see inf
            t = np.minimum(v ** -4.0, 1e300)
            y = np.asarray(g(t), dtype=float) * (4.0 * v ** -5.0)
        return np.where(np.isfinite(y), y, 0.0)

    pts = [] if points is None else list(points)
    vpts = [p ** -0.25 for p in pts if p > 1.0]
    head_edges = _initial_edges(0.0, 1.0, [p for p in pts if p < 1.0])
    tail_edges = _initial_edges(0.0, 1.0, vpts)
    # one joint adaptive loop: head on [0, 1], tail variable shifted to [2, 3]
    a = np.concatenate([head_edges[:-1], 2.0 + tail_edges[:-1]])
    b = np.concatenate([head_edges[1:], 2.0 + tail_edges[1:]])

    def h(x):
        out = np.empty_like(x)
        head = x <= 1.0
        if head.any():
            out[head] = np.asarray(g(x[head]), dtype=float)
        if not head.all():
            out[~head] = tail(x[~head] - 2.0)
        return out

    return _adaptive_pieces(h, a, b, cfg)


def _panel_march(g, cfg, points):
    total, resid = 0.0, 0.0
    lo, hi, quiet = 0.0, 1.0, 0
    while quiet < 2:
        part = integrate(g, lo, hi, cfg, points)
        total += part.value
        resid += part.residual
        quiet = quiet + 1 if abs(part.value) <= 1e-3 * cfg.abs_tol else 0
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NumericError("half-line integral does not settle", residual=resid)
    return QuadResult(total, resid)


@dataclass(frozen=True)
class LimitSchedule:
    """Geometric scale sweep ``s_k = s0 * ratio**k`` used for ``s -> 0`` limits."""

    s0: float = 0.25
    ratio: float = 0.5
    max_steps: int = 20
    stall_tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.s0 <= 1:
            raise DomainError("s0 must lie in (0, 1]")
        if not 0 < self.ratio < 1:
            raise DomainError("ratio must lie in (0, 1)")
        if self.max_steps < 3:
            raise DomainError("max_steps must be at least 3")
        if not self.stall_tol > 0:
            raise DomainError("stall tolerance must be positive")

    def scales(self) -> np.ndarray:
        return self.s0 * self.ratio ** np.arange(self.max_steps)


class LimitResult(NamedTuple):
    value: float
    converged: bool
    trace: list


def extrapolate_limit(h: Callable[[float], float],
                      schedule: LimitSchedule = LimitSchedule()) -> LimitResult:
    """Sweep ``h`` along the schedule until two consecutive steps stall.

    The reported value removes the first-order term in ``s`` from the last
    two samples, ``(h(r s) - r h(s)) / (1 - r)``.  Non-convergence is
    reported through the flag, never raised.
    """
    trace = []
    calm = 0
    for s in schedule.scales():
        value = float(h(float(s)))
        if trace and abs(value - trace[-1][1]) < schedule.stall_tol:
            calm += 1
        else:
            calm = 0
        trace.append((float(s), value))
        if calm >= 2:
            r = schedule.ratio
            return LimitResult((value - r * trace[-2][1]) / (1.0 - r), True, trace)
    return LimitResult(trace[-1][1], False, trace)


class DerivativeEstimate(NamedTuple):
    value: float
    error: float


def one_sided_derivative(f: Callable[[float], float], x: float, side: str = "right",
                         h0: float = 1e-2, ratio: float = 0.5,
                         steps: int = 10) -> DerivativeEstimate:
    """Forward or backward difference quotients refined pairwise.

    Quotients ``D(h_k)`` along ``h_k = h0 * ratio**k`` are combined as
    ``(D(h_{k+1}) - ratio * D(h_k)) / (1 - ratio)``, which removes the
    first-order term; the error estimate is the gap between the last two
    refined values.
    """
    if side not in ("right", "left"):
        raise DomainError(f"side must be 'right' or 'left', got {side!r}")
    sign = 1.0 if side == "right" else -1.0
    fx = float(f(x))
    hs = h0 * ratio ** np.arange(steps)
    quot = np.array([(float(f(x + sign * h)) - fx) / (sign * h) for h in hs])
    refined = (quot[1:] - ratio * quot[:-1]) / (1.0 - ratio)
    return DerivativeEstimate(float(refined[-1]), float(abs(refined[-1] - refined[-2])))


class StepFunction:
    """Right-continuous step function on ``[0, inf)``.

    Zero on ``[0, breaks[0])``, ``values[i]`` on ``[breaks[i], breaks[i+1])``
    and ``tail`` beyond the last break.  Stored in canonical form: no
    zero-width pieces and no equal neighbours.
    """

    __slots__ = ("breaks", "values", "tail")

    def __init__(self, breaks, values, tail=0.0):
        b = np.asarray(breaks, dtype=float).ravel()
        v = np.asarray(values, dtype=float).ravel()
        if b.size == 0:
            b = np.zeros(1)
        if b.size != v.size + 1:
            raise DomainError("need exactly one more break than values")
        if np.any(b < 0) or np.any(np.diff(b) < 0):
            raise DomainError("breaks must be nonnegative and nondecreasing")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(v)):
            raise DomainError("breaks and values must be finite")
        b, v = _canonical(b, v, float(tail))
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "tail", float(tail))

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    @classmethod
    def indicator(cls, a: float, b: float, height: float = 1.0) -> "StepFunction":
        if math.isinf(b):
            return cls([a], [], tail=height)
        return cls([a, b], [height])

    @classmethod
    def constant(cls, c: float) -> "StepFunction":
        return cls([0.0], [], tail=c)

    @classmethod
    def from_spec(cls, spec: dict) -> "StepFunction":
        return cls(spec["breaks"], spec["values"], spec.get("tail", 0.0))

    def to_spec(self) -> dict:
        return {"breaks": self.breaks.tolist(), "values": self.values.tolist(),
                "tail": self.tail}

    def pieces(self):
        """Yield ``(a, b, c)`` triples, the last one with ``b = inf``."""
        for a, b, c in zip(self.breaks[:-1], self.breaks[1:], self.values):
            yield float(a), float(b), float(c)
        if self.tail != 0.0:
            yield float(self.breaks[-1]), math.inf, self.tail

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        table = np.concatenate([[0.0], self.values, [self.tail]])
        return table[np.searchsorted(self.breaks, x, side="right")]

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (self.tail == other.tail and np.array_equal(self.breaks, other.breaks)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return (f"StepFunction(breaks={self.breaks.tolist()}, values={self.values.tolist()}, "
                f"tail={self.tail})")

    @property
    def compact(self) -> bool:
        return self.tail == 0.0

    def integral(self) -> float:
        if not self.compact:
            raise DomainError("integral of a step function with nonzero tail")
        return float(np.sum(self.values * np.diff(self.breaks)))

    def norm1(self) -> float:
        if not self.compact:
            return math.inf
        return float(np.sum(np.abs(self.values) * np.diff(self.breaks)))

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.values), initial=0.0), abs(self.tail)))

    def dilate(self, s: float) -> "StepFunction":
        """Return ``x -> f(x / s)``."""
        if not s > 0:
            raise DomainError("dilation factor must be positive")
        return StepFunction(self.breaks * s, self.values, self.tail)

    def scale(self, c: float) -> "StepFunction":
        return StepFunction(self.breaks, self.values * c, self.tail * c)


def _canonical(b, v, tail):
    keep = np.diff(b) > 0
    v = v[keep]
    b = np.concatenate([b[:1], b[1:][keep]])
    if v.size:
        # merge equal neighbours
        change = np.concatenate([[True], v[1:] != v[:-1]])
        b = np.concatenate([b[:-1][change], b[-1:]])
        v = v[change]
    # leading zeros belong to the implicit zero region
    while v.size and v[0] == 0.0:
        b, v = b[1:], v[1:]
    while v.size and v[-1] == tail:
        b, v = b[:-1], v[:-1]
    if v.size == 0 and tail == 0.0:
        b = np.zeros(1)
    return b.astype(float), v.astype(float)


def inner_product(f: StepFunction, g: StepFunction) -> float:
    """Exact ``int_0^inf f g`` for step functions; at least one must be compact."""
    if not (f.compact or g.compact):
        raise DomainError("inner product of two functions with nonzero tails")
    grid = np.union1d(f.breaks, g.breaks)
    mids = 0.5 * (grid[:-1] + grid[1:])
    return float(np.sum(f(mids) * g(mids) * np.diff(grid)))


def decreasing_rearrangement(f: StepFunction) -> StepFunction:
    """Sort the pieces of a nonnegative compactly supported step function by height."""
    if np.any(f.values < 0):
        raise DomainError("rearrangement needs a nonnegative function")
    if not f.compact:
        raise DomainError("rearrangement needs compact support")
    lengths = np.diff(f.breaks)
    order = np.argsort(-f.values, kind="stable")
    heights = f.values[order]
    breaks = np.concatenate([[0.0], np.cumsum(lengths[order])])
    return StepFunction(breaks, heights)


def _cumulative(f: StepFunction, t: np.ndarray) -> np.ndarray:
    # f is already decreasing, starting at 0
    prim = np.concatenate([[0.0], np.cumsum(f.values * np.diff(f.breaks))])
    return np.interp(t, f.breaks, prim, right=prim[-1])


def majorizes(f: StepFunction, g: StepFunction, tol: float = 1e-12) -> bool:
    """True iff ``g`` is majorized by ``f``: ``int_0^t g* <= int_0^t f*`` for all t."""
    fs = decreasing_rearrangement(f)
    gs = decreasing_rearrangement(g)
    grid = np.union1d(fs.breaks, gs.breaks)
    return bool(np.all(_cumulative(gs, grid) <= _cumulative(fs, grid) + tol))
