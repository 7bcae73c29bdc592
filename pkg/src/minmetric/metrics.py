"""Left-invariant metrics as evaluable handles, plus the canonical ones."""

from dataclasses import dataclass, field, replace
import math
from typing import Any, Callable, Optional

import numpy as np

from . import kernels
from .errors import EmptyBallError, MetricValidationError, NoCanonicalMetric, PayloadError
from .linalg import random_skew_hermitian_batch
from .groups import (
    CyclicTower,
    DiagonalTorus,
    DiscreteGroup,
    Euclidean,
    FiniteGroup,
    FiniteTable,
    FreeGroup,
    GroupContext,
    Heisenberg,
    IntegerLattice,
    InvolutionProduct,
    MatrixGroup,
    SpecialOrthogonal,
    UnitaryGroup,
)


@dataclass(frozen=True, eq=False)
class MetricHandle:
    """A left-invariant metric ``d(g, h) = norm(h^-1 g)`` on ``ctx``.

    ``dist`` overrides the norm formula for handles built from an arbitrary
    distance function; such handles must pass ``validate`` before use.
    ``batch_norm`` and ``batch_trace`` are optional vectorised fast paths.
    """

    ctx: GroupContext
    norm: Callable[[Any], float]
    provenance: str
    bounded: bool = False
    complete: bool = True
    meta: dict = field(default_factory=dict)
    dist: Optional[Callable[[Any, Any], float]] = None
    batch_norm: Optional[Callable[[list], np.ndarray]] = None
    batch_trace: Optional[Callable[[list, int, bool], np.ndarray]] = None
    word_bound: Optional[Callable[[float], float]] = None

    def __call__(self, g, h):
        if self.dist is not None:
            return float(self.dist(g, h))
        ctx = self.ctx
        return float(self.norm(ctx.multiply(ctx.invert(h), g)))

    def to_identity(self, g):
        return float(self.norm(g))

    def norms(self, gs):
        if not len(gs):
            return np.zeros(0)
        if self.batch_norm is not None:
            return np.asarray(self.batch_norm(gs), dtype=float)
        return np.array([self.norm(g) for g in gs], dtype=float)

    def power_traces(self, gs, count, dyadic=False):
        """``out[b, j]`` = d(g_b^k, 1) for k = j+1 (or k = 2^j when ``dyadic``)."""
        if not len(gs):
            return np.zeros((0, count))
        if self.batch_trace is not None:
            return np.asarray(self.batch_trace(gs, count, dyadic), dtype=float)
        out = np.empty((len(gs), count))
        ctx = self.ctx
        for b, g in enumerate(gs):
            out[b] = self.power_trace(g, count, dyadic)
        return out

    def power_trace(self, g, count, dyadic=False, stop=None):
        """Distances of successive (or dyadic) powers; ``stop(j, value)`` ends early."""
        ctx = self.ctx
        out = []
        cur = g
        for j in range(count):
            v = self.norm(cur)
            out.append(v)
            if stop is not None and stop(j, v):
                break
            cur = ctx.multiply(cur, cur) if dyadic else ctx.multiply(cur, g)
        return np.array(out, dtype=float)

    def describe(self):
        out = {"provenance": self.provenance, "bounded": self.bounded, "complete": self.complete}
        out.update({k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool, list))})
        return out


# ---------------------------------------------------------------------------
# matrix-group metrics


def _stack(gs):
    if isinstance(gs, np.ndarray) and gs.ndim == 3:
        return gs
    return np.stack([np.asarray(g) for g in gs])


def _chord_norm(g):
    g = np.asarray(g)
    return float(kernels.opnorm_batch((g - np.eye(g.shape[0]))[None])[0])


def _chord_batch(gs):
    a = _stack(gs)
    return kernels.opnorm_batch(a - np.eye(a.shape[1]))


def _chord_trace(gs, count, dyadic):
    a = _stack(gs)
    if dyadic:
        return kernels.dyadic_trace_batch(a, count - 1)
    return kernels.power_trace_batch(a, count)


def _angle_norm(g):
    w = np.linalg.eigvals(np.asarray(g, dtype=np.complex128))
    return float(np.max(np.abs(np.angle(w))))


def _angle_batch(gs):
    w = np.linalg.eigvals(_stack(gs).astype(np.complex128))
    return np.max(np.abs(np.angle(w)), axis=1)


def chord_metric(ctx):
    """d(g, h) = ||h^-1 g - Id|| in the operator norm."""
    return MetricHandle(
        ctx,
        _chord_norm,
        "native_norm",
        bounded=True,
        batch_norm=_chord_batch,
        batch_trace=_chord_trace,
        meta={"formula": "||h^-1 g - Id||_op"},
    )


def geodesic_metric(ctx):
    """d(g, h) = max |arg eigenvalue of h^-1 g|, the bi-invariant path metric of the operator norm.

    Exact halving under principal square roots, which the chord metric lacks.
    """
    if not isinstance(ctx, (UnitaryGroup, SpecialOrthogonal)):
        raise NoCanonicalMetric(f"geodesic metric needs a compact matrix group, not {ctx!r}")
    return MetricHandle(
        ctx,
        _angle_norm,
        "native_norm",
        bounded=True,
        batch_norm=_angle_batch,
        meta={"formula": "max|arg eig(h^-1 g)|"},
    )


# ---------------------------------------------------------------------------
# discrete-group metrics


def word_length_metric(ctx, cache_radius=64):
    """Word metric of the context's standard symmetric generators."""
    if isinstance(ctx, IntegerLattice):
        return MetricHandle(
            ctx,
            lambda g: float(sum(abs(x) for x in g)),
            "word",
            meta={"generators": "unit vectors"},
            batch_trace=lambda gs, c, dy: np.outer(
                [sum(abs(x) for x in g) for g in gs],
                (2 ** np.arange(c)) if dy else np.arange(1, c + 1),
            ).astype(float),
            word_bound=lambda r: r,
        )
    if isinstance(ctx, FreeGroup):
        return MetricHandle(ctx, lambda g: float(len(g)), "word", word_bound=lambda r: r)
    if isinstance(ctx, FiniteGroup):
        raise NoCanonicalMetric(f"no standard generators for {ctx!r}; use coarse.word_metric")
    if isinstance(ctx, DiscreteGroup):
        lengths = _BallCache(ctx, cache_radius)
        return MetricHandle(ctx, lengths, "word", meta={"truncation_radius": cache_radius}, word_bound=lambda r: r)
    raise NoCanonicalMetric(f"no word metric for {ctx!r}")


class _BallCache:
    """Word length by breadth-first search, cached out to a truncation radius."""

    def __init__(self, ctx, radius):
        self.ctx = ctx
        self.radius = radius
        self._lengths = {}
        self._reached = -1

    def _grow(self, r):
        r = min(r, self.radius)
        if r <= self._reached:
            return
        for g, n in self.ctx.word_ball(r):
            self._lengths[self.ctx.key(g)] = n
        self._reached = r

    def __call__(self, g):
        key = self.ctx.key(g)
        r = 4
        while True:
            self._grow(r)
            if key in self._lengths:
                return float(self._lengths[key])
            if r >= self.radius:
                raise OverflowError(f"word length exceeds truncation radius {self.radius}")
            r *= 2


def tower_metric(ctx):
    """Ultrametric 2^-level from the subgroup filtration."""
    if isinstance(ctx, CyclicTower):
        table = np.array([0.0] + [2.0 ** -ctx.level(i) for i in range(1, ctx.order)])
    elif isinstance(ctx, InvolutionProduct):
        table = np.array([0.0] + [2.0 ** -ctx.level(ctx.element(i)) for i in range(1, ctx.order)])
    else:
        raise NoCanonicalMetric(f"{ctx!r} has no subgroup tower")
    return table_metric(ctx, table, "native_norm", meta={"formula": "2^-level"})


def discrete_metric(ctx):
    table = np.ones(ctx.order)
    table[ctx.identity_index] = 0.0
    return table_metric(ctx, table, "native_norm", meta={"formula": "0/1"})


def table_metric(ctx, norm_table, provenance, meta=None, bounded=True):
    """Metric on a finite group given by its norm on every element index."""
    norm_table = np.asarray(norm_table, dtype=float)
    index = ctx.index

    def norm(g):
        return float(norm_table[index(g)])

    def dist(g, h):
        return float(norm_table[ctx.table[ctx.inverse_table[index(h)], index(g)]])

    def batch_trace(gs, count, dyadic):
        base = np.array([index(g) for g in gs], dtype=np.int64)
        cur = base.copy()
        out = np.empty((len(gs), count))
        for j in range(count):
            out[:, j] = norm_table[cur]
            cur = ctx.table[cur, cur] if dyadic else ctx.table[cur, base]
        return out

    m = dict(meta or {})
    m["norm_table"] = norm_table
    return MetricHandle(
        ctx,
        norm,
        provenance,
        bounded=bounded,
        meta=m,
        dist=dist,
        batch_norm=lambda gs: norm_table[[index(g) for g in gs]],
        batch_trace=batch_trace,
    )


def euclidean_metric(ctx):
    def trace(gs, count, dyadic):
        base = np.linalg.norm(np.asarray(gs, dtype=float), axis=1)
        mult = (2.0 ** np.arange(count)) if dyadic else np.arange(1, count + 1, dtype=float)
        return np.outer(base, mult)

    return MetricHandle(
        ctx,
        lambda g: math.sqrt(sum(x * x for x in g)),
        "native_norm",
        batch_norm=lambda gs: np.linalg.norm(np.asarray(gs, dtype=float), axis=1),
        batch_trace=trace,
        meta={"formula": "|g - h|_2"},
    )


def native_metric(ctx):
    """Canonical compatible left-invariant metric of a group kind."""
    if isinstance(ctx, (UnitaryGroup, SpecialOrthogonal)):
        return chord_metric(ctx)
    if isinstance(ctx, Euclidean):
        return euclidean_metric(ctx)
    if isinstance(ctx, (IntegerLattice, FreeGroup, Heisenberg)):
        return word_length_metric(ctx)
    if isinstance(ctx, (CyclicTower, InvolutionProduct)):
        return tower_metric(ctx)
    if isinstance(ctx, FiniteTable):
        return discrete_metric(ctx)
    raise NoCanonicalMetric(f"no canonical metric for {ctx!r}")


# ---------------------------------------------------------------------------
# transformations


def transform_sqrt(d):
    """sqrt(d); subadditivity of sqrt keeps the triangle inequality."""
    base_batch = d.batch_norm
    base_trace = d.batch_trace
    return replace(
        d,
        norm=lambda g: math.sqrt(d.norm(g)),
        provenance="transformed(sqrt)",
        dist=(lambda g, h: math.sqrt(d.dist(g, h))) if d.dist else None,
        batch_norm=(lambda gs: np.sqrt(base_batch(gs))) if base_batch else None,
        batch_trace=(lambda gs, c, dy: np.sqrt(base_trace(gs, c, dy))) if base_trace else None,
        word_bound=(lambda r: d.word_bound(r * r)) if d.word_bound else None,
        meta={**d.meta, "base": d.provenance},
    )


def capped(d, cap=1.0):
    """min(d, cap)."""
    cap = float(cap)
    base_batch = d.batch_norm
    base_trace = d.batch_trace
    return replace(
        d,
        norm=lambda g: min(d.norm(g), cap),
        provenance="transformed(capped)",
        bounded=True,
        dist=(lambda g, h: min(d.dist(g, h), cap)) if d.dist else None,
        batch_norm=(lambda gs: np.minimum(base_batch(gs), cap)) if base_batch else None,
        batch_trace=(lambda gs, c, dy: np.minimum(base_trace(gs, c, dy), cap)) if base_trace else None,
        word_bound=None,
        meta={**d.meta, "base": d.provenance, "cap": cap},
    )


def restrict(d, sub):
    """The same distance evaluated on a subgroup context."""
    try:
        d.ctx.check(sub.identity)
    except PayloadError as exc:
        raise PayloadError(f"{sub!r} does not embed in {d.ctx!r}") from exc
    if isinstance(sub, MatrixGroup) != isinstance(d.ctx, MatrixGroup):
        raise PayloadError(f"{sub!r} does not embed in {d.ctx!r}")
    meta = {**d.meta, "restricted_from": repr(d.ctx)}
    return replace(d, ctx=sub, meta=meta)


def from_distance(ctx, dist, provenance="custom", **kw):
    """Handle from an arbitrary distance function (run ``validate`` on it)."""
    return MetricHandle(ctx, lambda g: dist(g, ctx.identity), provenance, dist=dist, **kw)


# ---------------------------------------------------------------------------
# validation & sampling


def validate(d, elements, tol=1e-10, left_translates=None):
    """Check metric axioms and left-invariance on all triples from ``elements``.

    Raises ``MetricValidationError`` naming the first failing triple.
    Returns the number of triples checked.
    """
    ctx = d.ctx
    els = list(elements)
    shifts = list(left_translates) if left_translates is not None else els
    count = 0
    for g in els:
        if abs(d(g, g)) > tol:
            raise MetricValidationError(f"d(g, g) = {d(g, g)} for g = {ctx.format(g)}")
    for g in els:
        for h in els:
            dgh = d(g, h)
            if dgh < -tol:
                raise MetricValidationError("negative distance")
            if abs(dgh - d(h, g)) > tol * max(1.0, dgh):
                raise MetricValidationError(f"asymmetric at ({ctx.format(g)}, {ctx.format(h)})")
            if dgh <= tol and not ctx.equal(g, h, 1e-8) and ctx.discrete:
                raise MetricValidationError("distinct elements at distance 0")
            for k in els:
                if d(g, k) > dgh + d(h, k) + tol * max(1.0, dgh):
                    raise MetricValidationError(
                        f"triangle inequality fails at ({ctx.format(g)}, {ctx.format(h)}, {ctx.format(k)})"
                    )
                count += 1
            for k in shifts:
                moved = d(ctx.multiply(k, g), ctx.multiply(k, h))
                if abs(moved - dgh) > tol * max(1.0, dgh):
                    raise MetricValidationError(
                        f"not left-invariant: d(kg, kh) = {moved} != {dgh} for k = {ctx.format(k)}"
                    )
    return count


def is_compatible_on(d, sequence):
    """Topology witness: d(g_i, 1) -> 0 iff the payloads tend to the identity.

    ``sequence`` should be ordered so that either both tails vanish or neither does.
    """
    ctx = d.ctx
    tail = sequence[len(sequence) // 2 :]
    dist = [d.to_identity(g) for g in tail]
    disp = [ctx.displacement(g) for g in tail]
    return (dist[-1] < 1e-6 * max(dist[0], 1e-300) or dist[-1] < 1e-9) == (
        disp[-1] < 1e-6 * max(disp[0], 1e-300) or disp[-1] < 1e-9
    )


class _Ray:
    """exp(t X_b) for a batch of unit tangent directions X_b."""

    def __init__(self, ctx, rng, count):
        self.ctx = ctx
        self.kind = "generic"
        if isinstance(ctx, (UnitaryGroup, SpecialOrthogonal)) and not isinstance(ctx, DiagonalTorus) and ctx.n > 1:
            self.kind = "eigh"
            self.real = isinstance(ctx, SpecialOrthogonal)
            x = random_skew_hermitian_batch(rng, count, ctx.n, 1.0, real=self.real)
            self.w, self.v = np.linalg.eigh(-1j * x.astype(np.complex128))
            return
        dirs = [ctx.random_tangent(rng, 1.0) for _ in range(count)]
        if isinstance(ctx, Euclidean):
            self.kind = "vector"
            self.dirs = np.asarray(dirs, dtype=float)
        elif isinstance(ctx, DiagonalTorus):
            self.kind = "diag"
            self.theta = np.stack([np.diag(x).imag for x in dirs])
        else:
            self.dirs = dirs

    @property
    def t_cap(self):
        return math.pi if self.kind in ("eigh", "diag") else math.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "vector":
            return [tuple(r) for r in self.dirs * t[:, None]]
        if self.kind == "eigh":
            e = np.exp(1j * self.w * t[:, None])
            m = (self.v * e[:, None, :]) @ np.swapaxes(self.v, 1, 2).conj()
            return m.real if self.real else m
        if self.kind == "diag":
            return [np.diag(np.exp(1j * th * s)) for th, s in zip(self.theta, t)]
        return [self.ctx.exp(s * x) for s, x in zip(t, self.dirs)]


def radial_samples(ctx, d, targets, rng, iterations=44):
    """Elements exp(tX) with d(exp(tX), 1) approximately equal to each target.

    Bisection in t along random directions; elements whose ray cannot reach
    the target are dropped. The returned element sits on the lower side, so
    d <= target holds up to rounding.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.size == 0:
        return [], np.zeros(0)
    ray = _Ray(ctx, rng, targets.size)
    hi = np.full(targets.size, min(1.0, ray.t_cap))
    f_hi = d.norms(ray(hi))
    for _ in range(64):
        short = (f_hi < targets) & (hi < ray.t_cap)
        if not short.any():
            break
        hi = np.where(short, np.minimum(hi * 2, ray.t_cap), hi)
        f_hi = d.norms(ray(hi))
    ok = f_hi >= targets
    lo = np.zeros(targets.size)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f = d.norms(ray(mid))
        below = f <= targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    els = ray(lo)
    vals = d.norms(els)
    keep = [i for i in range(targets.size) if ok[i]]
    return [els[i] for i in keep], vals[keep]


def ball_elements(d, radius, strict=False, limit=None):
    """All elements with d(g, 1) <= radius on finite/word-bounded discrete groups."""
    ctx = d.ctx
    if isinstance(ctx, FiniteGroup):
        els = ctx.elements
        vals = d.norms(els)
    elif isinstance(ctx, DiscreteGroup) and d.word_bound is not None:
        wr = d.word_bound(radius)
        if not math.isfinite(wr):
            raise OverflowError("ball is not finite in word length")
        els = [g for g, _ in ctx.word_ball(int(math.floor(wr + 1e-9)))]
        vals = d.norms(els)
    else:
        raise TypeError(f"cannot enumerate balls of {d.provenance} on {ctx!r}")
    mask = vals < radius if strict else vals <= radius
    out = [g for g, m in zip(els, mask) if m]
    return out, vals[mask]


def sample_ball(ctx, metric, radius, count, seed=0):
    """Deterministic sample of elements with metric distance to identity <= radius.

    Exhaustive on finite groups and word-bounded discrete groups when the
    ball has at most ``count`` elements. Raises ``EmptyBallError`` if a
    continuous group yields no sample (radius below resolution).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    if ctx.discrete:
        els, _ = ball_elements(metric, radius)
        if len(els) <= count:
            return els
        pick = np.sort(rng.choice(len(els), size=count, replace=False))
        return [els[i] for i in pick]
    targets = radius * rng.random(count)
    els, vals = radial_samples(ctx, metric, targets, rng)
    out = [g for g, v in zip(els, vals) if v <= radius]
    if not out:
        raise EmptyBallError(f"no element of {ctx!r} found within radius {radius}")
    return out
