"""Word metrics, path refinements of a metric, quasi-isometry and bi-Lipschitz constants.

Maximality is certified only in the form "quasi-isometric to a word metric
of a generating set", which is equivalent for groups generated by a coarsely
bounded set; reports state this.
"""

from collections import deque
from dataclasses import dataclass, field
import heapq
import math
from typing import Optional

import numpy as np

from . import kernels
from .constructions import Truncation
from .errors import DegenerateDenominator, TruncationError
from .groups import EXHAUSTIVE_LIMIT, DiscreteGroup, Euclidean, FiniteGroup, IntegerLattice, MatrixGroup
from .metrics import MetricHandle, ball_elements, radial_samples, table_metric

QI_NOTE = "maximality is certified only as quasi-isometry to the word metric of a generating set"


@dataclass(frozen=True)
class GeneratingSet:
    """Symmetric, identity-free finite set of generators."""

    ctx: object
    elements: tuple
    symmetric: bool = True

    @classmethod
    def of(cls, ctx, elements):
        seen = {}
        for g in elements:
            g = ctx.check(g)
            for h in (g, ctx.invert(g)):
                if not ctx.is_identity(h):
                    seen.setdefault(ctx.key(h), h)
        if not seen:
            raise ValueError("generating set is empty")
        return cls(ctx, tuple(seen[k] for k in sorted(seen, key=repr)))

    @classmethod
    def ball(cls, d, radius, strict=False):
        els, _ = ball_elements(d, radius, strict=strict)
        return cls.of(d.ctx, els)

    def __len__(self):
        return len(self.elements)

    def generates(self, truncation=None):
        """Every node of the finite group (or truncation) is reachable."""
        _, dist = word_distances(self.ctx, self, truncation)
        return bool(np.all(dist >= 0))


def _nodes(ctx, truncation):
    if isinstance(ctx, FiniteGroup):
        return ctx.elements, ctx.identity_index
    if truncation is None:
        return None, None
    nodes = [ctx.check(x) for x in truncation.nodes]
    pos = {ctx.key(x): i for i, x in enumerate(nodes)}
    src = pos.get(ctx.key(ctx.identity))
    if src is None:
        raise TruncationError("truncation does not contain the identity")
    return nodes, src


def word_distances(ctx, V, truncation=None):
    """Word lengths from the identity to every node (-1 when unreachable)."""
    nodes, src = _nodes(ctx, truncation)
    if nodes is None:
        raise TruncationError(f"{ctx!r} needs a truncation for exhaustive word lengths")
    step = ctx.step_table(nodes, list(V.elements))
    dist = kernels.bfs_steps(step, np.arange(len(V)), src)
    return nodes, dist


def word_metric(ctx, V, g, f, truncation=None, limit=EXHAUSTIVE_LIMIT):
    """rho_V(g, f): least k with g = f v_1 ... v_k, by breadth-first search.

    Returns ``math.inf`` when the target is unreachable inside a finite group
    or truncation; raises ``TruncationError`` (with ``lower_bound``) when an
    unbounded search exhausts ``limit`` nodes.
    """
    target = ctx.multiply(ctx.invert(f), g)
    if isinstance(ctx, FiniteGroup) or truncation is not None:
        nodes, dist = word_distances(ctx, V, truncation)
        pos = {ctx.key(x): i for i, x in enumerate(nodes)}
        i = pos.get(ctx.key(target))
        if i is None:
            raise TruncationError(f"{ctx.format(target)} is outside the truncation")
        return math.inf if dist[i] < 0 else int(dist[i])
    key = ctx.key(target)
    seen = {ctx.key(ctx.identity): 0}
    if key in seen:
        return 0
    frontier = deque([ctx.identity])
    depth = 0
    while frontier:
        x = frontier.popleft()
        depth = seen[ctx.key(x)]
        for v in V.elements:
            y = ctx.multiply(x, v)
            k = ctx.key(y)
            if k in seen:
                continue
            seen[k] = depth + 1
            if k == key:
                return depth + 1
            if len(seen) > limit:
                err = TruncationError(f"word search exceeded {limit} nodes; length > {depth}")
                err.lower_bound = depth + 1
                raise err
            frontier.append(y)
    return math.inf


def word_metric_handle(ctx, V, truncation=None):
    nodes, dist = word_distances(ctx, V, truncation)
    values = np.where(dist >= 0, dist.astype(float), np.inf)
    meta = {"generators": len(V), "upper_bound": False}
    if isinstance(ctx, FiniteGroup):
        return table_metric(ctx, values, "word", meta=meta, bounded=True)
    return _node_handle(ctx, nodes, values, "word", meta)


def _node_handle(ctx, nodes, values, provenance, meta):
    pos = {ctx.key(x): i for i, x in enumerate(nodes)}

    def norm(g):
        i = pos.get(ctx.key(g))
        if i is None:
            raise TruncationError(f"{ctx.format(g)} is outside the truncation")
        return float(values[i])

    def batch(gs):
        return np.array([norm(g) for g in gs])

    return MetricHandle(ctx, norm, provenance, bounded=False, meta={**meta, "nodes": len(nodes)}, batch_norm=batch)


def sparse_dijkstra(step, weight, source):
    """Heap-based single-source shortest paths on a step table, for few steps per node."""
    n = step.shape[0]
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        for s, v in enumerate(step[u]):
            if v < 0:
                continue
            nd = du + weight[s]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, int(v)))
    return dist


def path_distances(ctx, d, V, truncation=None):
    nodes, src = _nodes(ctx, truncation)
    if nodes is None:
        raise TruncationError(f"{ctx!r} needs a truncation for exact path distances")
    steps = list(V.elements)
    w = d.norms(steps)
    step = ctx.step_table(nodes, steps)
    if len(steps) <= 64 or len(nodes) > 4096:
        dist = sparse_dijkstra(step, np.where(np.abs(w) < 1e-15, 0.0, w), src)
    else:
        dist = kernels.dijkstra_steps(step, w, src)
    return nodes, dist


def path_metric_handle(ctx, d, V, truncation=None, max_split=256):
    """The refinement inf sum d(v_i, 1) over factorisations g = v_1 ... v_n with v_i in V.

    Exact on finite groups; chains confined to ``truncation`` otherwise. On
    matrix groups V may be a radius r standing for the ball B_d(r); g is
    split into equal principal roots, which gives an upper bound.
    """
    if isinstance(ctx, MatrixGroup):
        radius = float(V) if isinstance(V, (int, float)) else float(d.norms(list(V.elements)).max())
        return _split_handle(ctx, d, radius, max_split)
    nodes, dist = path_distances(ctx, d, V, truncation)
    meta = {"generators": len(V), "base": d.provenance, "upper_bound": not isinstance(ctx, FiniteGroup)}
    if isinstance(ctx, FiniteGroup):
        return table_metric(ctx, dist, "path_refined", meta=meta, bounded=True)
    return _node_handle(ctx, nodes, dist, "path_refined", meta)


def _split_handle(ctx, d, radius, max_split):
    def norm(g):
        if ctx.is_identity(g, 1e-15):
            return 0.0
        x = ctx.log(g)
        best = math.inf
        for m in range(1, max_split + 1):
            v = ctx.exp(x / m)
            dv = d.to_identity(v)
            if dv <= radius:
                best = min(best, m * dv)
        if not math.isfinite(best):
            raise TruncationError(f"no factorisation into {max_split} steps inside the ball")
        return best

    return MetricHandle(
        ctx,
        norm,
        "path_refined",
        bounded=True,
        meta={"ball_radius": radius, "upper_bound": True, "max_split": max_split, "base": d.provenance},
    )


def path_metric_ball(ctx, d, radius, max_split=256):
    """Path refinement over the ball generating set B_d(radius) on a matrix group."""
    return _split_handle(ctx, d, radius, max_split)


def path_metric(ctx, d, V, g, f, truncation=None):
    """partial(g, f) from a fresh path refinement (use ``path_metric_handle`` for repeated queries)."""
    h = path_metric_handle(ctx, d, V, truncation)
    value = h(g, f)
    if not math.isfinite(value):
        raise TruncationError("target unreachable inside the truncation")
    return value


# ---------------------------------------------------------------------------
# quasi-isometry


@dataclass
class QIReport:
    K: float
    C: float
    max_violation: float
    sample_budget: int
    verdict: str = "holds_on_budget"
    scale_ratios: list = field(default_factory=list)
    witness_scales: Optional[list] = None
    note: str = QI_NOTE

    def to_dict(self):
        return {
            "K": self.K,
            "C": self.C,
            "max_violation": self.max_violation,
            "sample_budget": self.sample_budget,
            "verdict": self.verdict,
            "scale_ratios": [[float(a), float(b)] for a, b in self.scale_ratios],
            "witness_scales": None if self.witness_scales is None else [[float(a), float(b)] for a, b in self.witness_scales],
            "note": self.note,
        }


def scale_samples(ctx, d1, budget, seed, top=20):
    """(element, scale index) pairs on a geometric ladder 2^0 .. 2^top."""
    rng = np.random.default_rng(seed)
    per = max(1, budget // (top + 1))
    out = []
    if isinstance(ctx, FiniteGroup) and ctx.exhaustive:
        return [(g, None) for g in ctx.elements if not ctx.is_identity(g)]
    if isinstance(ctx, IntegerLattice):
        for j in range(top + 1):
            for _ in range(per):
                v = rng.standard_normal(ctx.d)
                v *= 2.0**j * (1 + rng.random()) / max(np.abs(v).sum(), 1e-300)
                g = tuple(int(round(x)) for x in v)
                if any(g):
                    out.append((g, j))
        return out
    if isinstance(ctx, DiscreteGroup):
        for j in range(min(top, 12) + 1):
            for _ in range(per):
                g = ctx.sample_at_scale(rng, 2.0**j)
                if not ctx.is_identity(g):
                    out.append((g, j))
        return out
    if isinstance(ctx, Euclidean):
        radii = [2.0**j for j in range(top + 1)]
    else:
        radii = [2.0 ** (1 - j) for j in range(min(top, 12) + 1)][::-1]
    for j, r in enumerate(radii):
        els, _ = radial_samples(ctx, d1, r * (0.5 + 0.5 * rng.random(per)), rng)
        out.extend((g, j) for g in els)
    return out


def fit_quasi_isometry(ctx, d1, d2, budget=2048, seed=0, elements=None, top=20, growth_factor=4.0):
    """Fit (K, C) with d1/K - C <= d2 <= K d1 + C on samples spanning the scale ladder.

    K is the largest two-sided ratio seen on the upper half of the scales, C
    the least additive slack making every sample satisfy the envelope. A ratio
    that keeps growing across the upper scales is reported as ``refuted``.
    """
    if elements is not None:
        samples = [(ctx.check(g), None) for g in elements if not ctx.is_identity(ctx.check(g))]
    else:
        samples = scale_samples(ctx, d1, budget, seed, top)
    gs = [g for g, _ in samples]
    x = d1.norms(gs)
    y = d2.norms(gs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(np.where(x > 0, y / x, np.inf), np.where(y > 0, x / y, np.inf))
    ratio = np.where((x == 0) & (y == 0), 1.0, ratio)
    scale = np.array([s if s is not None else max(0, int(math.floor(math.log2(max(a, b, 1.0)))))
                      for (_, s), a, b in zip(samples, x, y)])
    levels = sorted(set(scale.tolist()))
    per_scale = [(2.0**s, float(ratio[scale == s].max())) for s in levels]
    upper = levels[len(levels) // 2:]
    bounded_group = isinstance(ctx, FiniteGroup)
    if len(levels) >= 4 and not bounded_group:
        r_mid = per_scale[len(levels) // 2][1]
        r_top = per_scale[-1][1]
        tail = np.log2([r for _, r in per_scale[len(levels) // 2:]])
        slope = np.polyfit(np.arange(len(tail)), tail, 1)[0] if len(tail) >= 2 else 0.0
        rising = all(b >= a * (1 - 1e-12) for (_, a), (_, b) in zip(per_scale[len(levels) // 2:], per_scale[len(levels) // 2 + 1:]))
        if r_top >= growth_factor * r_mid and slope > 0.1 and rising:
            return QIReport(math.inf, math.inf, math.inf, len(gs), "refuted", per_scale, per_scale[len(levels) // 2:])
    mask = np.isin(scale, upper)
    K = float(max(1.0, ratio[mask].max() if mask.any() else 1.0))
    C = float(max(0.0, np.max(y - K * x, initial=0.0), np.max(x / K - y, initial=0.0)))
    viol = np.maximum(y - (K * x + C), (x / K - C) - y)
    max_violation = float(max(0.0, np.max(viol, initial=0.0)))
    return QIReport(K, C, max_violation, len(gs), "holds_on_budget", per_scale)


# ---------------------------------------------------------------------------
# bi-Lipschitz constant


@dataclass
class BiLipschitzReport:
    L: float
    L_forward: float
    L_backward: float
    K_forward: float
    K_backward: float
    M: float
    N: float
    M_back: float
    N_back: float
    inf_outside_forward: float
    inf_outside_backward: float
    empirical_ratio: float
    verified: bool
    direct: bool
    sample_budget: int

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.__dict__.items()}


def _one_way(x, y, V_radius, M, N):
    """x <= L y with L = max{K, M + N / inf(y outside B_y(V_radius))}, K local on the ball."""
    inside = y < V_radius
    with np.errstate(divide="ignore", invalid="ignore"):
        k = float(np.max(np.where(inside & (y > 0), x / y, 0.0), initial=0.0))
    k = max(k, 1.0)
    outside = y[~inside]
    if outside.size == 0:
        return k, k, math.inf
    inf_out = float(outside.min())
    if inf_out <= 1e-12:
        raise DegenerateDenominator(f"inf of the metric outside the ball is {inf_out:g}; shrink V_radius")
    return max(k, M + N / inf_out), k, inf_out


def bilipschitz_constant(ctx, d, dd, V_radius, budget=4096, seed=0, elements=None, qi=None):
    """L with d/L <= dd <= L d, from  L = max{K, M + N / inf(dd(y,1) : y not in V)}.

    K is the local Lipschitz constant on V = B_dd(V_radius); (M, N) bound
    d <= M dd + N (from ``qi`` when given, else fitted on the sample). The
    symmetric constant is computed with the roles swapped, and both
    inequalities are verified on every sample.
    """
    if elements is None:
        if isinstance(ctx, FiniteGroup) and ctx.exhaustive:
            elements = [g for g in ctx.elements if not ctx.is_identity(g)]
        else:
            elements = [g for g, _ in scale_samples(ctx, d, budget, seed)]
    gs = [ctx.check(g) for g in elements]
    x = d.norms(gs)
    y = dd.norms(gs)
    with np.errstate(divide="ignore", invalid="ignore"):
        emp = float(np.max(np.maximum(np.where(y > 0, x / y, 1.0), np.where(x > 0, y / x, 1.0)), initial=1.0))
    if np.array_equal(x, y):
        return BiLipschitzReport(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, math.inf, math.inf, 1.0, True, True,
                                 len(gs))
    if qi is None:
        qi = fit_quasi_isometry(ctx, d, dd, elements=gs)
    if qi.verdict == "refuted":
        raise ValueError("the metrics are not quasi-isometric on the sample; no bi-Lipschitz constant")
    # (1/K) d - C <= dd  gives d <= K dd + K C;  dd <= K d + C  as is
    m1, n1 = qi.K, qi.K * qi.C
    m2, n2 = qi.K, qi.C
    L1, k1, i1 = _one_way(x, y, V_radius, m1, n1)
    L2, k2, i2 = _one_way(y, x, V_radius, m2, n2)
    L = max(L1, L2)
    ok = bool(np.all(x <= L * y * (1 + 1e-12) + 1e-15) and np.all(y <= L * x * (1 + 1e-12) + 1e-15))
    return BiLipschitzReport(L, L1, L2, k1, k2, m1, n1, m2, n2, i1, i2, emp, ok, False, len(gs))
