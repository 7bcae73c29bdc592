"""Metrics built from filtrations (chain infima) and bi-invariantisation."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConstructionError, FiltrationError, TruncationError
from .filtrations import BIRKHOFF, KAKUTANI
from .groups import FiniteGroup, IntegerLattice
from .metrics import MetricHandle, capped, table_metric

# Dense chain search over the complete step graph is quadratic in memory.
CHAIN_NODE_LIMIT = 2**12


@dataclass(frozen=True)
class Truncation:
    """Working set for chain searches on infinite groups.

    Chains stay inside ``nodes`` and move by elements of ``steps``; distances
    found this way are upper bounds on the untruncated chain infimum.
    """

    nodes: list
    steps: list

    @classmethod
    def interval(cls, radius):
        """Z restricted to [-radius, radius], with every step that keeps a chain inside."""
        r = int(radius)
        return cls([(x,) for x in range(-r, r + 1)], [(s,) for s in range(-2 * r, 2 * r + 1)])


class LevelGauge:
    """delta(g, f) = least weight of a level containing f^-1 g."""

    def __init__(self, filtration):
        self.filtration = filtration
        self.ctx = filtration.ctx

    def __call__(self, g, f):
        ctx = self.ctx
        return self.filtration.gauge(ctx.multiply(ctx.invert(f), g))

    def to_identity(self, g):
        return self.filtration.gauge(g)

    def table(self):
        """Gauge on every element of a finite group, vectorised over levels."""
        filt = self.filtration
        ctx = self.ctx
        out = np.full(ctx.order, np.inf)
        for n in filt.indices[::-1]:
            lv = filt.levels[n]
            if lv.members is not None:
                idx = np.fromiter(lv.members, dtype=np.int64)
            else:
                idx = np.array([i for i, g in enumerate(ctx.elements) if lv.predicate(g)], dtype=np.int64)
            out[idx] = filt.weight(n)
        out[ctx.identity_index] = 0.0
        return out


def chain_infimum(ctx, weight_of, truncation=None):
    """Shortest chain sums from the identity with step cost ``weight_of``.

    Returns ``(nodes, distances, gauge_values)``. Left-invariance reduces all
    pairs to the single source at the identity.
    """
    if isinstance(ctx, FiniteGroup):
        if ctx.order > CHAIN_NODE_LIMIT:
            raise ConstructionError(f"{ctx!r} has {ctx.order} elements; chain search is capped at {CHAIN_NODE_LIMIT}")
        nodes = ctx.elements
        gauge = weight_of(None)
        steps_idx = np.flatnonzero(np.isfinite(gauge) & (np.arange(ctx.order) != ctx.identity_index))
        step = ctx.table[:, steps_idx]
        dist = kernels.dijkstra_steps(step, gauge[steps_idx], ctx.identity_index)
        return nodes, dist, gauge
    if truncation is None:
        raise ConstructionError(f"{ctx!r} is not finite and no chain truncation was supplied")
    nodes = [ctx.check(x) for x in truncation.nodes]
    steps = [ctx.check(s) for s in truncation.steps]
    sw = np.array([weight_of(s) for s in steps], dtype=float)
    keep = [i for i in range(len(steps)) if np.isfinite(sw[i]) and not ctx.is_identity(steps[i])]
    steps = [steps[i] for i in keep]
    sw = sw[keep]
    table = ctx.step_table(nodes, steps)
    pos = {ctx.key(x): i for i, x in enumerate(nodes)}
    source = pos.get(ctx.key(ctx.identity))
    if source is None:
        raise TruncationError("truncation does not contain the identity")
    dist = kernels.dijkstra_steps(table, sw, source)
    gauge = np.array([weight_of(x) for x in nodes], dtype=float)
    return nodes, dist, gauge


def _lookup_handle(ctx, nodes, dist, provenance, meta):
    pos = {ctx.key(x): i for i, x in enumerate(nodes)}

    def norm(g):
        i = pos.get(ctx.key(g))
        if i is None:
            raise TruncationError(f"{ctx.format(g)} lies outside the working truncation")
        return float(dist[i])

    return MetricHandle(ctx, norm, provenance, bounded=False, meta=meta, batch_norm=lambda gs: np.array([norm(g) for g in gs]))


def _gauge_fn(filtration, ctx):
    gauge = LevelGauge(filtration)
    if isinstance(ctx, FiniteGroup):
        table = gauge.table()
        return lambda g: table if g is None else float(table[ctx.index(g)])
    return gauge.to_identity


def birkhoff_metric(ctx, filtration, truncation=None, verify=True):
    """Chain infimum of the cube-law gauge, with the sandwich delta/2 <= d <= delta checked.

    Exact on finite groups; on other groups chains are confined to
    ``truncation`` and the result is flagged as an upper bound.
    """
    if filtration.law != BIRKHOFF:
        raise FiltrationError(f"birkhoff_metric needs law {BIRKHOFF}, got {filtration.law}")
    if verify and isinstance(ctx, FiniteGroup):
        filtration.verify()
    nodes, dist, gauge = chain_infimum(ctx, _gauge_fn(filtration, ctx), truncation)
    finite = np.isfinite(gauge)
    lower_ok = bool(np.all(0.5 * gauge[finite] <= dist[finite]))
    upper_ok = bool(np.all(dist <= gauge))
    meta = {
        "law": BIRKHOFF,
        "sandwich": "delta/2 <= d <= delta",
        "sandwich_holds": lower_ok and upper_ok,
        "nodes": len(nodes),
        "upper_bound": not isinstance(ctx, FiniteGroup),
        "gauge": gauge,
        "distances": dist,
    }
    if not (lower_ok and upper_ok):
        raise ConstructionError("Birkhoff sandwich delta/2 <= d <= delta violated")
    if isinstance(ctx, FiniteGroup):
        return table_metric(ctx, dist, "birkhoff", meta=meta, bounded=True)
    return _lookup_handle(ctx, nodes, dist, "birkhoff", meta)


def measured_sandwich(ctx, filtration, d_values, nodes=None):
    """Constants (c, C) with closed B(c 2^-n) inside V_n inside closed B(C 2^-n) for every level.

    C is exact; c is the largest power of two in (0, 1] that works.
    """
    big_c = 0.0
    small_c = 1.0
    exact = isinstance(ctx, FiniteGroup) and nodes is None
    nodes = ctx.elements if nodes is None else nodes
    for n in filtration.indices:
        lv = filtration.levels[n]
        w = filtration.weight(n)
        if exact and lv.members is not None:
            inside = np.zeros(len(nodes), dtype=bool)
            inside[np.fromiter(lv.members, dtype=np.int64)] = True
        else:
            inside = np.array([lv.contains(ctx, x) for x in nodes])
        if inside.any():
            big_c = max(big_c, float(d_values[inside].max()) / w)
        outside = d_values[~inside]
        if outside.size:
            # the closed ball of radius c*w must miss every outside point
            r = float(outside.min()) / w
            while small_c > 0 and small_c >= r:
                small_c /= 2
    return small_c, big_c


def kakutani_metric(ctx, filtration, truncation=None, verify=True):
    """Chain infimum of the square-law gauge delta = 2^-n, with measured (c, C) and C/c <= 4 asserted."""
    if filtration.law != KAKUTANI:
        raise FiltrationError(f"kakutani_metric needs law {KAKUTANI}, got {filtration.law}")
    if verify and isinstance(ctx, FiniteGroup):
        filtration.verify()
    nodes, dist, gauge = chain_infimum(ctx, _gauge_fn(filtration, ctx), truncation)
    c, big_c = measured_sandwich(ctx, filtration, dist, None if isinstance(ctx, FiniteGroup) else nodes)
    ratio = big_c / c if c > 0 else np.inf
    meta = {
        "law": KAKUTANI,
        "c": c,
        "C": big_c,
        "ratio": ratio,
        "nodes": len(nodes),
        "upper_bound": not isinstance(ctx, FiniteGroup),
        "gauge": gauge,
        "distances": dist,
    }
    if ratio > 4.0:
        raise ConstructionError(f"Kakutani sandwich ratio {ratio} exceeds 4")
    if isinstance(ctx, FiniteGroup):
        return table_metric(ctx, dist, "kakutani", meta=meta, bounded=True)
    return _lookup_handle(ctx, nodes, dist, "kakutani", meta)


def bi_invariantize(ctx, d, cap=None, conjugators=None, budget=256, seed=0):
    """sup over f of d(g f, h f), after capping d at ``cap``.

    Exact on finite groups. Otherwise the sup runs over ``conjugators`` (or
    ``budget`` elements sampled near the identity at mixed scales) and is a
    lower bound, flagged in the metadata.
    """
    if cap is not None:
        d = capped(d, cap)
    elif not d.bounded:
        raise ValueError("bi_invariantize needs a bounded metric or a cap")
    if isinstance(ctx, FiniteGroup):
        base = d.norms(ctx.elements)
        table = ctx.table
        inv = ctx.inverse_table
        idx = np.arange(ctx.order)
        # conj[f, g] = index of f^-1 g f
        conj = table[table[inv][:, idx], idx[:, None]]
        out = base[conj].max(axis=0)
        return table_metric(
            ctx, out, "bi_invariantised", meta={"cap": cap, "base": d.provenance, "exact": True}, bounded=True
        )
    if conjugators is None:
        rng = np.random.default_rng(seed)
        conjugators = [ctx.identity]
        scales = np.geomspace(1e-3, 3.0, max(budget - 1, 1))
        for s in scales:
            if hasattr(ctx, "sample_near_identity"):
                conjugators.append(ctx.sample_near_identity(rng, float(s)))
            else:
                conjugators.append(ctx.sample_at_scale(rng, float(s) * 8))
    conjugators = list(conjugators)
    norm0 = d.norm

    def norm(g):
        return max(norm0(ctx.conjugate(g, f)) for f in conjugators)

    def batch(gs):
        vals = np.zeros(len(gs))
        for f in conjugators:
            vals = np.maximum(vals, d.norms([ctx.conjugate(g, f) for g in gs]))
        return vals

    return MetricHandle(
        ctx,
        norm,
        "bi_invariantised",
        bounded=True,
        batch_norm=batch,
        meta={"cap": cap, "base": d.provenance, "exact": False, "lower_bound": True, "sample_budget": len(conjugators)},
    )


def standard_truncation(ctx, radius):
    if isinstance(ctx, IntegerLattice) and ctx.d == 1:
        return Truncation.interval(radius)
    raise ConstructionError(f"no standard truncation for {ctx!r}")
