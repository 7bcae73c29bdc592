"""Nested symmetric identity neighbourhoods with a growth law."""

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .errors import FiltrationError
from .groups import CyclicTower, FiniteGroup, InvolutionProduct

BIRKHOFF = "birkhoff_cubes"
KAKUTANI = "kakutani_squares"
LAWS = (BIRKHOFF, KAKUTANI)


@dataclass(frozen=True)
class Level:
    """One neighbourhood, either an explicit finite set of element keys or a predicate."""

    index: int
    members: Optional[frozenset] = None
    predicate: Optional[Callable[[Any], bool]] = None
    label: str = ""

    def contains(self, ctx, g):
        if self.members is not None:
            return ctx.key(g) in self.members
        return bool(self.predicate(g))


class Filtration:
    """Levels V_n with weight 2^n (Birkhoff, V_n^3 inside V_{n+1}) or 2^-n (Kakutani, V_n^2 inside V_{n-1}).

    Beyond the finest listed level the neighbourhoods are taken to shrink to
    the identity, so the gauge of the identity is 0.
    """

    def __init__(self, ctx, law, levels):
        if law not in LAWS:
            raise FiltrationError(f"unknown growth law {law!r}")
        self.ctx = ctx
        self.law = law
        self.levels = {lv.index: lv for lv in levels}
        if not self.levels:
            raise FiltrationError("filtration has no levels")

    @property
    def indices(self):
        """Level indices ordered from finest to coarsest."""
        keys = sorted(self.levels)
        return keys if self.law == BIRKHOFF else keys[::-1]

    def weight(self, n):
        return 2.0**n if self.law == BIRKHOFF else 2.0**-n

    def coarser(self, n):
        return n + 1 if self.law == BIRKHOFF else n - 1

    def gauge(self, g):
        """delta(g, 1): least weight of a level containing g."""
        ctx = self.ctx
        if ctx.is_identity(g):
            return 0.0
        for n in self.indices:
            if self.levels[n].contains(ctx, g):
                return self.weight(n)
        return np.inf

    def level_of(self, g):
        for n in self.indices:
            if self.levels[n].contains(self.ctx, g):
                return n
        return None

    def refine(self, extra_levels):
        """New filtration with levels added (law unchanged)."""
        merged = dict(self.levels)
        for lv in extra_levels:
            merged[lv.index] = lv
        return Filtration(self.ctx, self.law, merged.values())

    def describe(self):
        return {
            "law": self.law,
            "levels": [
                {"index": n, "size": len(self.levels[n].members) if self.levels[n].members is not None else None,
                 "label": self.levels[n].label}
                for n in self.indices
            ],
        }

    # verification ---------------------------------------------------------
    def verify(self, samples=None, rng=None, triples=2000):
        """Check symmetry, nesting and the growth law.

        Exhaustive on finite groups with explicit levels; otherwise on the
        given ``samples``. Raises ``FiltrationError`` naming the level.
        """
        ctx = self.ctx
        if isinstance(ctx, FiniteGroup) and all(lv.members is not None for lv in self.levels.values()):
            return self._verify_finite()
        if samples is None:
            raise FiltrationError("sampled verification needs samples")
        rng = rng or np.random.default_rng(0)
        idx = self.indices
        for n in idx:
            lv = self.levels[n]
            inside = [g for g in samples if lv.contains(ctx, g)]
            for g in inside:
                if not lv.contains(ctx, ctx.invert(g)):
                    raise FiltrationError(f"level {n} is not symmetric at {ctx.format(g)}", level=n)
            up = self.coarser(n)
            if up in self.levels:
                for g in inside:
                    if not self.levels[up].contains(ctx, g):
                        raise FiltrationError(f"level {n} is not nested in level {up}", level=n)
                if inside:
                    power = 3 if self.law == BIRKHOFF else 2
                    for _ in range(triples):
                        prod = ctx.identity
                        for _ in range(power):
                            prod = ctx.multiply(prod, inside[int(rng.integers(len(inside)))])
                        if not self.levels[up].contains(ctx, prod):
                            raise FiltrationError(f"growth law fails from level {n} to {up}", level=n)
        return True

    def _verify_finite(self):
        ctx = self.ctx
        table = ctx.table
        inv = ctx.inverse_table
        idx = self.indices
        for n in idx:
            members = np.array(sorted(self.levels[n].members), dtype=np.int64)
            if ctx.identity_index not in self.levels[n].members:
                raise FiltrationError(f"level {n} does not contain the identity", level=n)
            if not set(inv[members].tolist()) <= self.levels[n].members:
                raise FiltrationError(f"level {n} is not symmetric", level=n)
            up = self.coarser(n)
            if up not in self.levels:
                continue
            upper = self.levels[up].members
            if not self.levels[n].members <= upper:
                raise FiltrationError(f"level {n} is not nested in level {up}", level=n)
            prod = np.unique(table[np.ix_(members, members)])
            if self.law == BIRKHOFF:
                prod = np.unique(table[np.ix_(prod, members)])
            if not set(prod.tolist()) <= upper:
                law = "V^3" if self.law == BIRKHOFF else "V^2"
                raise FiltrationError(f"growth law {law} fails from level {n} to {up}", level=n)
        coarsest = self.levels[idx[-1]].members
        if self.law == BIRKHOFF and len(coarsest) != ctx.order:
            raise FiltrationError("levels do not cover the group", level=idx[-1])
        if self.law == KAKUTANI and self.levels[idx[0]].members != {ctx.identity_index}:
            raise FiltrationError("finest level is not {1}: levels do not form a basis", level=idx[0])
        return True


# ---------------------------------------------------------------------------
# standard filtrations


def explicit(ctx, law, levels, labels=None):
    """``levels`` maps index -> iterable of payloads."""
    out = []
    for n, els in levels.items():
        keys = frozenset(ctx.key(ctx.check(g)) for g in els)
        out.append(Level(int(n), members=keys, label=(labels or {}).get(n, "")))
    return Filtration(ctx, law, out)


def interval_levels(max_n):
    """Birkhoff levels V_{3^n} = (-3^n, 3^n) on Z for n = 0..max_n."""
    levels = []
    for n in range(0, max_n + 1):
        r = 3**n
        levels.append(Level(n, predicate=lambda g, r=r: abs(g[0]) < r, label=f"(-{r},{r})"))
    return levels


def integer_intervals(ctx, max_n):
    return Filtration(ctx, BIRKHOFF, interval_levels(max_n))


def subgroup_tower(ctx, law=KAKUTANI):
    """Subgroup levels of a cyclic tower or an involution product.

    Kakutani: V_{2^-n} is the n-th subgroup, n = 0..depth.
    Birkhoff: V_{3^n} is the (-n)-th subgroup, n = -depth..0.
    """
    if not isinstance(ctx, (CyclicTower, InvolutionProduct)):
        raise FiltrationError(f"{ctx!r} has no subgroup tower")
    depth = ctx.depth
    levels = []
    for k in range(depth + 1):
        members = frozenset(i for i in range(ctx.order) if ctx.level(ctx.element(i)) >= k)
        n = k if law == KAKUTANI else -k
        levels.append(Level(n, members=members, label=f"H{k}"))
    return Filtration(ctx, law, levels)


def metric_balls(d, law, radii):
    """Levels given by open metric balls; ``radii`` maps index -> radius."""
    levels = [
        Level(int(n), predicate=lambda g, r=r: d.to_identity(g) < r, label=f"B({r:g})") for n, r in radii.items()
    ]
    return Filtration(d.ctx, law, levels)
