import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import dijkstra

from minmetric import constructions as C
from minmetric import filtrations as F
from minmetric.errors import ConstructionError, FiltrationError, TruncationError
from minmetric.groups import make_group
from minmetric.metrics import discrete_metric, native_metric, validate

D16_LEVELS = {0: list(range(16)), 1: [0, 1, 2, 6, 7, 8], 2: [0, 1, 7], 3: [0]}


def d16():
    return make_group({"kind": "finite_table", "name": "D16"})


def brute_chain_infimum(ctx, gauge):
    """All-pairs Dijkstra on the complete Cayley graph with edge g -> gs of cost gauge(s)."""
    n = ctx.order
    w = np.full((n, n), np.inf)
    for g in range(n):
        for s in range(n):
            if s != ctx.identity_index and np.isfinite(gauge[s]):
                h = ctx.table[g, s]
                w[g, h] = min(w[g, h], gauge[s])
    w[np.isinf(w)] = 0  # csgraph treats 0 as "no edge"
    return dijkstra(w, indices=ctx.identity_index)


def test_d16_kakutani_matches_brute_force():
    ctx = d16()
    filt = F.explicit(ctx, F.KAKUTANI, D16_LEVELS)
    filt.verify()
    d = C.kakutani_metric(ctx, filt)
    gauge = C.LevelGauge(filt).table()
    np.testing.assert_array_equal(d.norms(ctx.elements), brute_chain_infimum(ctx, gauge))
    assert d.meta["ratio"] <= 4
    validate(d, ctx.elements)


def test_tower_kakutani_is_ultrametric():
    ctx = make_group({"kind": "finite_cyclic_tower", "p": 2, "depth": 10})
    d = C.kakutani_metric(ctx, F.subgroup_tower(ctx, F.KAKUTANI))
    assert (d.meta["c"], d.meta["C"], d.meta["ratio"]) == (1.0, 1.0, 1.0)
    np.testing.assert_array_equal(d.norms(ctx.elements), native_metric(ctx).norms(ctx.elements))


def test_tower_birkhoff_equals_gauge():
    ctx = make_group({"kind": "finite_cyclic_tower", "p": 3, "depth": 4})
    filt = F.subgroup_tower(ctx, F.BIRKHOFF)
    d = C.birkhoff_metric(ctx, filt)
    gauge = C.LevelGauge(filt).table()
    np.testing.assert_array_equal(d.norms(ctx.elements), gauge)


def test_birkhoff_on_z_sandwich_and_brute_force():
    ctx = make_group({"kind": "integer_lattice", "d": 1})
    filt = F.integer_intervals(ctx, 4)
    trunc = C.Truncation.interval(81)
    d = C.birkhoff_metric(ctx, filt, trunc)
    gauge = d.meta["gauge"]
    dist = d.meta["distances"]
    assert d.meta["sandwich_holds"]
    finite = np.isfinite(gauge)
    assert np.all(0.5 * gauge[finite] <= dist[finite]) and np.all(dist <= gauge)
    # oracle: dense Dijkstra over the same truncation
    nodes = list(range(-81, 82))
    w = np.zeros((len(nodes), len(nodes)))
    for i, x in enumerate(nodes):
        for j, y in enumerate(nodes):
            if x != y:
                w[i, j] = filt.gauge((y - x,))
    want = dijkstra(w, indices=81)
    np.testing.assert_array_equal(dist, want)
    assert d.to_identity((4,)) == 4.0
    with pytest.raises(TruncationError):
        d.to_identity((500,))


@pytest.mark.parametrize("levels,bad_level", [
        ({0: list(range(16)), 1: [0, 1, 2, 6, 7, 8], 2: [0, 1], 3: [0]}, 2),  # r without r^-1: asymmetric
    ({0: list(range(16)), 1: [0, 1, 7, 8], 2: [0, 2, 6], 3: [0]}, 2),  # squares of level 2 escape level 1
    ({0: list(range(16)), 1: [0, 1, 7], 2: [0, 1, 2, 6, 7], 3: [0]}, 2),  # not nested
])
def test_bad_filtrations_name_the_level(levels, bad_level):
    ctx = d16()
    with pytest.raises(FiltrationError) as err:
        F.explicit(ctx, F.KAKUTANI, levels).verify()
    assert err.value.level == bad_level


def test_kakutani_needs_basis():
    ctx = d16()
    with pytest.raises(FiltrationError):
        F.explicit(ctx, F.KAKUTANI, {0: list(range(16)), 1: [0, 1, 7]}).verify()


def test_law_mismatch():
    ctx = d16()
    with pytest.raises(FiltrationError):
        C.birkhoff_metric(ctx, F.explicit(ctx, F.KAKUTANI, D16_LEVELS))


def test_bi_invariantize_exact_brute_force():
    ctx = d16()
    filt = F.explicit(ctx, F.KAKUTANI, D16_LEVELS)
    d = C.kakutani_metric(ctx, filt)
    bi = C.bi_invariantize(ctx, d)
    for g in ctx.elements:
        want = max(d.to_identity(ctx.conjugate(g, f)) for f in ctx.elements)
        assert bi.to_identity(g) == want
    # bi-invariance on all pairs, with a few right translates
    for g in ctx.elements:
        for h in ctx.elements[:6]:
            for f in ctx.elements:
                assert bi(ctx.multiply(g, f), ctx.multiply(h, f)) == bi(g, h)


def test_bi_invariantize_discrete_metric_is_fixed():
    ctx = make_group({"kind": "finite_table", "name": "S3"})
    d = discrete_metric(ctx)
    bi = C.bi_invariantize(ctx, d)
    np.testing.assert_array_equal(bi.norms(ctx.elements), d.norms(ctx.elements))


def test_bi_invariantize_continuous_lower_bound():
    ctx = make_group({"kind": "unitary", "n": 2})
    d = native_metric(ctx)  # already bi-invariant
    bi = C.bi_invariantize(ctx, d, budget=32)
    rng = np.random.default_rng(0)
    for _ in range(10):
        g = ctx.sample_near_identity(rng, 1.0)
        assert abs(bi.to_identity(g) - d.to_identity(g)) < 1e-10
    assert bi.meta["lower_bound"]


def test_unbounded_needs_cap():
    ctx = make_group({"kind": "integer_lattice", "d": 1})
    with pytest.raises(ValueError):
        C.bi_invariantize(ctx, native_metric(ctx))


def test_chain_limit():
    ctx = make_group({"kind": "finite_product_of_involutions", "depth": 13})
    with pytest.raises(ConstructionError):
        C.kakutani_metric(ctx, F.subgroup_tower(ctx, F.KAKUTANI), verify=False)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(2, 5))
def test_tower_kakutani_property(p, depth):
    ctx = make_group({"kind": "finite_cyclic_tower", "p": p, "depth": depth})
    d = C.kakutani_metric(ctx, F.subgroup_tower(ctx, F.KAKUTANI))
    gauge = C.LevelGauge(F.subgroup_tower(ctx, F.KAKUTANI)).table()
    vals = d.norms(ctx.elements)
    assert np.all(vals <= gauge)
    assert d.meta["ratio"] <= 4
