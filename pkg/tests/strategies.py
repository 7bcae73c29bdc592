"""Shared hypothesis strategies: (context, element) generators per group kind."""

import numpy as np
from hypothesis import strategies as st

from minmetric.groups import make_group

DESCRIPTORS = [
    {"kind": "unitary", "n": 2},
    {"kind": "unitary", "n": 3},
    {"kind": "special_orthogonal", "n": 3},
    {"kind": "diagonal_torus", "n": 2},
    {"kind": "general_linear", "n": 2},
    {"kind": "euclidean", "m": 2},
    {"kind": "integer_lattice", "d": 2},
    {"kind": "free_group", "rank": 2},
    {"kind": "heisenberg", "n": 3},
    {"kind": "finite_cyclic_tower", "p": 3, "depth": 4},
    {"kind": "finite_product_of_involutions", "depth": 6},
    {"kind": "finite_table", "name": "D16"},
    {"kind": "finite_table", "name": "S4"},
]

_CTX = {}


def ctx_of(desc):
    key = tuple(sorted(desc.items()))
    if key not in _CTX:
        _CTX[key] = make_group(desc)
    return _CTX[key]


def sample(ctx, rng, scale=1.0):
    if hasattr(ctx, "sample_near_identity"):
        return ctx.sample_near_identity(rng, scale * rng.uniform(0.05, 1.5))
    if hasattr(ctx, "sample_at_scale"):
        return ctx.sample_at_scale(rng, 1 + int(rng.integers(6)))
    return ctx.check(tuple(rng.uniform(-3, 3, ctx.m)))


@st.composite
def group_and_elements(draw, count=3, descriptors=DESCRIPTORS):
    desc = draw(st.sampled_from(descriptors))
    ctx = ctx_of(desc)
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    return ctx, [sample(ctx, rng) for _ in range(count)]
