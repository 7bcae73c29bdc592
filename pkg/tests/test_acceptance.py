"""Exit criteria. Each test records a PASS/FAIL line (see conftest) and then asserts.

Every check runs at the stated tolerance and under its stated time limit;
a criterion that is not met fails here rather than being relaxed.
"""

from fractions import Fraction
import math
import pathlib
import time

import numpy as np
import pytest
import scipy.linalg as sla

from conftest import ACCEPTANCE
from minmetric import certifier as C
from minmetric import cli
from minmetric import coarse as Q
from minmetric import constructions as K
from minmetric import filtrations as F
from minmetric import oneparam as O
from minmetric.config import parse_config
from minmetric.groups import SpecialOrthogonal, make_group
from minmetric.linalg import random_skew_hermitian
from minmetric.metrics import geodesic_metric, native_metric, restrict, transform_sqrt
from minmetric.report import deterministic_bytes, emit_machine, parse_report

pytestmark = pytest.mark.acceptance

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"
D16_LEVELS = {0: list(range(16)), 1: [0, 1, 2, 6, 7, 8], 2: [0, 1, 7], 3: [0]}


def record(name, ok, detail, seconds=None, limit=None):
    if limit is not None:
        ok = ok and seconds < limit
        detail = f"{detail}; {seconds:.2f} s (limit {limit} s)"
    ACCEPTANCE.append((name, bool(ok), detail))
    assert ok, detail


# --------------------------------------------------------------------------


def test_birkhoff_sandwich():
    t0 = time.perf_counter()
    ctx = make_group({"kind": "integer_lattice", "d": 1})
    d = K.birkhoff_metric(ctx, F.integer_intervals(ctx, 6), K.Truncation.interval(3**6))
    delta, dist = d.meta["gauge"], d.meta["distances"]
    finite = np.isfinite(delta)
    bad = int(np.sum(~(0.5 * delta[finite] <= dist[finite])) + np.sum(~(dist <= delta)))
    secs = time.perf_counter() - t0
    record("Birkhoff sandwich", bad == 0 and len(dist) == 2 * 3**6 + 1,
           f"{len(dist)} points of [-729, 729], {bad} violations of delta/2 <= d <= delta", secs, 10)


def test_kakutani_sandwich():
    t0 = time.perf_counter()
    tower = make_group({"kind": "finite_cyclic_tower", "p": 2, "depth": 10})
    d = K.kakutani_metric(tower, F.subgroup_tower(tower, F.KAKUTANI))
    want = np.array([2.0 ** -tower.level(g) for g in tower.elements])
    want[0] = 0.0
    exact = bool(np.array_equal(d.norms(tower.elements), want))
    ratio_t = d.meta["C"] / d.meta["c"]
    d16 = make_group({"kind": "finite_table", "name": "D16"})
    filt = F.explicit(d16, F.KAKUTANI, D16_LEVELS)
    filt.verify()
    dd = K.kakutani_metric(d16, filt)
    secs = time.perf_counter() - t0
    ok = exact and ratio_t == 1.0 and dd.meta["ratio"] <= 4
    record("Kakutani sandwich", ok,
           f"tower d == 2^-level on 1024 elements: {exact}, ratio {ratio_t:g}; D16 ratio {dd.meta['ratio']:g} <= 4",
           secs, 5)


def _escape_counts(traces, radius):
    """Largest m <= 64 with u, ..., u^m inside the open ball (independent of the library)."""
    outside = traces >= radius
    return np.where(outside.any(axis=1), np.argmax(outside, axis=1), traces.shape[1])


def test_unitary_minimality():
    t0 = time.perf_counter()
    m_max = 64
    # U(1): closed form |e^{i k theta} - 1| = 2 |sin(k theta / 2)|
    theta = np.linspace(-math.pi, math.pi, 100_000)
    k = np.arange(1, m_max + 1)
    tr1 = 2 * np.abs(np.sin(np.outer(theta, k) / 2))
    m1 = _escape_counts(tr1, 1.0)
    inside1 = m1 >= 1
    viol1 = int(np.sum(~(tr1[inside1, 0] < 2 / m1[inside1] + 1e-9)))
    # U(2): 10^4 samples across scales, operator norms by SVD
    u2 = make_group({"kind": "unitary", "n": 2})
    rng = np.random.default_rng(0)
    us = np.stack([u2.sample_near_identity(rng, s) for s in rng.uniform(0.0, 1.2, 10_000)])
    tr2 = np.empty((len(us), m_max))
    p = us.copy()
    for j in range(m_max):
        tr2[:, j] = np.linalg.norm(p - np.eye(2), ord=2, axis=(1, 2))
        p = p @ us
    m2 = _escape_counts(tr2, 1.0)
    inside2 = m2 >= 1
    viol2 = int(np.sum(~(tr2[inside2, 0] < 2 / m2[inside2] + 1e-9)))
    # the library's certificate on the same U(2) sample agrees
    cert = C.check_condition2(u2, native_metric(u2), 1.0, n_max=m_max, elements=list(us), bound_constant=2.0)
    secs = time.perf_counter() - t0
    ok = viol1 == 0 and viol2 == 0 and cert.holds
    record("Unitary minimality", ok,
           f"U(1) {int(inside1.sum())} grid points in the ball, {viol1} violations; "
           f"U(2) {int(inside2.sum())} samples, {viol2} violations; certificate {cert.verdict}", secs, 60)


def test_equivalence_consistency():
    t0 = time.perf_counter()
    holding = {
        "R^3": make_group({"kind": "euclidean", "m": 3}),
        "U(1)": make_group({"kind": "unitary", "n": 1}),
        "U(2)": make_group({"kind": "unitary", "n": 2}),
        "tower(2,10)": make_group({"kind": "finite_cyclic_tower", "p": 2, "depth": 10}),
    }
    lines, ok = [], True
    for name, ctx in holding.items():
        d = native_metric(ctx)
        verdicts = [C.fit_constants(ctx, d, c, budget=64).verdict for c in ("cond2", "cond3", "cond4")]
        good = all(v in (C.HOLDS, C.EXHAUSTIVE) for v in verdicts)
        ok &= good
        lines.append(f"{name} {'hold' if good else verdicts}")
    line = make_group({"kind": "euclidean", "m": 1})
    inv = make_group({"kind": "finite_product_of_involutions", "depth": 10})
    for name, ctx, d in (("(R, sqrt)", line, transform_sqrt(native_metric(line))),
                         ("involutions(10)", inv, native_metric(inv))):
        certs = [C.fit_constants(ctx, d, c, budget=64) for c in ("cond2", "cond3", "cond4")]
        good = all(c.refuted and c.witness.replay(d) for c in certs)
        ok &= good
        lines.append(f"{name} {'refuted+replayed' if good else [c.verdict for c in certs]}")
        if not good:
            fixed = [C.check_condition2(ctx, d, 0.125), C.check_condition3(ctx, d, 0.125, 16.0),
                     C.check_condition4(ctx, d, 0.125, 16.0)]
            lines.append(f"{name} at U = 2^-3: {[c.verdict for c in fixed]}")
    secs = time.perf_counter() - t0
    record("cond2/cond3/cond4 consistency", ok, "; ".join(lines), secs, 120)


def test_sqrt_falsifier():
    t0 = time.perf_counter()
    ctx = make_group({"kind": "euclidean", "m": 1})
    cert = C.check_condition3(ctx, transform_sqrt(native_metric(ctx)), 1.0, 8.0, budget=64)
    n = int(cert.witness.power_trace[-1][0])
    g = abs(Fraction(cert.witness.element[0]))
    # n sqrt(g) > 8 sqrt(n g)  <=>  n^2 g > 64 n g, squared so the comparison is exact
    exact = n * n * g > 64 * n * g
    secs = time.perf_counter() - t0
    record("sqrt falsifier", cert.refuted and 64 < n <= 65 and exact,
           f"witness n = {n}, g = {float(g):.3g}, exact check {exact}", secs, 1)


def _chains(depth):
    rng = np.random.default_rng(0)
    for j in range(50):
        n = 2 if j % 2 == 0 else 3
        ctx = make_group({"kind": "unitary", "n": n})
        d = geodesic_metric(ctx)
        a = random_skew_hermitian(rng, n, 0.1)
        yield ctx, d, a, O.build_root_chain(ctx, d, sla.expm(a), k=1, depth=depth)


def _oneparam(depth):
    t0 = time.perf_counter()
    worst, contraction_bad = 0.0, 0
    grid = np.linspace(-1, 1, 41)
    for _, _, a, chain in _chains(depth):
        log = chain.contraction_log
        contraction_bad += sum(w > v / 2 * (1 + O.CONTRACTION_RTOL) + O.CONTRACTION_ATOL
                               for (_, v), (_, w) in zip(log, log[1:]))
        for alpha in grid:
            worst = max(worst, float(np.linalg.norm(O.eval_real(chain, alpha) - sla.expm(alpha * a), 2)))
    return worst, contraction_bad, time.perf_counter() - t0


def test_oneparam_oracle():
    worst, bad, secs = _oneparam(20)
    record("One-parameter oracle (depth 20)", bad == 0 and worst <= 1e-8,
           f"50 chains in U(2)/U(3), {bad} contraction failures, max error {worst:.3g} vs 1e-8", secs, 60)


def test_oneparam_oracle_at_rule_depth():
    """Companion run at the depth the rule ceil(log2(1/tol)/k) + 1 prescribes for tol = 1e-8."""
    depth = O.required_depth(1e-8, 1)
    worst, bad, secs = _oneparam(depth)
    record(f"One-parameter oracle (depth {depth}, companion)", bad == 0 and worst <= 1e-8,
           f"{bad} contraction failures, max error {worst:.3g} vs 1e-8", secs, 60)


def test_digit_bounds():
    t0 = time.perf_counter()
    checked = violations = 0
    grid = np.linspace(-1, 1, 41)
    for depth in (20, 28):
        for _, d, _, chain in _chains(depth):
            for alpha in grid:
                b = O.digit_bounds(chain, d, alpha)
                checked += 1
                violations += not (b["distance"] <= b["bound"] and b["distance"] < b["tail_bound"]
                                   or b["distance"] == 0.0)
    secs = time.perf_counter() - t0
    record("Digit-expansion bound", violations == 0, f"{checked} (chain, alpha) checks, {violations} violations",
           secs, 60)


def test_sqrt_injectivity():
    t0 = time.perf_counter()
    u2 = make_group({"kind": "unitary", "n": 2})
    d = native_metric(u2)
    # a few hundred draws fall outside the ball after rounding; ask for slightly more
    cert = O.check_sqrt_uniform_continuity(u2, d, 0.5, budget=101_000, seed=0)
    so2 = make_group({"kind": "special_orthogonal", "n": 2})
    pair = [(SpecialOrthogonal.rotation(math.pi / 2), SpecialOrthogonal.rotation(-math.pi / 2))]
    bad = O.check_sqrt_uniform_continuity(so2, native_metric(so2), 2.0, pairs=pair)
    secs = time.perf_counter() - t0
    ok = cert.holds and cert.details["injective"] and cert.details["pairs"] >= 100_000 and bad.refuted
    record("Square-root injectivity", ok,
           f"U(2) {cert.details['pairs']} pairs injective: {cert.details.get('injective')}; "
           f"SO(2) +-pi/2 {bad.verdict}", secs, 30)


def test_subgroup_restriction():
    t0 = time.perf_counter()
    u2 = make_group({"kind": "unitary", "n": 2})
    d = native_metric(u2)
    cert = C.check_condition2(u2, d, 1.0, n_max=64, budget=256, bound_constant=2.0)
    keep = {k: cert.constants[k] for k in ("U_radius", "n_max", "bound_constant")}
    subs = {}
    for desc in ({"kind": "diagonal_torus", "n": 2}, {"kind": "special_orthogonal", "n": 2}):
        sub = make_group(desc)
        subs[desc["kind"]] = C.check_condition2(sub, restrict(d, sub), keep["U_radius"], keep["n_max"], budget=256,
                                                bound_constant=keep["bound_constant"])
    secs = time.perf_counter() - t0
    ok = cert.holds and all(c.holds for c in subs.values())
    record("Subgroup restriction", ok,
           f"U(2) constants {keep} re-verified: " + ", ".join(f"{k} {c.verdict}" for k, c in subs.items()), secs)


def test_min_max_bilipschitz():
    t0 = time.perf_counter()
    z = make_group({"kind": "integer_lattice", "d": 1})
    d = native_metric(z)
    r = 10_000
    path = Q.path_metric_handle(z, d, Q.GeneratingSet.of(z, [(1,)]), K.Truncation.interval(r))
    els = [(x,) for x in range(-r, r + 1) if x]
    equal = bool(np.array_equal(d.norms(els), path.norms(els)))
    bl_z = Q.bilipschitz_constant(z, d, path, 2.0, elements=els)
    tower = make_group({"kind": "finite_cyclic_tower", "p": 2, "depth": 10})
    kak = K.kakutani_metric(tower, F.subgroup_tower(tower, F.KAKUTANI))
    pth = Q.path_metric_handle(tower, kak, Q.GeneratingSet.of(tower, [2**i for i in range(10)]))
    bl_t = Q.bilipschitz_constant(tower, kak, pth, 0.75)
    x = kak.norms(tower.elements[1:])
    y = pth.norms(tower.elements[1:])
    exact = float(np.max(np.maximum(x / y, y / x)))
    secs = time.perf_counter() - t0
    ok = equal and bl_z.L == 1.0 and bl_t.verified and bl_t.L >= exact
    record("Min+max bi-Lipschitz", ok,
           f"Z: path == |.| on [-1e4, 1e4]: {equal}, L = {bl_z.L:g}; tower: formula L = {bl_t.L:g} >= "
           f"max exact ratio {exact:g}", secs, 10)


def test_determinism():
    t0 = time.perf_counter()
    same = {}
    for name in ("cyclic_tower", "unitary2", "involutions", "integer_lattice", "euclidean"):
        cfg = parse_config((CONFIGS / f"{name}.yaml").read_text())
        a, b = cli.run(cfg), cli.run(cfg, parallel=True)
        round_trip = emit_machine(parse_report(emit_machine(a))) == emit_machine(a)
        same[name] = deterministic_bytes(a) == deterministic_bytes(b) and round_trip
    secs = time.perf_counter() - t0
    record("Determinism", all(same.values()),
           ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()), secs)
