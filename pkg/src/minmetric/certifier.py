"""Certify or refute the power-growth conditions characterising minimal metrics.

Minimality itself quantifies over every compatible metric and cannot be
tested directly. What is checked here are the equivalent intrinsic
conditions on a left-invariant metric d:

* cond2: g, g^2, ..., g^n in U            =>  d(g,1) <= 1/n
* cond3: d(g,1) <= eps/n                  =>  n d(g,1) <= K d(g^n,1)
* cond4: g, g^2, g^4, ..., g^(2^n) in U   =>  2^n d(g,1) <= K d(g^(2^n),1)

with U an open d-ball. Positive verdicts are only ever "on budget" for
continuous groups; finite groups in exhaustive mode get ``holds_exhaustively``.
"""

from dataclasses import asdict, dataclass, field
import math
from typing import Any, Optional

import numpy as np

from .errors import DegenerateSampling
from .groups import FiniteGroup
from .metrics import ball_elements, native_metric, radial_samples

HOLDS = "holds_on_budget"
EXHAUSTIVE = "holds_exhaustively"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"
VERDICTS = (HOLDS, EXHAUSTIVE, REFUTED, INCONCLUSIVE)

CONDITIONS = ("cond2", "cond3", "cond4", "nss", "uniform_nss", "right_lipschitz", "local_sin", "sqrt_continuity")

RTOL = 1e-12
ATOL = 1e-15
REPLAY_TOL = 1e-10
DEFAULT_N_MAX = 2**10
DEFAULT_DEPTH = 16
DEFAULT_PER_SHELL = 256

SCOPE_NOTE = (
    "Verdicts concern the stated power-growth condition at the recorded constants and sample budget; "
    "minimality over all compatible metrics is inferred only through the equivalence of these conditions."
)


def _le(lhs, rhs):
    return lhs <= rhs * (1 + RTOL) + ATOL


@dataclass
class Witness:
    """A concrete violation, replayable through the group arithmetic.

    ``power_trace`` rows are (exponent, d(g^exponent, 1)). Pair witnesses
    carry a ``partner`` and named ``quantities`` instead.
    """

    element: Any
    power_trace: list
    violated_inequality: str
    partner: Any = None
    quantities: dict = field(default_factory=dict)

    def replay(self, d, tol=REPLAY_TOL):
        ctx = d.ctx
        for e, v in self.power_trace:
            if abs(d.to_identity(ctx.power(self.element, int(e))) - v) > tol:
                return False
        for name, v in self.quantities.items():
            if abs(_quantity(d, name, self.element, self.partner) - v) > tol:
                return False
        return True

    def to_dict(self, ctx):
        return {
            "element": ctx.encode(self.element),
            "partner": None if self.partner is None else ctx.encode(self.partner),
            "power_trace": [[int(e), float(v)] for e, v in self.power_trace],
            "violated_inequality": self.violated_inequality,
            "quantities": {k: float(v) for k, v in sorted(self.quantities.items())},
        }

    @classmethod
    def from_dict(cls, ctx, obj):
        return cls(
            element=ctx.decode(obj["element"]),
            power_trace=[(int(e), float(v)) for e, v in obj["power_trace"]],
            violated_inequality=obj["violated_inequality"],
            partner=None if obj.get("partner") is None else ctx.decode(obj["partner"]),
            quantities=dict(obj.get("quantities", {})),
        )


def _quantity(d, name, g, f):
    ctx = d.ctx
    inv = ctx.invert
    mul = ctx.multiply
    table = {
        "d(g,1)": lambda: d.to_identity(g),
        "d(f,1)": lambda: d.to_identity(f),
        "d(g,f)": lambda: d(g, f),
        "d(g^-1f,1)": lambda: d.to_identity(mul(inv(g), f)),
        "d(gf^-1,1)": lambda: d.to_identity(mul(g, inv(f))),
        "d(g^2,f^2)": lambda: d(mul(g, g), mul(f, f)),
    }
    return table[name]()


@dataclass
class Certificate:
    condition: str
    verdict: str
    constants: dict
    witness: Optional[Witness] = None
    details: dict = field(default_factory=dict)
    note: str = SCOPE_NOTE

    @property
    def holds(self):
        return self.verdict in (HOLDS, EXHAUSTIVE)

    @property
    def refuted(self):
        return self.verdict == REFUTED

    def to_dict(self, ctx):
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "constants": _plain(self.constants),
            "witness": None if self.witness is None else self.witness.to_dict(ctx),
            "details": _plain(self.details),
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, ctx, obj):
        w = obj.get("witness")
        return cls(
            condition=obj["condition"],
            verdict=obj["verdict"],
            constants=dict(obj["constants"]),
            witness=None if w is None else Witness.from_dict(ctx, w),
            details=dict(obj.get("details", {})),
            note=obj.get("note", SCOPE_NOTE),
        )


def _plain(obj):
    """Recursively convert numpy scalars/arrays to JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# sampling


def shell_radii(radius, shells):
    return [radius * 2.0**-j for j in range(shells)]


def _covers_ball(d, radius, strict, els):
    """True when an explicit element list contains the whole enumerable ball."""
    ctx = d.ctx
    if not (isinstance(ctx, FiniteGroup) and ctx.exhaustive or (ctx.discrete and d.word_bound is not None)):
        return False
    try:
        ball, _ = ball_elements(d, radius, strict=strict)
    except (OverflowError, TypeError, MemoryError):
        return False
    have = {ctx.key(g) for g in els}
    return all(ctx.key(g) in have or ctx.is_identity(g) for g in ball)


def sample_domain(d, radius, per_shell=DEFAULT_PER_SHELL, seed=0, shells=12, elements=None, strict=True):
    """Non-identity elements with d(g,1) < radius (or <= if not ``strict``).

    Returns ``(elements, values, exhaustive)``. Finite groups and word-bounded
    discrete groups are enumerated; continuous groups are sampled on dyadic
    shells [r/2, r], each shell also receiving its boundary radius.
    """
    ctx = d.ctx
    if elements is not None:
        els = [ctx.check(g) for g in elements]
        vals = d.norms(els)
        mask = (vals < radius) if strict else (vals <= radius)
        mask &= np.array([not ctx.is_identity(g) for g in els], dtype=bool)
        return [g for g, m in zip(els, mask) if m], vals[mask], _covers_ball(d, radius, strict, els)
    if isinstance(ctx, FiniteGroup) and ctx.exhaustive or (ctx.discrete and d.word_bound is not None):
        els, vals = ball_elements(d, radius, strict=strict)
        keep = [i for i, g in enumerate(els) if not ctx.is_identity(g)]
        return [els[i] for i in keep], vals[keep], True
    rng = np.random.default_rng(seed)
    if ctx.discrete:
        els = []
        for s in np.geomspace(1, 64, per_shell * shells):
            g = ctx.sample_at_scale(rng, float(s))
            els.append(g)
        vals = d.norms(els)
        mask = ((vals < radius) if strict else (vals <= radius)) & (vals > 0)
        return [g for g, m in zip(els, mask) if m], vals[mask], False
    targets = []
    for r in shell_radii(radius, shells):
        targets.append(r)
        targets.extend(r * (0.5 + 0.5 * rng.random(per_shell - 1)))
    els, vals = radial_samples(ctx, d, np.array(targets), rng)
    mask = ((vals < radius) if strict else (vals <= radius)) & (vals > 0)
    return [g for g, m in zip(els, mask) if m], vals[mask], False


def _exit_counts(d, gs, radius, n_max):
    """Largest n <= n_max with g, ..., g^n all inside the open ball, plus the traces computed.

    Traces are extended geometrically so that quickly escaping elements stay cheap.
    """
    out = np.full(len(gs), n_max, dtype=np.int64)
    traces = [None] * len(gs)
    active = np.arange(len(gs))
    length = min(16, n_max)
    while active.size:
        tr = d.power_traces([gs[i] for i in active], length)
        outside = tr >= radius
        has = outside.any(axis=1)
        first = np.argmax(outside, axis=1)
        still = []
        for j, i in enumerate(active):
            traces[i] = tr[j]
            if has[j]:
                out[i] = first[j]
            elif length < n_max:
                still.append(i)
        active = np.array(still, dtype=np.int64)
        length = min(length * 4, n_max)
    return out, traces


def _trace_rows(trace, upto, dyadic=False, keep=64):
    """(exponent, value) rows for the first ``upto`` entries, thinned past ``keep``."""
    upto = min(upto, len(trace))
    idx = list(range(min(upto, keep)))
    j = keep
    while j < upto:
        idx.append(j)
        j *= 2
    if upto - 1 not in idx and upto > 0:
        idx.append(upto - 1)
    exps = [(2**i if dyadic else i + 1) for i in idx]
    return [(e, float(trace[i])) for e, i in zip(exps, idx)]


def _constants(**kw):
    return {k: v for k, v in kw.items() if v is not None}


def _verdict(exhaustive, checked):
    return EXHAUSTIVE if exhaustive else HOLDS


def _no_samples(name, radius):
    return DegenerateSampling(f"{name}: no non-identity samples inside radius {radius}")


# ---------------------------------------------------------------------------
# conditions (2), (3), (4)


def check_condition2(ctx, d, U_radius, n_max=DEFAULT_N_MAX, budget=DEFAULT_PER_SHELL, seed=0,
                     elements=None, bound_constant=1.0, shells=None):
    """g, ..., g^n in B(U) implies d(g,1) <= C/n, with C = ``bound_constant`` (1 in the strict form).

    The fitted constant max n*d(g,1) over the sample is recorded as
    ``details['bound_constant_fitted']``.
    """
    if U_radius <= 0 or n_max < 1:
        raise ValueError("need U_radius > 0 and n_max >= 1")
    shells = shells or int(math.ceil(math.log2(n_max))) + 2
    gs, vals, exhaustive = sample_domain(d, U_radius, budget, seed, shells, elements)
    consts = _constants(U_radius=U_radius, n_max=n_max, sample_budget=len(gs), seed=seed,
                        bound_constant=bound_constant)
    if not gs:
        if exhaustive:
            return Certificate("cond2", EXHAUSTIVE, consts, details={"samples": 0, "vacuous": True})
        raise _no_samples("cond2", U_radius)
    ns, traces = _exit_counts(d, gs, U_radius, n_max)
    ratios = ns * vals
    bad = np.flatnonzero(~_le(vals, bound_constant / np.maximum(ns, 1)))
    details = {"samples": len(gs), "bound_constant_fitted": float(ratios.max()), "max_n": int(ns.max())}
    if bad.size:
        i = int(bad[np.argmax(ratios[bad])])
        n = int(ns[i])
        w = Witness(
            gs[i],
            _trace_rows(traces[i], n),
            f"g..g^{n} in B({U_radius:g}) but d(g,1) = {vals[i]:.17g} > {bound_constant:g}/{n}",
        )
        return Certificate("cond2", REFUTED, consts, w, details)
    return Certificate("cond2", _verdict(exhaustive, len(gs)), consts, details=details)


def _needed_powers(vals, eps, n_max):
    with np.errstate(divide="ignore"):
        n = np.floor(eps / vals * (1 + 1e-15))
    return np.clip(np.nan_to_num(n, posinf=n_max), 1, n_max).astype(np.int64)


def _grouped_traces(d, gs, counts, dyadic=False):
    """Traces of length counts[i] per element, batched by power-of-two length."""
    out = [None] * len(gs)
    buckets = {}
    for i, c in enumerate(counts):
        buckets.setdefault(1 << int(max(c - 1, 0)).bit_length(), []).append(i)
    for length in sorted(buckets):
        idx = buckets[length]
        tr = d.power_traces([gs[i] for i in idx], length, dyadic)
        for j, i in enumerate(idx):
            out[i] = tr[j][: counts[i]]
    return out


def check_condition3(ctx, d, eps, K, n_max=DEFAULT_N_MAX, budget=DEFAULT_PER_SHELL, seed=0, elements=None,
                     shells=None):
    """d(g,1) <= eps/n implies n d(g,1) <= K d(g^n,1), for n <= n_max."""
    if eps <= 0 or K < 1:
        raise ValueError("need eps > 0 and K >= 1")
    shells = shells or int(math.ceil(math.log2(n_max))) + 2
    gs, vals, exhaustive = sample_domain(d, eps, budget, seed, shells, elements, strict=False)
    consts = _constants(eps=eps, K=K, n_max=n_max, sample_budget=len(gs), seed=seed)
    if not gs:
        if exhaustive:
            return Certificate("cond3", EXHAUSTIVE, consts, details={"samples": 0, "vacuous": True})
        raise _no_samples("cond3", eps)
    counts = _needed_powers(vals, eps, n_max)
    traces = _grouped_traces(d, gs, counts)
    k_emp = 0.0
    pairs = 0
    witness = None
    for i, tr in enumerate(traces):
        n = np.arange(1, len(tr) + 1)
        lhs = n * vals[i]
        rhs = K * tr
        pairs += len(tr)
        with np.errstate(divide="ignore", invalid="ignore"):
            k_emp = max(k_emp, float(np.nanmax(np.where(tr > 0, lhs / tr, np.where(lhs > 0, np.inf, 0)))))
        bad = np.flatnonzero(~_le(lhs, rhs))
        if bad.size and witness is None:
            m = int(n[bad[0]])
            witness = Witness(
                gs[i],
                _trace_rows(tr, m) if m <= 64 else [(1, float(tr[0])), (m, float(tr[m - 1]))],
                f"d(g,1) <= {eps:g}/{m} but {m}*d(g,1) = {lhs[bad[0]]:.17g} > {K:g}*d(g^{m},1) = {rhs[bad[0]]:.17g}",
            )
    details = {"samples": len(gs), "pairs": pairs, "K_empirical": k_emp}
    if witness is not None:
        return Certificate("cond3", REFUTED, consts, witness, details)
    return Certificate("cond3", _verdict(exhaustive, len(gs)), consts, details=details)


def check_condition4(ctx, d, U_radius, K, n_max=DEFAULT_DEPTH, budget=DEFAULT_PER_SHELL, seed=0, elements=None,
                     shells=None):
    """g, g^2, ..., g^(2^n) in B(U) implies 2^n d(g,1) <= K d(g^(2^n),1), for n <= n_max (dyadic depth)."""
    if U_radius <= 0 or K < 1:
        raise ValueError("need U_radius > 0 and K >= 1")
    shells = shells or n_max + 2
    gs, vals, exhaustive = sample_domain(d, U_radius, budget, seed, shells, elements)
    consts = _constants(U_radius=U_radius, K=K, n_max=n_max, sample_budget=len(gs), seed=seed)
    if not gs:
        if exhaustive:
            return Certificate("cond4", EXHAUSTIVE, consts, details={"samples": 0, "vacuous": True})
        raise _no_samples("cond4", U_radius)
    tr = d.power_traces(gs, n_max + 1, dyadic=True)
    inside = np.cumprod(tr < U_radius, axis=1).astype(bool)
    scale = 2.0 ** np.arange(n_max + 1)
    lhs = scale[None, :] * vals[:, None]
    rhs = K * tr
    bad = inside & ~_le(lhs, rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(inside, np.where(tr > 0, lhs / tr, np.where(lhs > 0, np.inf, 0)), 0)
    details = {"samples": len(gs), "pairs": int(inside.sum()), "K_empirical": float(ratio.max())}
    rows = np.flatnonzero(bad.any(axis=1))
    if rows.size:
        i = int(rows[0])
        n = int(np.argmax(bad[i]))
        w = Witness(
            gs[i],
            [(2**j, float(tr[i, j])) for j in range(n + 1)],
            f"g..g^(2^{n}) in B({U_radius:g}) but 2^{n}*d(g,1) = {lhs[i, n]:.17g} > {K:g}*d(g^(2^{n}),1) = {rhs[i, n]:.17g}",
        )
        return Certificate("cond4", REFUTED, consts, w, details)
    return Certificate("cond4", _verdict(exhaustive, len(gs)), consts, details=details)


# ---------------------------------------------------------------------------
# constant fitting


def radius_ladder(d, top=1.0, floor=2.0**-4):
    """Descending dyadic radii. On finite groups the ladder continues until the ball is trivial."""
    ctx = d.ctx
    out = []
    r = top
    if isinstance(ctx, FiniteGroup) and ctx.exhaustive:
        vals = d.norms(ctx.elements)
        positive = vals[vals > 0]
        stop = positive.min() if positive.size else top
        while True:
            out.append(r)
            if r <= stop:
                break
            r /= 2
        return out
    while r >= floor * (1 - 1e-12):
        out.append(r)
        r /= 2
    return out


def fit_constants(ctx, d, condition, budget=DEFAULT_PER_SHELL, seed=0, n_max=None, K_max=16.0, top=1.0,
                  floor=2.0**-4, elements=None):
    """Search the existentially quantified constants of a condition.

    U (or eps) runs down a dyadic ladder; at each rung K doubles from 1 up
    to ``K_max``. The first passing rung is kept and K is tightened to the
    largest ratio observed there. Exhausting the search returns the last
    refutation.
    """
    if condition not in ("cond2", "cond3", "cond4"):
        raise ValueError(f"cannot fit constants for {condition!r}")
    if n_max is None:
        n_max = DEFAULT_DEPTH if condition == "cond4" else DEFAULT_N_MAX
    ladder = radius_ladder(d, top, floor)
    last = None
    tried = []
    for r in ladder:
        if condition == "cond2":
            cert = check_condition2(ctx, d, r, n_max, budget, seed, elements)
            tried.append([r, 1.0, cert.verdict])
            if cert.holds:
                return _fitted(cert, tried, ladder)
            last = cert
            continue
        K = 1.0
        while K <= K_max:
            if condition == "cond3":
                cert = check_condition3(ctx, d, r, K, n_max, budget, seed, elements)
            else:
                cert = check_condition4(ctx, d, r, K, n_max, budget, seed, elements)
            tried.append([r, K, cert.verdict])
            if cert.holds:
                k_tight = max(1.0, cert.details.get("K_empirical", 1.0) * (1 + 1e-9))
                if k_tight < K:
                    again = (check_condition3(ctx, d, r, k_tight, n_max, budget, seed, elements)
                             if condition == "cond3" else
                             check_condition4(ctx, d, r, k_tight, n_max, budget, seed, elements))
                    tried.append([r, k_tight, again.verdict])
                    if again.holds:
                        cert = again
                return _fitted(cert, tried, ladder)
            last = cert
            K *= 2
    last.details["search"] = tried
    last.details["search_exhausted"] = True
    return last


def _fitted(cert, tried, ladder):
    cert.details["search"] = tried
    cert.details["ladder"] = ladder
    cert.details["fitted"] = True
    return cert


# ---------------------------------------------------------------------------
# consequences of the proofs


def proof_constant_4p(ctx, d, cert2, budget=DEFAULT_PER_SHELL, seed=0, n_max=DEFAULT_N_MAX, elements=None):
    """From a cond2 certificate at U, check the derived cond3-style bound with K = 4p.

    p is the least integer with B(1/p) inside U, and W = B(1/(2p^2)) satisfies
    W^(2p) inside B(1/p). Asserts g..g^n in W => n d(g,1) <= 4p d(g^n,1).
    """
    if not cert2.holds or cert2.condition != "cond2":
        raise ValueError("needs a holding cond2 certificate")
    p = int(math.ceil(1.0 / cert2.constants["U_radius"]))
    w_radius = 1.0 / (2 * p * p)
    shells = int(math.ceil(math.log2(n_max))) + 2
    gs, vals, exhaustive = sample_domain(d, w_radius, budget, seed, shells, elements)
    consts = _constants(U_radius=w_radius, K=4.0 * p, p=p, n_max=n_max, sample_budget=len(gs), seed=seed)
    if not gs:
        return Certificate("cond3", EXHAUSTIVE if exhaustive else INCONCLUSIVE, consts,
                           details={"samples": 0, "derived_from": "cond2"})
    ns, traces = _exit_counts(d, gs, w_radius, n_max)
    for i, tr in enumerate(traces):
        n = np.arange(1, ns[i] + 1)
        lhs = n * vals[i]
        rhs = 4.0 * p * tr[: ns[i]]
        bad = np.flatnonzero(~_le(lhs, rhs))
        if bad.size:
            m = int(n[bad[0]])
            w = Witness(gs[i], _trace_rows(tr, m), f"4p bound fails at n = {m} with p = {p}")
            return Certificate("cond3", REFUTED, consts, w, {"derived_from": "cond2"})
    return Certificate("cond3", _verdict(exhaustive, len(gs)), consts,
                       details={"samples": len(gs), "derived_from": "cond2"})


def lipschitz_from_cond4(K, eps, eta):
    """The constant 2 K eps / eta: d <= (2 K eps / eta) * other on B_other(eta)."""
    if eps <= 0 or eta <= 0 or K < 1:
        raise ValueError("need eps, eta > 0 and K >= 1")
    return 2.0 * K * eps / eta


def check_domination(ctx, d, other, K, eps, eta, budget=DEFAULT_PER_SHELL, seed=0, elements=None):
    """Verify d(g,1) <= (2K eps/eta) other(g,1) on B_other(eta).

    Preconditions (checked on the same sample): cond4 for d with U = B_d(eps)
    and constant K, and B_other(eta) inside B_d(eps).
    """
    L = lipschitz_from_cond4(K, eps, eta)
    gs, ovals, exhaustive = sample_domain(other, eta, budget, seed, DEFAULT_DEPTH, elements)
    dvals = d.norms(gs)
    consts = _constants(K=K, eps=eps, eta=eta, L=L, sample_budget=len(gs), seed=seed)
    if np.any(dvals >= eps):
        i = int(np.argmax(dvals))
        w = Witness(gs[i], [(1, float(dvals[i]))], f"B_other({eta:g}) not inside B_d({eps:g})")
        return Certificate("right_lipschitz", REFUTED, consts, w, {"precondition": "ball containment"})
    bad = np.flatnonzero(~_le(dvals, L * ovals))
    ratio = float(np.max(dvals / np.where(ovals > 0, ovals, np.inf))) if len(gs) else 0.0
    details = {"samples": len(gs), "ratio_max": ratio}
    if bad.size:
        i = int(bad[0])
        w = Witness(gs[i], [(1, float(dvals[i]))], f"d(g,1) = {dvals[i]:.17g} > {L:g} * {ovals[i]:.17g}")
        return Certificate("right_lipschitz", REFUTED, consts, w, details)
    return Certificate("right_lipschitz", _verdict(exhaustive, len(gs)), consts, details=details)


# ---------------------------------------------------------------------------
# NSS family


def check_uniform_nss(ctx, d, U_radius, budget=DEFAULT_PER_SHELL, seed=0, n_max=DEFAULT_N_MAX, levels=8,
                      elements=None):
    """For V = B(U 2^-j), j = 1..levels, record n(V) = least n with g..g^n in U => g in V.

    An element outside V whose powers never leave U within ``n_max`` refutes
    on finite groups (its orbit is periodic) and is inconclusive otherwise.
    """
    shells = levels + 2
    gs, vals, exhaustive = sample_domain(d, U_radius, budget, seed, shells, elements)
    consts = _constants(U_radius=U_radius, n_max=n_max, sample_budget=len(gs), seed=seed)
    if not gs:
        if exhaustive:
            return Certificate("uniform_nss", EXHAUSTIVE, consts, details={"samples": 0, "vacuous": True, "table": []})
        raise _no_samples("uniform_nss", U_radius)
    ns, traces = _exit_counts(d, gs, U_radius, n_max)
    table = []
    periodic = isinstance(ctx, FiniteGroup) or n_max >= _orbit_bound(ctx)
    for j in range(1, levels + 1):
        v = U_radius * 2.0**-j
        outside = np.flatnonzero(vals >= v)
        if outside.size == 0:
            table.append([v, 1])
            continue
        stuck = outside[ns[outside] >= n_max]
        if stuck.size:
            i = int(stuck[0])
            w = Witness(gs[i], _trace_rows(traces[i], len(traces[i])),
                        f"d(g,1) = {vals[i]:.17g} >= {v:g} yet g..g^{n_max} stay in B({U_radius:g})")
            verdict = REFUTED if periodic else INCONCLUSIVE
            return Certificate("uniform_nss", verdict, consts, w, {"samples": len(gs), "table": table, "V_radius": v})
        table.append([v, int(ns[outside].max()) + 1])
    return Certificate("uniform_nss", _verdict(exhaustive, len(gs)), consts,
                       details={"samples": len(gs), "table": table})


def _orbit_bound(ctx):
    return ctx.order if isinstance(ctx, FiniteGroup) else math.inf


def check_nss(ctx, U_radius, budget=DEFAULT_PER_SHELL, d=None, seed=0, cap=2**12, elements=None):
    """No nontrivial subgroup inside B(U).

    Finite groups: every cyclic subgroup meeting the ball is scanned.
    Otherwise every sampled g != 1 must have a power leaving B(U) within
    ``cap``; a non-escaping sample gives ``inconclusive``.
    """
    d = d if d is not None else native_metric(ctx)
    consts = _constants(U_radius=U_radius, n_max=cap, seed=seed)
    if isinstance(ctx, FiniteGroup) and elements is None:
        norms = d.norms(ctx.elements)
        ball = np.flatnonzero((norms < U_radius) & (np.arange(ctx.order) != ctx.identity_index))
        consts["sample_budget"] = int(ball.size)
        if ball.size == 0:
            return Certificate("nss", EXHAUSTIVE, consts, details={"ball_size": 1})
        cur = ball.copy()
        inside = np.ones(ball.size, dtype=bool)
        for _ in range(ctx.order):
            inside &= norms[cur] < U_radius
            cur = ctx.table[cur, ball]
            if np.all(cur == ctx.identity_index):
                break
        if inside.any():
            i = int(ball[np.argmax(inside)])
            g = ctx.element(i)
            sub = ctx.cyclic_subgroup(g)
            w = Witness(g, [(k, float(d.to_identity(ctx.power(g, k)))) for k in range(1, len(sub) + 1)],
                        f"cyclic subgroup of order {len(sub)} inside B({U_radius:g})")
            return Certificate("nss", REFUTED, consts, w,
                               {"subgroup": [ctx.encode(x) for x in sub], "ball_size": int(ball.size) + 1})
        return Certificate("nss", EXHAUSTIVE, consts, details={"ball_size": int(ball.size) + 1})
    gs, vals, exhaustive = sample_domain(d, U_radius, budget, seed, 12, elements)
    consts["sample_budget"] = len(gs)
    if not gs:
        raise _no_samples("nss", U_radius)
    ns, traces = _exit_counts(d, gs, U_radius, cap)
    stuck = np.flatnonzero(ns >= cap)
    details = {"samples": len(gs), "max_escape": int(ns.max()) + 1}
    if stuck.size:
        i = int(stuck[0])
        w = Witness(gs[i], _trace_rows(traces[i], len(traces[i])), f"no power of g left B({U_radius:g}) by {cap}")
        return Certificate("nss", INCONCLUSIVE, consts, w, details)
    return Certificate("nss", _verdict(exhaustive, len(gs)), consts, details=details)


# ---------------------------------------------------------------------------
# right multiplication and local SIN


def _triples_and_pairs(d, radius, budget, seed, elements):
    ctx = d.ctx
    gs, _, exhaustive = sample_domain(d, radius, budget, seed, 8, elements, strict=False)
    gs = [ctx.identity] + gs
    return gs, exhaustive


def check_right_lipschitz(ctx, d, V_radius, budget=DEFAULT_PER_SHELL, seed=0, elements=None, max_pairs=20_000):
    """Least K with d(fh, gh) <= K d(f, g) for f, g, h in B(V)."""
    gs, exhaustive = _triples_and_pairs(d, V_radius, budget, seed, elements)
    rng = np.random.default_rng(seed + 1)
    m = len(gs)
    if m**3 <= max_pairs:
        trip = np.array(np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")).reshape(3, -1).T
    else:
        exhaustive = False
        trip = rng.integers(0, m, size=(max_pairs, 3))
    trip = trip[trip[:, 0] != trip[:, 1]]
    k_fit = 0.0
    worst = None
    for f_i, g_i, h_i in trip:
        f, g, h = gs[f_i], gs[g_i], gs[h_i]
        base = d(f, g)
        if base <= 0:
            continue
        r = d(ctx.multiply(f, h), ctx.multiply(g, h)) / base
        if r > k_fit:
            k_fit, worst = r, (f_i, g_i, h_i)
    consts = _constants(V_radius=V_radius, K=max(k_fit, 1.0) if worst else 1.0, sample_budget=len(trip), seed=seed)
    return Certificate("right_lipschitz", _verdict(exhaustive, len(trip)), consts,
                       details={"K_fitted": k_fit, "triples": int(len(trip))})


def check_local_sin(ctx, d, O_radius, budget=DEFAULT_PER_SHELL, seed=0, elements=None, levels=10, max_pairs=40_000):
    """Modulus of left-uniform continuity of inversion on B(O).

    For V = O 2^-j the table records the largest ladder radius U such that
    d(g^-1 f, 1) <= U implies d(g f^-1, 1) <= V on all sampled pairs.
    """
    gs, exhaustive = _triples_and_pairs(d, O_radius, budget, seed, elements)
    m = len(gs)
    rng = np.random.default_rng(seed + 2)
    if m * m <= max_pairs:
        pairs = np.array(np.meshgrid(np.arange(m), np.arange(m), indexing="ij")).reshape(2, -1).T
    else:
        exhaustive = False
        pairs = rng.integers(0, m, size=(max_pairs, 2))
    a = np.array([d.to_identity(ctx.multiply(ctx.invert(gs[i]), gs[j])) for i, j in pairs])
    b = np.array([d.to_identity(ctx.multiply(gs[i], ctx.invert(gs[j]))) for i, j in pairs])
    ladder = [O_radius * 2.0**-j for j in range(0, levels + 12)]
    table = []
    consts = _constants(O_radius=O_radius, sample_budget=int(len(pairs)), seed=seed)
    for j in range(levels):
        v = O_radius * 2.0**-j
        viol = b > v * (1 + RTOL) + ATOL
        limit = a[viol].min() if viol.any() else np.inf
        u = next((r for r in ladder if r < limit), None)
        if u is None:
            k = int(np.flatnonzero(viol)[np.argmin(a[viol])])
            gi, fi = pairs[k]
            w = Witness(gs[gi], [], f"d(g^-1f,1) = {a[k]:.3g} yet d(gf^-1,1) = {b[k]:.3g} > {v:g}",
                        partner=gs[fi], quantities={"d(g^-1f,1)": float(a[k]), "d(gf^-1,1)": float(b[k])})
            return Certificate("local_sin", REFUTED, consts, w, {"table": table})
        table.append([v, u])
    ratios = [v / u for v, u in table]
    return Certificate("local_sin", _verdict(exhaustive, len(pairs)), consts,
                       details={"table": table, "max_ratio": max(ratios) if ratios else 1.0, "pairs": int(len(pairs))})
