"""Square roots near the identity, root chains, and dyadic one-parameter subgroups."""

from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Any, Callable, Optional

import numpy as np

from .certifier import EXHAUSTIVE, HOLDS, REFUTED, Certificate, Witness
from .errors import ContractionFailure, InsufficientDepth, NoRootError, NumericFailure
from .groups import (
    CyclicTower,
    DiagonalTorus,
    Euclidean,
    FiniteGroup,
    InvolutionProduct,
    IntegerLattice,
    MatrixGroup,
    SpecialOrthogonal,
    UnitaryGroup,
)
from .linalg import sqrtm_denman_beavers, sqrtm_normal

CONTRACTION_RTOL = 1e-9
CONTRACTION_ATOL = 1e-15


# ---------------------------------------------------------------------------
# square roots


def _matrix_sqrt(ctx, f):
    f = np.asarray(f)
    w = np.linalg.eigvals(f.astype(np.complex128))
    if np.any((w.real <= 0) & (np.abs(w.imag) <= 1e-12 * max(1.0, np.abs(w).max()))):
        raise NoRootError("an eigenvalue lies on the closed negative axis: no principal square root")
    if isinstance(ctx, DiagonalTorus):
        return np.diag(np.sqrt(np.diag(f).astype(np.complex128)))
    try:
        g = sqrtm_denman_beavers(f)
    except NumericFailure:
        g = sqrtm_normal(f)
    if np.max(np.abs(g @ g - f)) > 1e-12 and isinstance(ctx, (UnitaryGroup, SpecialOrthogonal)):
        g = sqrtm_normal(f)
    if isinstance(ctx, SpecialOrthogonal):
        g = np.real_if_close(g, tol=1e6).real if np.iscomplexobj(g) else g
    g = ctx._project(np.asarray(g, dtype=ctx.dtype))
    if np.max(np.abs(g @ g - f)) > 1e-10:
        raise NumericFailure("square-root iteration did not reach the requested residual")
    return g


def _finite_roots(ctx, f):
    i = ctx.index(f)
    t = ctx.table
    idx = np.arange(ctx.order)
    return [ctx.element(int(j)) for j in np.flatnonzero(t[idx, idx] == i)]


def group_sqrt(ctx, d, f, V_radius=math.inf):
    """A square root of ``f`` inside B_d(V_radius).

    Matrix groups take the principal root; discrete groups take the root of
    least norm. Raises ``NoRootError`` when no root lies in the ball.
    """
    if ctx.is_identity(f) and not isinstance(ctx, MatrixGroup):
        return ctx.identity
    if isinstance(ctx, MatrixGroup):
        g = _matrix_sqrt(ctx, f)
    elif isinstance(ctx, Euclidean):
        g = tuple(0.5 * x for x in f)
    elif isinstance(ctx, IntegerLattice):
        if any(x % 2 for x in f):
            raise NoRootError(f"{ctx.format(f)} has an odd coordinate: no square root in {ctx!r}")
        g = tuple(x // 2 for x in f)
    elif isinstance(ctx, CyclicTower) and ctx.p % 2 == 1:
        g = (f * pow(2, -1, ctx.modulus)) % ctx.modulus
    elif isinstance(ctx, InvolutionProduct):
        raise NoRootError(f"only the identity is a square in {ctx!r}")
    elif isinstance(ctx, FiniteGroup):
        roots = _finite_roots(ctx, f)
        if not roots:
            raise NoRootError(f"{ctx.format(f)} is not a square in {ctx!r}")
        vals = d.norms(roots)
        g = roots[int(np.argmin(vals))]
    else:
        raise NoRootError(f"square roots are not implemented for {ctx!r}")
    if d.to_identity(g) > V_radius:
        raise NoRootError(f"the root found has d(g,1) = {d.to_identity(g):.3g} > {V_radius:g}")
    return g


# ---------------------------------------------------------------------------
# dyadic parameters and root chains


@dataclass(frozen=True)
class DyadicParam:
    """alpha = m / 2^(k i), kept canonical (i = 0 or 2^k does not divide m)."""

    m: int
    i: int
    k: int = 1

    def __post_init__(self):
        if self.i < 0 or self.k < 1:
            raise ValueError("need i >= 0 and k >= 1")
        m, i = int(self.m), int(self.i)
        base = 1 << self.k
        while i > 0 and m % base == 0:
            m //= base
            i -= 1
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "i", i)

    @property
    def value(self):
        return Fraction(self.m, 1 << (self.k * self.i))

    def __float__(self):
        return float(self.value)

    @classmethod
    def nearest(cls, alpha, k, depth):
        """Best approximant m / 2^(k depth) of a real alpha."""
        scale = 1 << (k * depth)
        return cls(int(round(alpha * scale)), depth, k)

    @classmethod
    def from_fraction(cls, q, k):
        q = Fraction(q)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not dyadic")
        bits = den.bit_length() - 1
        i = -(-bits // k)
        return cls(q.numerator << (k * i - bits), i, k)


@dataclass
class RootChain:
    base: Any
    k: int
    depth: int
    chain: list
    contraction_log: list
    eps: float
    ctx: Any = field(repr=False, default=None)
    meta: dict = field(default_factory=dict)

    def level(self, i):
        if i > self.depth:
            raise InsufficientDepth(f"level {i} requested from a chain of depth {self.depth}")
        return self.chain[i]

    def to_dict(self):
        ctx = self.ctx
        return {
            "base": ctx.encode(self.base),
            "k": self.k,
            "depth": self.depth,
            "eps": self.eps,
            "chain": [ctx.encode(h) for h in self.chain],
            "contraction_log": [[int(i), float(v)] for i, v in self.contraction_log],
            "meta": {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool))},
        }

    @classmethod
    def from_dict(cls, ctx, obj):
        chain = [ctx.decode(h) for h in obj["chain"]]
        return cls(chain[0], obj["k"], obj["depth"], chain, [tuple(r) for r in obj["contraction_log"]], obj["eps"],
                   ctx, dict(obj.get("meta", {})))


def build_root_chain(ctx, d, f, k=1, depth=10, eps=None, V_radius=math.inf, sqrt: Optional[Callable] = None,
                     enforce_contraction=True):
    """h_0 = f and h_(i+1) = the 2^k-th root of h_i, taken as k successive square roots.

    Each step must satisfy d(h_(i+1),1) <= d(h_i,1)/2; otherwise
    ``ContractionFailure`` reports the step and the measured ratio.
    """
    f = ctx.check(f)
    d0 = d.to_identity(f)
    eps = d0 if eps is None else float(eps)
    if d0 > eps:
        raise ValueError(f"d(f,1) = {d0:.3g} exceeds eps = {eps:g}")
    if k < 1 or depth < 0:
        raise ValueError("need k >= 1 and depth >= 0")
    root = sqrt or (lambda h: group_sqrt(ctx, d, h, V_radius))
    chain = [f]
    log = [(0, d0)]
    for i in range(1, depth + 1):
        h = chain[-1]
        for _ in range(k):
            h = root(h)
        dv = d.to_identity(h)
        prev = log[-1][1]
        if enforce_contraction and dv > 0.5 * prev * (1 + CONTRACTION_RTOL) + CONTRACTION_ATOL:
            ratio = dv / prev if prev > 0 else math.inf
            raise ContractionFailure(
                f"step {i}: d(h_{i},1)/d(h_{i - 1},1) = {ratio:.6g} > 1/2 (eps too large or k too small)",
                step=i,
                ratio=ratio,
            )
        chain.append(h)
        log.append((i, dv))
    return RootChain(f, k, depth, chain, log, eps, ctx, {"metric": d.provenance})


def _digits(r, k, i):
    """Base-2^k digits a_1..a_i of r / 2^(k i), for 0 <= r < 2^(k i)."""
    base = 1 << k
    out = []
    for _ in range(i):
        out.append(r % base)
        r //= base
    return out[::-1]


def eval_dyadic(chain, alpha):
    """h^alpha = h_i^m, evaluated through the digit expansion of alpha.

    With alpha = q + sum_j a_j 2^(-k j) this is f^q times the product of
    h_j^(a_j); algebraically equal to h_i^m, but the rounding error grows
    with the depth instead of with m.
    """
    if not isinstance(alpha, DyadicParam):
        alpha = DyadicParam.from_fraction(alpha, chain.k)
    if alpha.k != chain.k:
        alpha = DyadicParam.from_fraction(alpha.value, chain.k)
    ctx = chain.ctx
    if alpha.i > chain.depth:
        raise InsufficientDepth(f"alpha = {alpha.value} needs depth {alpha.i}, chain has {chain.depth}")
    m, i = alpha.m, alpha.i
    neg = m < 0
    m = abs(m)
    scale = 1 << (chain.k * i)
    q, r = divmod(m, scale)
    out = ctx.power(chain.base, q) if q else ctx.identity
    for j, a in enumerate(_digits(r, chain.k, i), start=1):
        if a:
            out = ctx.multiply(out, ctx.power(chain.chain[j], a))
    return ctx.invert(out) if neg else out


def eval_naive(chain, alpha):
    """h_i^m by square-and-multiply (reference for well-definedness checks)."""
    if not isinstance(alpha, DyadicParam):
        alpha = DyadicParam.from_fraction(alpha, chain.k)
    return chain.ctx.power(chain.level(alpha.i), alpha.m)


def required_depth(tol, k, margin=1):
    return int(math.ceil(math.log2(1.0 / tol) / k)) + margin


def eval_real(chain, alpha, tol=None, margin=1):
    """h^alpha at the best dyadic approximant of depth ``chain.depth``.

    With ``tol`` given, the chain must satisfy the depth rule
    depth >= ceil(log2(1/tol)/k) + margin, else ``InsufficientDepth``.
    """
    if tol is not None:
        need = required_depth(tol, chain.k, margin)
        if chain.depth < need:
            raise InsufficientDepth(f"tolerance {tol:g} needs depth {need}, chain has {chain.depth}")
    return eval_dyadic(chain, DyadicParam.nearest(float(alpha), chain.k, chain.depth))


def well_defined(chain, alpha, tol=1e-10):
    """Representations m/2^(ki) and (m 2^k)/2^(k(i+1)) give the same element."""
    if not isinstance(alpha, DyadicParam):
        alpha = DyadicParam.from_fraction(alpha, chain.k)
    if alpha.i + 1 > chain.depth:
        return True
    ctx = chain.ctx
    a = ctx.power(chain.chain[alpha.i], alpha.m)
    b = ctx.power(chain.chain[alpha.i + 1], alpha.m << chain.k)
    return _close(ctx, a, b, tol)


def _close(ctx, a, b, tol):
    if isinstance(ctx, MatrixGroup):
        return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol)
    if isinstance(ctx, Euclidean):
        return max(abs(x - y) for x, y in zip(a, b)) <= tol
    return ctx.equal(a, b)


def cauchy_rates(chain, alpha, d):
    """d(h^(alpha_D), h^(alpha_(D+1))) for successive approximation depths D."""
    vals = []
    prev = None
    for depth in range(chain.depth + 1):
        cur = eval_dyadic(chain, DyadicParam.nearest(float(alpha), chain.k, depth))
        if prev is not None:
            vals.append(d(cur, prev))
        prev = cur
    return vals


def digit_bounds(chain, d, alpha):
    """Distances against the digit-expansion bounds for |alpha| < 1.

    Returns a dict with d(h^alpha,1), the digit sum  sum a_j d(h_j,1),
    the global bound 2^k eps, and the tail bound 2^(k-i) eps for the
    largest i with |alpha| < 2^(-k i).
    """
    ctx = chain.ctx
    p = DyadicParam.nearest(abs(float(alpha)), chain.k, chain.depth)
    g = eval_dyadic(chain, p)
    dist = d.to_identity(g)
    scale = 1 << (chain.k * p.i)
    q, r = divmod(p.m, scale)
    digits = _digits(r, chain.k, p.i)
    digit_sum = q * chain.contraction_log[0][1] + sum(a * chain.contraction_log[j][1] for j, a in enumerate(digits, 1))
    frac = abs(float(p.value))
    tail_i = 0
    while tail_i < chain.depth and frac < 2.0 ** (-chain.k * (tail_i + 1)):
        tail_i += 1
    return {
        "alpha": float(alpha),
        "distance": dist,
        "digit_sum": digit_sum,
        "bound": 2.0**chain.k * chain.eps,
        "tail_level": tail_i,
        "tail_bound": 2.0 ** (chain.k - tail_i) * chain.eps,
    }


# ---------------------------------------------------------------------------
# checks


def _pair_norms(d, xs, ys):
    """d(x_b, y_b) for aligned lists, vectorised on matrix groups."""
    ctx = d.ctx
    if isinstance(ctx, (UnitaryGroup, SpecialOrthogonal)) and d.batch_norm is not None:
        x = np.stack(xs)
        y = np.stack(ys)
        prod = np.einsum("bji,bjk->bik", y.conj(), x)
        return d.norms(list(prod))
    return np.array([d(x, y) for x, y in zip(xs, ys)])


def _squares(ctx, gs):
    if isinstance(ctx, MatrixGroup):
        a = np.stack(gs)
        return list(a @ a)
    return [ctx.multiply(g, g) for g in gs]


def _torsion_probes(ctx):
    if isinstance(ctx, UnitaryGroup) and not isinstance(ctx, DiagonalTorus):
        return [-ctx.identity]
    if isinstance(ctx, SpecialOrthogonal) and ctx.n % 2 == 0:
        return [-ctx.identity]
    if isinstance(ctx, DiagonalTorus):
        return [-ctx.identity]
    return []


def check_sqrt_uniform_continuity(ctx, d, V_radius, budget=100_000, seed=0, pairs=None, levels=10,
                                  injectivity_atol=1e-9, separation_floor=1e-6):
    """Modulus of g^2 -> g on B_d(V_radius), with squaring-injectivity check.

    For each target U = V 2^-j the table holds the largest W from a dyadic
    ladder with d(g^2, f^2) <= W  =>  d(g, f) <= U on every sampled pair.
    Pairs mix independent draws, near pairs at dyadic separations, and
    central torsion probes f = g z with z^2 = 1.
    """
    from .metrics import radial_samples

    rng = np.random.default_rng(seed)
    if pairs is None:
        half = max(budget // 2, 1)
        targets = V_radius * rng.random(2 * half)
        pts, _ = radial_samples(ctx, d, targets, rng)
        gs = pts[:half]
        fs = pts[half:2 * half]
        sep = V_radius * 2.0 ** -rng.integers(1, 40, size=len(gs))
        steps, _ = radial_samples(ctx, d, sep, rng)
        near_g = gs[: len(steps)]
        near_f = [ctx.multiply(g, s) for g, s in zip(near_g, steps)]
        probe_g, probe_f = [], []
        for z in _torsion_probes(ctx):
            probe_g.extend(gs)
            probe_f.extend(ctx.multiply(g, z) for g in gs)
        xs = list(gs[: len(fs)]) + list(near_g) + probe_g
        ys = list(fs) + near_f + probe_f
    else:
        xs = [ctx.check(p[0]) for p in pairs]
        ys = [ctx.check(p[1]) for p in pairs]
    keep = np.flatnonzero((d.norms(xs) <= V_radius) & (d.norms(ys) <= V_radius))
    xs = [xs[i] for i in keep]
    ys = [ys[i] for i in keep]
    consts = {"V_radius": V_radius, "sample_budget": len(xs), "seed": seed}
    if not xs:
        return Certificate("sqrt_continuity", "inconclusive", consts, details={"pairs": 0})
    b = _pair_norms(d, xs, ys)
    a = _pair_norms(d, _squares(ctx, xs), _squares(ctx, ys))
    bad = np.flatnonzero((a <= injectivity_atol) & (b >= separation_floor))
    if bad.size:
        i = int(bad[np.argmax(b[bad])])
        w = Witness(xs[i], [], f"d(g^2,f^2) = {a[i]:.3g} <= {injectivity_atol:g} but d(g,f) = {b[i]:.3g}",
                    partner=ys[i], quantities={"d(g^2,f^2)": float(a[i]), "d(g,f)": float(b[i])})
        return Certificate("sqrt_continuity", REFUTED, consts, w, {"pairs": len(xs), "injective": False})
    table = []
    for j in range(levels):
        u = V_radius * 2.0**-j
        viol = b > u
        limit = a[viol].min() if viol.any() else np.inf
        ladder = (u * 2.0**e for e in range(4, -60, -1))
        w = next((r for r in ladder if r < limit or (not viol.any())), None)
        if w is None:
            k = int(np.flatnonzero(viol)[np.argmin(a[viol])])
            wit = Witness(xs[k], [], f"no W found for U = {u:g}", partner=ys[k],
                          quantities={"d(g^2,f^2)": float(a[k]), "d(g,f)": float(b[k])})
            return Certificate("sqrt_continuity", REFUTED, consts, wit, {"table": table})
        table.append([u, w])
    exhaustive = pairs is not None and isinstance(ctx, FiniteGroup)
    return Certificate("sqrt_continuity", EXHAUSTIVE if exhaustive else HOLDS, consts,
                       details={"pairs": len(xs), "table": table, "injective": True})


@dataclass
class UniquenessVerdict:
    agree: bool
    divergence_level: Optional[int]
    precondition_ok: bool
    max_difference: float
    checked: int
    message: str = ""

    def to_dict(self):
        return {
            "agree": self.agree,
            "divergence_level": self.divergence_level,
            "precondition_ok": self.precondition_ok,
            "max_difference": self.max_difference,
            "checked": self.checked,
            "message": self.message,
        }


def check_uniqueness(ctx, d, f, chains, U_radius, tol=1e-9, numerators=(1, 3, -1)):
    """Compare two chains based at f on their common dyadic parameters.

    Reports the first level l with h^(1/2^l) != g^(1/2^l), and whether any
    evaluation left B_d(U_radius) (a violated precondition).
    """
    c1, c2 = chains
    for c in (c1, c2):
        if not _close(ctx, c.base, f, 1e-12):
            raise ValueError("both chains must be based at f")
    step = math.lcm(c1.k, c2.k)
    top = min(c1.depth * c1.k, c2.depth * c2.k)
    max_diff = 0.0
    level = None
    outside = False
    checked = 0
    for ell in range(0, top + 1, step):
        for m in numerators:
            if ell == 0 and abs(m) != 1:
                continue
            q = Fraction(m, 1 << ell)
            a = eval_dyadic(c1, DyadicParam.from_fraction(q, c1.k))
            b = eval_dyadic(c2, DyadicParam.from_fraction(q, c2.k))
            checked += 1
            outside |= d.to_identity(a) >= U_radius or d.to_identity(b) >= U_radius
            diff = d(a, b)
            max_diff = max(max_diff, diff)
            if diff > tol and level is None:
                level = ell
    agree = level is None
    msg = "chains agree" if agree else f"chains diverge at dyadic level {level}"
    if outside:
        msg += "; evaluations leave B_d(U_radius): precondition violated"
    return UniquenessVerdict(agree, level, not outside, max_diff, checked, msg)
