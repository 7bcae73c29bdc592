"""Group contexts: arithmetic, sampling near the identity, and payload codecs.

Elements are plain payloads owned by their context:

* matrix groups: ``numpy.ndarray`` of shape (n, n)
* ``Euclidean``/``IntegerLattice``/``Heisenberg``: tuples of numbers
* ``FreeGroup``: tuples of nonzero ints, letter ``i+1`` for generator i and
  ``-(i+1)`` for its inverse, always freely reduced
* ``CyclicTower``: an int residue; ``InvolutionProduct``: a tuple of bits
* ``FiniteTable``: an int index into the multiplication table
"""

from collections import deque
from functools import cached_property
from itertools import permutations
import math

import numpy as np

from .errors import PayloadError
from .linalg import expm, expm_skew, logm_normal, polar_project, random_skew_hermitian

EXHAUSTIVE_LIMIT = 2**16


class GroupContext:
    kind = "abstract"
    finite = False
    discrete = False

    def __init__(self, seed=0):
        self.sampler_seed = int(seed)

    # arithmetic -----------------------------------------------------------
    @property
    def identity(self):
        raise NotImplementedError

    def multiply(self, a, b):
        raise NotImplementedError

    def invert(self, a):
        raise NotImplementedError

    def check(self, g):
        """Return ``g`` normalised to this context, or raise ``PayloadError``."""
        return g

    def power(self, g, n):
        """g**n by square-and-multiply; negative n goes through the inverse."""
        n = int(n)
        if n < 0:
            g = self.invert(g)
            n = -n
        result = self.identity
        base = g
        while n:
            if n & 1:
                result = self.multiply(result, base)
            n >>= 1
            if n:
                base = self.multiply(base, base)
        return result

    def conjugate(self, g, f):
        """f^-1 g f"""
        return self.multiply(self.multiply(self.invert(f), g), f)

    def equal(self, a, b, tol=0.0):
        return self.key(a) == self.key(b)

    def is_identity(self, g, tol=0.0):
        return self.equal(g, self.identity, tol)

    def key(self, g):
        return g

    # topology witness -------------------------------------------------------
    def displacement(self, g):
        """Payload-level size of g; tends to 0 exactly when g tends to the identity."""
        return 0.0 if self.is_identity(g) else 1.0

    # codecs -----------------------------------------------------------------
    def descriptor(self):
        return {"kind": self.kind}

    def encode(self, g):
        return g

    def decode(self, obj):
        return self.check(obj)

    def format(self, g):
        return str(self.encode(g))

    def __repr__(self):
        params = ", ".join(f"{k}={v}" for k, v in self.descriptor().items() if k != "kind")
        return f"{self.kind}({params})"

    # search support -----------------------------------------------------------
    def step_table(self, nodes, steps):
        """``out[i, s]`` = position of ``nodes[i] * steps[s]`` in ``nodes``, or -1."""
        pos = {self.key(x): i for i, x in enumerate(nodes)}
        out = np.full((len(nodes), len(steps)), -1, dtype=np.int64)
        for i, x in enumerate(nodes):
            for j, s in enumerate(steps):
                out[i, j] = pos.get(self.key(self.multiply(x, s)), -1)
        return out


# ---------------------------------------------------------------------------
# continuous groups


class MatrixGroup(GroupContext):
    dtype = np.float64

    def __init__(self, n, unitarity_tol=1e-12, seed=0):
        super().__init__(seed)
        self.n = int(n)
        self.unitarity_tol = float(unitarity_tol)

    @cached_property
    def identity(self):
        return np.eye(self.n, dtype=self.dtype)

    def descriptor(self):
        return {"kind": self.kind, "n": self.n}

    def check(self, g):
        try:
            arr = np.asarray(g, dtype=self.dtype)
        except (TypeError, ValueError) as exc:
            raise PayloadError(f"{self!r}: cannot read payload as a matrix") from exc
        if arr.shape != (self.n, self.n):
            raise PayloadError(f"{self!r}: expected shape {(self.n, self.n)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PayloadError(f"{self!r}: non-finite entries")
        self._check_manifold(arr)
        return arr

    def _check_manifold(self, arr):
        pass

    def multiply(self, a, b):
        return self._project(a @ b)

    def _project(self, m):
        return m

    def equal(self, a, b, tol=1e-10):
        return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol)

    def key(self, g):
        return tuple(np.round(np.asarray(g), 10).ravel().tolist())

    def displacement(self, g):
        return float(np.linalg.norm(np.asarray(g) - self.identity))

    def encode(self, g):
        g = np.asarray(g)
        if np.iscomplexobj(g):
            return [[[float(z.real), float(z.imag)] for z in row] for row in g]
        return [[float(x) for x in row] for row in g]

    def decode(self, obj):
        arr = np.asarray(obj, dtype=float)
        if arr.ndim == 3 and arr.shape[-1] == 2:
            arr = arr[..., 0] + 1j * arr[..., 1]
        return self.check(arr)

    # Lie-theoretic sampling -------------------------------------------------
    def random_tangent(self, rng, norm):
        raise NotImplementedError

    def exp(self, x):
        return self._project(expm(x))

    def log(self, g):
        return logm_normal(g)

    def sample_near_identity(self, rng, scale):
        return self.exp(self.random_tangent(rng, scale))


class UnitaryGroup(MatrixGroup):
    kind = "unitary"
    dtype = np.complex128

    def _check_manifold(self, arr):
        drift = np.linalg.norm(arr.conj().T @ arr - np.eye(self.n))
        if drift > 1e-8:
            raise PayloadError(f"{self!r}: payload is not unitary (drift {drift:.2e})")

    def invert(self, a):
        return np.asarray(a).conj().T

    def drift(self, g):
        return float(np.linalg.norm(g.conj().T @ g - np.eye(self.n)))

    def _project(self, m):
        if self.drift(m) > self.unitarity_tol:
            return polar_project(m)
        return m

    def random_tangent(self, rng, norm):
        return random_skew_hermitian(rng, self.n, norm)

    def exp(self, x):
        return expm_skew(np.asarray(x, dtype=np.complex128))


class SpecialOrthogonal(MatrixGroup):
    kind = "special_orthogonal"
    dtype = np.float64

    def _check_manifold(self, arr):
        drift = np.linalg.norm(arr.T @ arr - np.eye(self.n))
        if drift > 1e-8 or np.linalg.det(arr) < 0:
            raise PayloadError(f"{self!r}: payload is not a rotation")

    def invert(self, a):
        return np.asarray(a).T

    def drift(self, g):
        return float(np.linalg.norm(g.T @ g - np.eye(self.n)))

    def _project(self, m):
        if self.drift(m) > self.unitarity_tol:
            return polar_project(m)
        return m

    def random_tangent(self, rng, norm):
        return random_skew_hermitian(rng, self.n, norm, real=True)

    def exp(self, x):
        return expm_skew(np.asarray(x, dtype=np.float64))

    @staticmethod
    def rotation(theta):
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s], [s, c]])


class DiagonalTorus(UnitaryGroup):
    """Diagonal subgroup of U(n)."""

    kind = "diagonal_torus"

    def _check_manifold(self, arr):
        super()._check_manifold(arr)
        if np.max(np.abs(arr - np.diag(np.diag(arr)))) > 0:
            raise PayloadError(f"{self!r}: payload is not diagonal")

    def random_tangent(self, rng, norm):
        theta = rng.uniform(-1.0, 1.0, self.n)
        theta *= norm / max(np.max(np.abs(theta)), 1e-300)
        return np.diag(1j * theta)

    def exp(self, x):
        return np.diag(np.exp(np.diag(x)))

    def _project(self, m):
        d = np.diag(m)
        return np.diag(d / np.abs(d))

    @staticmethod
    def element(*angles):
        return np.diag(np.exp(1j * np.asarray(angles, dtype=float)))


class GeneralLinear(MatrixGroup):
    kind = "general_linear"
    dtype = np.float64

    def _check_manifold(self, arr):
        if abs(np.linalg.det(arr)) < 1e-300:
            raise PayloadError(f"{self!r}: singular matrix")

    def invert(self, a):
        return np.linalg.inv(a)

    def random_tangent(self, rng, norm):
        x = rng.standard_normal((self.n, self.n))
        return x * (norm / np.linalg.norm(x, 2))


class Euclidean(GroupContext):
    """(R^m, +); payloads are tuples of floats."""

    kind = "euclidean"

    def __init__(self, m=1, seed=0):
        super().__init__(seed)
        self.m = int(m)

    def descriptor(self):
        return {"kind": self.kind, "m": self.m}

    @cached_property
    def identity(self):
        return (0.0,) * self.m

    def check(self, g):
        if isinstance(g, (int, float)) and self.m == 1:
            g = (g,)
        try:
            g = tuple(float(x) for x in g)
        except TypeError as exc:
            raise PayloadError(f"{self!r}: payload must be a sequence of reals") from exc
        if len(g) != self.m:
            raise PayloadError(f"{self!r}: expected {self.m} coordinates, got {len(g)}")
        return g

    def multiply(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def invert(self, a):
        return tuple(-x for x in a)

    def power(self, g, n):
        return tuple(n * x for x in g)

    def equal(self, a, b, tol=0.0):
        return max(abs(x - y) for x, y in zip(a, b)) <= tol

    def displacement(self, g):
        return math.sqrt(sum(x * x for x in g))

    def encode(self, g):
        return list(g)

    def random_tangent(self, rng, norm):
        v = rng.standard_normal(self.m)
        return v * (norm / np.linalg.norm(v))

    def exp(self, x):
        return tuple(float(t) for t in x)

    def sample_near_identity(self, rng, scale):
        return self.exp(self.random_tangent(rng, scale))


# ---------------------------------------------------------------------------
# discrete infinite groups


class DiscreteGroup(GroupContext):
    discrete = True

    @property
    def generators(self):
        """Symmetric generating set used for word-length and ball enumeration."""
        raise NotImplementedError

    def word_ball(self, radius, limit=EXHAUSTIVE_LIMIT):
        """Elements of word length <= radius with their lengths (breadth-first)."""
        start = self.identity
        seen = {self.key(start): 0}
        out = [(start, 0)]
        frontier = deque([start])
        gens = self.generators
        while frontier:
            x = frontier.popleft()
            r = seen[self.key(x)]
            if r >= radius:
                continue
            for s in gens:
                y = self.multiply(x, s)
                k = self.key(y)
                if k not in seen:
                    seen[k] = r + 1
                    out.append((y, r + 1))
                    if len(out) > limit:
                        raise OverflowError(f"word ball of radius {radius} exceeds {limit} elements")
                    frontier.append(y)
        return out

    def sample_at_scale(self, rng, scale):
        """Random product of about ``scale`` generators."""
        g = self.identity
        gens = self.generators
        for _ in range(max(1, int(round(scale)))):
            g = self.multiply(g, gens[int(rng.integers(len(gens)))])
        return g


class IntegerLattice(DiscreteGroup):
    kind = "integer_lattice"

    def __init__(self, d=1, seed=0):
        super().__init__(seed)
        self.d = int(d)

    def descriptor(self):
        return {"kind": self.kind, "d": self.d}

    @cached_property
    def identity(self):
        return (0,) * self.d

    @cached_property
    def generators(self):
        out = []
        for i in range(self.d):
            for s in (1, -1):
                e = [0] * self.d
                e[i] = s
                out.append(tuple(e))
        return out

    def check(self, g):
        if isinstance(g, (int, np.integer)) and self.d == 1:
            g = (int(g),)
        try:
            vals = tuple(g)
        except TypeError as exc:
            raise PayloadError(f"{self!r}: payload must be an integer tuple") from exc
        if len(vals) != self.d or any(int(x) != x for x in vals):
            raise PayloadError(f"{self!r}: expected {self.d} integer coordinates, got {g!r}")
        return tuple(int(x) for x in vals)

    def multiply(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def invert(self, a):
        return tuple(-x for x in a)

    def power(self, g, n):
        return tuple(n * x for x in g)

    def encode(self, g):
        return list(g)

    def word_ball(self, radius, limit=EXHAUSTIVE_LIMIT):
        if self.d != 1:
            return super().word_ball(radius, limit)
        r = int(math.floor(radius))
        return [((x,), abs(x)) for x in sorted(range(-r, r + 1), key=lambda x: (abs(x), -x))]

    def sample_at_scale(self, rng, scale):
        v = rng.standard_normal(self.d)
        v = v * (scale / max(np.abs(v).sum(), 1e-300))
        return tuple(int(round(x)) for x in v)

    def step_table(self, nodes, steps):
        if self.d != 1:
            return super().step_table(nodes, steps)
        xs = np.array([x[0] for x in nodes], dtype=np.int64)
        ss = np.array([s[0] for s in steps], dtype=np.int64)
        lo = int(xs.min())
        span = int(xs.max()) - lo + 1
        pos = np.full(span, -1, dtype=np.int64)
        pos[xs - lo] = np.arange(len(xs))
        target = xs[:, None] + ss[None, :] - lo
        ok = (target >= 0) & (target < span)
        out = np.full(target.shape, -1, dtype=np.int64)
        out[ok] = pos[target[ok]]
        return out


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class FreeGroup(DiscreteGroup):
    kind = "free_group"

    def __init__(self, rank=2, seed=0):
        super().__init__(seed)
        self.rank = int(rank)
        if not 1 <= self.rank <= len(_LETTERS):
            raise ValueError("rank must be between 1 and 26")

    def descriptor(self):
        return {"kind": self.kind, "rank": self.rank}

    identity = ()

    @cached_property
    def generators(self):
        return [(s * (i + 1),) for i in range(self.rank) for s in (1, -1)]

    @staticmethod
    def reduce(letters):
        out = []
        for x in letters:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def check(self, g):
        if isinstance(g, str):
            return self.parse(g)
        try:
            letters = tuple(int(x) for x in g)
        except TypeError as exc:
            raise PayloadError(f"{self!r}: bad word payload {g!r}") from exc
        if any(x == 0 or abs(x) > self.rank for x in letters):
            raise PayloadError(f"{self!r}: letter out of range in {g!r}")
        return self.reduce(letters)

    def parse(self, text):
        """Parse ``"ab"``, ``"b⁻¹a"``, ``"b^-1a"`` or ``"Ba"`` (upper case = inverse)."""
        letters = []
        i = 0
        text = text.replace(" ", "").replace("·", "").replace("*", "")
        while i < len(text):
            ch = text[i]
            low = ch.lower()
            if low not in _LETTERS[: self.rank]:
                raise PayloadError(f"{self!r}: unknown letter {ch!r} in {text!r}")
            letter = _LETTERS.index(low) + 1
            if ch.isupper():
                letter = -letter
            i += 1
            for suffix in ("⁻¹", "^-1", "'"):
                if text.startswith(suffix, i):
                    letter = -letter
                    i += len(suffix)
                    break
            letters.append(letter)
        return self.reduce(letters)

    def multiply(self, a, b):
        out = list(a)
        for x in b:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def invert(self, a):
        return tuple(-x for x in reversed(a))

    def format(self, g):
        if not g:
            return "1"
        return "".join(_LETTERS[abs(x) - 1] + ("⁻¹" if x < 0 else "") for x in g)

    def encode(self, g):
        return "".join(_LETTERS[abs(x) - 1].upper() if x < 0 else _LETTERS[x - 1] for x in g)

    def sample_at_scale(self, rng, scale):
        length = max(1, int(round(scale)))
        out = []
        while len(out) < length:
            x = int(rng.integers(1, self.rank + 1)) * (1 if rng.random() < 0.5 else -1)
            if out and out[-1] == -x:
                continue
            out.append(x)
        return tuple(out)


class Heisenberg(DiscreteGroup):
    """Upper unitriangular n x n integer matrices; payload = entries above the diagonal."""

    kind = "heisenberg"

    def __init__(self, n=3, seed=0):
        super().__init__(seed)
        self.n = int(n)
        if self.n < 2:
            raise ValueError("heisenberg needs n >= 2")
        self._slots = [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]

    def descriptor(self):
        return {"kind": self.kind, "n": self.n}

    @cached_property
    def identity(self):
        return (0,) * len(self._slots)

    @cached_property
    def generators(self):
        out = []
        for i in range(self.n - 1):
            for s in (1, -1):
                m = [[int(r == c) for c in range(self.n)] for r in range(self.n)]
                m[i][i + 1] = s
                out.append(self._pack(m))
        return out

    def _unpack(self, g):
        m = [[int(r == c) for c in range(self.n)] for r in range(self.n)]
        for (i, j), v in zip(self._slots, g):
            m[i][j] = v
        return m

    def _pack(self, m):
        return tuple(m[i][j] for i, j in self._slots)

    def matrix(self, g):
        return np.array(self._unpack(g), dtype=object)

    def check(self, g):
        vals = tuple(g)
        if len(vals) != len(self._slots) or any(int(x) != x for x in vals):
            raise PayloadError(f"{self!r}: expected {len(self._slots)} integer entries")
        return tuple(int(x) for x in vals)

    def multiply(self, a, b):
        x, y = self._unpack(a), self._unpack(b)
        n = self.n
        return tuple(sum(x[i][k] * y[k][j] for k in range(i, j + 1)) for i, j in self._slots)

    def invert(self, a):
        # (I + N)^-1 = I - N + N^2 - ...
        n = self.n
        m = self._unpack(a)
        nil = [[m[i][j] - int(i == j) for j in range(n)] for i in range(n)]
        out = [[int(i == j) for j in range(n)] for i in range(n)]
        term = [row[:] for row in out]
        for k in range(1, n):
            term = [[-sum(term[i][t] * nil[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
            out = [[out[i][j] + term[i][j] for j in range(n)] for i in range(n)]
        return self._pack(out)

    def encode(self, g):
        return list(g)


# ---------------------------------------------------------------------------
# finite groups


class FiniteGroup(GroupContext):
    finite = True
    discrete = True

    @property
    def order(self):
        raise NotImplementedError

    def index(self, g):
        raise NotImplementedError

    def element(self, i):
        raise NotImplementedError

    @cached_property
    def elements(self):
        return [self.element(i) for i in range(self.order)]

    @cached_property
    def table(self):
        """Cayley table on indices: table[i, j] = index(e_i * e_j)."""
        els = self.elements
        out = np.empty((self.order, self.order), dtype=np.int64)
        for i, a in enumerate(els):
            for j, b in enumerate(els):
                out[i, j] = self.index(self.multiply(a, b))
        return out

    @cached_property
    def inverse_table(self):
        return np.array([self.index(self.invert(g)) for g in self.elements], dtype=np.int64)

    @cached_property
    def identity_index(self):
        return self.index(self.identity)

    @property
    def exhaustive(self):
        return self.order <= EXHAUSTIVE_LIMIT

    def key(self, g):
        return self.index(g)

    def step_table(self, nodes, steps):
        ni = np.array([self.index(x) for x in nodes], dtype=np.int64)
        si = np.array([self.index(s) for s in steps], dtype=np.int64)
        prod = self.table[np.ix_(ni, si)]
        pos = np.full(self.order, -1, dtype=np.int64)
        pos[ni] = np.arange(len(ni))
        return pos[prod]

    def sample_at_scale(self, rng, scale):
        return self.element(int(rng.integers(self.order)))

    def cyclic_subgroup(self, g):
        out = [self.identity]
        x = g
        while not self.is_identity(x):
            out.append(x)
            x = self.multiply(x, g)
        return out


class FiniteTable(FiniteGroup):
    """Group given by an explicit multiplication table on 0..N-1."""

    kind = "finite_table"

    def __init__(self, table, labels=None, name=None, seed=0):
        super().__init__(seed)
        t = np.asarray(table, dtype=np.int64)
        n = t.shape[0]
        if t.shape != (n, n) or t.min() < 0 or t.max() >= n:
            raise ValueError("table must be square with entries in [0, N)")
        ident = [e for e in range(n) if np.array_equal(t[e], np.arange(n)) and np.array_equal(t[:, e], np.arange(n))]
        if len(ident) != 1:
            raise ValueError("table has no two-sided identity")
        for row in t:
            if len(set(row.tolist())) != n:
                raise ValueError("table is not a Latin square")
        self._table = t
        self._identity = ident[0]
        self.labels = list(labels) if labels is not None else [str(i) for i in range(n)]
        self.name = name
        inv = np.empty(n, dtype=np.int64)
        for a in range(n):
            inv[a] = int(np.nonzero(t[a] == self._identity)[0][0])
        self._inv = inv

    def descriptor(self):
        d = {"kind": self.kind, "order": self.order}
        if self.name:
            d["name"] = self.name
        return d

    @property
    def order(self):
        return self._table.shape[0]

    @property
    def identity(self):
        return self._identity

    @property
    def table(self):
        return self._table

    @property
    def inverse_table(self):
        return self._inv

    def index(self, g):
        return int(g)

    def element(self, i):
        return int(i)

    def check(self, g):
        if isinstance(g, str) and g in self.labels:
            return self.labels.index(g)
        try:
            i = int(g)
        except (TypeError, ValueError) as exc:
            raise PayloadError(f"{self!r}: bad table index {g!r}") from exc
        if not 0 <= i < self.order:
            raise PayloadError(f"{self!r}: index {i} outside [0, {self.order})")
        return i

    def multiply(self, a, b):
        return int(self._table[a, b])

    def invert(self, a):
        return int(self._inv[a])

    def format(self, g):
        return self.labels[g]

    # standard examples ----------------------------------------------------
    @classmethod
    def cyclic(cls, m):
        idx = np.arange(m)
        return cls((idx[:, None] + idx[None, :]) % m, name=f"Z/{m}")

    @classmethod
    def from_permutations(cls, perms, name=None):
        perms = [tuple(p) for p in perms]
        pos = {p: i for i, p in enumerate(perms)}
        n = len(perms)
        t = np.empty((n, n), dtype=np.int64)
        for i, p in enumerate(perms):
            for j, q in enumerate(perms):
                # (p*q)(x) = p(q(x))
                t[i, j] = pos[tuple(p[q[x]] for x in range(len(q)))]
        labels = ["".join(str(x) for x in p) for p in perms]
        return cls(t, labels=labels, name=name)

    @classmethod
    def symmetric(cls, k):
        perms = sorted(permutations(range(k)))
        return cls.from_permutations(perms, name=f"S{k}")

    @classmethod
    def dihedral(cls, m):
        """Dihedral group of order 2m; index r^i s^e is i + m*e."""
        n = 2 * m
        t = np.empty((n, n), dtype=np.int64)
        for a in range(n):
            i, e = a % m, a // m
            for b in range(n):
                j, f = b % m, b // m
                # r^i s^e r^j s^f = r^(i + (-1)^e j) s^(e+f)
                k = (i + (j if e == 0 else -j)) % m
                t[a, b] = k + m * ((e + f) % 2)
        labels = [f"r{i}" if e == 0 else f"r{i}s" for e in range(2) for i in range(m)]
        return cls(t, labels=labels, name=f"D{n}")


class CyclicTower(FiniteGroup):
    """Z/p^depth with its subgroup tower p^n Z / p^depth Z."""

    kind = "finite_cyclic_tower"

    def __init__(self, p=2, depth=10, seed=0):
        super().__init__(seed)
        self.p = int(p)
        self.depth = int(depth)
        self.modulus = self.p**self.depth

    def descriptor(self):
        return {"kind": self.kind, "p": self.p, "depth": self.depth}

    @property
    def order(self):
        return self.modulus

    identity = 0

    def index(self, g):
        return int(g)

    def element(self, i):
        return int(i)

    def check(self, g):
        try:
            i = int(g)
        except (TypeError, ValueError) as exc:
            raise PayloadError(f"{self!r}: bad residue {g!r}") from exc
        if not 0 <= i < self.modulus:
            raise PayloadError(f"{self!r}: residue {i} outside [0, {self.modulus})")
        return i

    def multiply(self, a, b):
        return (a + b) % self.modulus

    def invert(self, a):
        return (-a) % self.modulus

    def power(self, g, n):
        return (g * n) % self.modulus

    @cached_property
    def table(self):
        idx = np.arange(self.modulus, dtype=np.int64)
        return (idx[:, None] + idx[None, :]) % self.modulus

    @cached_property
    def inverse_table(self):
        return (-np.arange(self.modulus, dtype=np.int64)) % self.modulus

    def level(self, g):
        """Largest n <= depth with g in p^n Z."""
        if g == 0:
            return self.depth
        v = 0
        while g % self.p == 0:
            g //= self.p
            v += 1
        return v


class InvolutionProduct(FiniteGroup):
    """(Z/2)^depth; level n is the subgroup of elements vanishing on coordinates < n."""

    kind = "finite_product_of_involutions"

    def __init__(self, depth=10, seed=0):
        super().__init__(seed)
        self.depth = int(depth)

    def descriptor(self):
        return {"kind": self.kind, "depth": self.depth}

    @property
    def order(self):
        return 2**self.depth

    @cached_property
    def identity(self):
        return (0,) * self.depth

    def index(self, g):
        return sum(b << i for i, b in enumerate(g))

    def element(self, i):
        return tuple((i >> k) & 1 for k in range(self.depth))

    def check(self, g):
        if isinstance(g, (int, np.integer)):
            if not 0 <= g < self.order:
                raise PayloadError(f"{self!r}: index {g} out of range")
            return self.element(int(g))
        vals = tuple(g)
        if len(vals) != self.depth or any(b not in (0, 1) for b in vals):
            raise PayloadError(f"{self!r}: expected {self.depth} bits, got {g!r}")
        return tuple(int(b) for b in vals)

    def multiply(self, a, b):
        return tuple(x ^ y for x, y in zip(a, b))

    def invert(self, a):
        return a

    def power(self, g, n):
        return g if n % 2 else self.identity

    @cached_property
    def table(self):
        idx = np.arange(self.order, dtype=np.int64)
        return idx[:, None] ^ idx[None, :]

    @cached_property
    def inverse_table(self):
        return np.arange(self.order, dtype=np.int64)

    def level(self, g):
        for i, b in enumerate(g):
            if b:
                return i
        return self.depth

    def encode(self, g):
        return list(g)


# ---------------------------------------------------------------------------

_KINDS = {
    "unitary": lambda p: UnitaryGroup(p.get("n", 2), p.get("unitarity_tol", 1e-12), p.get("seed", 0)),
    "special_orthogonal": lambda p: SpecialOrthogonal(p.get("n", 2), p.get("unitarity_tol", 1e-12), p.get("seed", 0)),
    "diagonal_torus": lambda p: DiagonalTorus(p.get("n", 2), p.get("unitarity_tol", 1e-12), p.get("seed", 0)),
    "general_linear": lambda p: GeneralLinear(p.get("n", 2), seed=p.get("seed", 0)),
    "euclidean": lambda p: Euclidean(p.get("m", 1), p.get("seed", 0)),
    "integer_lattice": lambda p: IntegerLattice(p.get("d", 1), p.get("seed", 0)),
    "free_group": lambda p: FreeGroup(p.get("rank", 2), p.get("seed", 0)),
    "heisenberg": lambda p: Heisenberg(p.get("n", 3), p.get("seed", 0)),
    "finite_cyclic_tower": lambda p: CyclicTower(p.get("p", 2), p.get("depth", 10), p.get("seed", 0)),
    "finite_product_of_involutions": lambda p: InvolutionProduct(p.get("depth", 10), p.get("seed", 0)),
    "finite_table": lambda p: _table_from_params(p),
}


def _table_from_params(p):
    if "table" in p:
        return FiniteTable(p["table"], labels=p.get("labels"), name=p.get("name"), seed=p.get("seed", 0))
    named = p.get("name", "")
    if named.startswith("Z/"):
        return FiniteTable.cyclic(int(named[2:]))
    if named.startswith("D"):
        return FiniteTable.dihedral(int(named[1:]) // 2)
    if named.startswith("S"):
        return FiniteTable.symmetric(int(named[1:]))
    raise ValueError("finite_table needs 'table' or a name like 'Z/7', 'D16', 'S3'")


GROUP_KINDS = tuple(_KINDS)


def make_group(descriptor):
    """Build a context from ``{"kind": ..., <params>}``."""
    params = dict(descriptor)
    kind = params.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown group kind {kind!r}; expected one of {', '.join(GROUP_KINDS)}")
    return _KINDS[kind](params)
