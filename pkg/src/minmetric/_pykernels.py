"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled ``_ckernels`` module; ``minmetric.kernels``
picks one at import time.
"""

import numpy as np


def dijkstra_steps(step, weight, source):
    """Single-source shortest paths on a step graph.

    ``step[x, s]`` is the node reached from ``x`` by the ``s``-th step, or -1
    when the step leaves the working set. Every step ``s`` costs ``weight[s]``.
    Dense O(N^2 + N*S) variant: the graphs here are (near) complete.
    """
    step = np.asarray(step, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.float64)
    n = step.shape[0]
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    for _ in range(n):
        cand = np.where(done, np.inf, dist)
        u = int(np.argmin(cand))
        if not np.isfinite(cand[u]):
            break
        done[u] = True
        row = step[u]
        ok = row >= 0
        idx = row[ok]
        nd = dist[u] + weight[ok]
        np.minimum.at(dist, idx, nd)
    return dist


def bfs_steps(step, gens, source):
    """Unit-cost breadth-first distances using only the step columns ``gens``."""
    step = np.asarray(step, dtype=np.int64)
    gens = np.asarray(gens, dtype=np.int64)
    dist = np.full(step.shape[0], -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        nxt = step[frontier][:, gens].ravel()
        nxt = nxt[nxt >= 0]
        nxt = np.unique(nxt[dist[nxt] < 0])
        level += 1
        dist[nxt] = level
        frontier = nxt
    return dist


def opnorm_batch(ms, tol=1e-13, max_iter=64):
    """Largest singular value of each matrix in a (B, n, n) stack.

    Power iteration on m*m, accelerated by repeated squaring of the iterate.
    Returns ``(norms, converged)``.
    """
    ms = np.asarray(ms, dtype=np.complex128)
    b = ms.shape[0]
    gram = np.conj(np.swapaxes(ms, 1, 2)) @ ms
    tr = np.real(np.trace(gram, axis1=1, axis2=2))
    zero = tr <= 0.0
    safe = np.where(zero, 1.0, tr)
    p = gram / safe[:, None, None]
    rows = np.arange(b)
    rho_prev = np.full(b, -1.0)
    rho = np.zeros(b)
    converged = zero.copy()
    for _ in range(max_iter):
        col = np.argmax(np.linalg.norm(p, axis=1), axis=1)
        v = p[rows, :, col]
        v = v / np.linalg.norm(v, axis=1)[:, None]
        rho = np.real(np.einsum("bi,bij,bj->b", np.conj(v), gram, v))
        converged |= np.abs(rho - rho_prev) <= tol * np.maximum(rho, 1e-300)
        if converged.all():
            break
        rho_prev = rho
        p = p @ p
        p /= np.real(np.trace(p, axis1=1, axis2=2))[:, None, None]
    rho = np.where(zero, 0.0, np.maximum(rho, 0.0))
    return np.sqrt(rho), converged


def power_trace_batch(gs, n_max):
    """``out[b, k-1] = ||g_b^k - Id||`` for k = 1..n_max."""
    gs = np.asarray(gs, dtype=np.complex128)
    eye = np.eye(gs.shape[1], dtype=np.complex128)
    out = np.empty((gs.shape[0], n_max))
    ok = np.ones(gs.shape[0], dtype=bool)
    cur = gs.copy()
    for k in range(n_max):
        out[:, k], conv = opnorm_batch(cur - eye)
        ok &= conv
        cur = cur @ gs
    return out, ok


def dyadic_trace_batch(gs, depth):
    """``out[b, i] = ||g_b^(2^i) - Id||`` for i = 0..depth."""
    gs = np.asarray(gs, dtype=np.complex128)
    eye = np.eye(gs.shape[1], dtype=np.complex128)
    out = np.empty((gs.shape[0], depth + 1))
    ok = np.ones(gs.shape[0], dtype=bool)
    cur = gs.copy()
    for i in range(depth + 1):
        out[:, i], conv = opnorm_batch(cur - eye)
        ok &= conv
        cur = cur @ cur
    return out, ok
