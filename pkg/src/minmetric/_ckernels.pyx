# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see ``_pykernels`` for the contracts)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


def dijkstra_steps(cnp.int64_t[:, ::1] step, double[::1] weight, Py_ssize_t source):
    cdef Py_ssize_t n = step.shape[0]
    cdef Py_ssize_t s = step.shape[1]
    cdef Py_ssize_t it, i, u, v
    cdef double best, nd
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.uint8)
    cdef double[::1] d = dist
    cdef unsigned char[::1] dn = done
    d[source] = 0.0
    with nogil:
        for it in range(n):
            u = -1
            best = INFINITY
            for i in range(n):
                if not dn[i] and d[i] < best:
                    best = d[i]
                    u = i
            if u < 0:
                break
            dn[u] = 1
            for i in range(s):
                v = step[u, i]
                if v >= 0:
                    nd = best + weight[i]
                    if nd < d[v]:
                        d[v] = nd
    return dist


def bfs_steps(cnp.int64_t[:, ::1] step, cnp.int64_t[::1] gens, Py_ssize_t source):
    cdef Py_ssize_t n = step.shape[0]
    cdef Py_ssize_t ng = gens.shape[0]
    cdef Py_ssize_t head = 0, tail = 0, u, v, j
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] d = dist
    cdef cnp.int64_t[::1] q = queue
    d[source] = 0
    q[tail] = source
    tail += 1
    with nogil:
        while head < tail:
            u = q[head]
            head += 1
            for j in range(ng):
                v = step[u, gens[j]]
                if v >= 0 and d[v] < 0:
                    d[v] = d[u] + 1
                    q[tail] = v
                    tail += 1
    return dist


cdef int _opnorm(double complex[:, ::1] m, double complex[:, ::1] gram,
                 double complex[:, ::1] p, double complex[:, ::1] tmp,
                 double complex[::1] v, double tol, int max_iter,
                 double* out) noexcept nogil:
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t i, j, k, col
    cdef double complex acc
    cdef double tr, rho, rho_prev, colsq, best, nrm
    cdef int it
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc = acc + m[k, i].conjugate() * m[k, j]
            gram[i, j] = acc
    tr = 0.0
    for i in range(n):
        tr += gram[i, i].real
    if tr <= 0.0:
        out[0] = 0.0
        return 1
    for i in range(n):
        for j in range(n):
            p[i, j] = gram[i, j] / tr
    rho_prev = -1.0
    rho = 0.0
    for it in range(max_iter):
        col = 0
        best = -1.0
        for j in range(n):
            colsq = 0.0
            for i in range(n):
                colsq += p[i, j].real * p[i, j].real + p[i, j].imag * p[i, j].imag
            if colsq > best:
                best = colsq
                col = j
        nrm = sqrt(best)
        for i in range(n):
            v[i] = p[i, col] / nrm
        rho = 0.0
        for i in range(n):
            acc = 0
            for j in range(n):
                acc = acc + gram[i, j] * v[j]
            rho += (v[i].conjugate() * acc).real
        if fabs(rho - rho_prev) <= tol * (rho if rho > 1e-300 else 1e-300):
            out[0] = sqrt(rho if rho > 0.0 else 0.0)
            return 1
        rho_prev = rho
        tr = 0.0
        for i in range(n):
            for j in range(n):
                acc = 0
                for k in range(n):
                    acc = acc + p[i, k] * p[k, j]
                tmp[i, j] = acc
            tr += tmp[i, i].real
        for i in range(n):
            for j in range(n):
                p[i, j] = tmp[i, j] / tr
    out[0] = sqrt(rho if rho > 0.0 else 0.0)
    return 0


def opnorm_batch(ms, double tol=1e-13, int max_iter=64):
    cdef double complex[:, :, ::1] a = np.ascontiguousarray(ms, dtype=np.complex128)
    cdef Py_ssize_t b = a.shape[0], n = a.shape[1], r
    norms = np.empty(b)
    conv = np.empty(b, dtype=bool)
    cdef double[::1] out = norms
    cdef cnp.npy_bool[::1] ok = conv
    cdef double complex[:, ::1] gram = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] p = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=np.complex128)
    cdef double complex[::1] v = np.empty(n, dtype=np.complex128)
    with nogil:
        for r in range(b):
            ok[r] = _opnorm(a[r], gram, p, tmp, v, tol, max_iter, &out[r])
    return norms, conv


cdef int _trace(double complex[:, ::1] g, Py_ssize_t count, bint dyadic,
                double complex[:, ::1] cur, double complex[:, ::1] nxt,
                double complex[:, ::1] m, double complex[:, ::1] gram,
                double complex[:, ::1] p, double complex[:, ::1] tmp,
                double complex[::1] v, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t i, j, k, step
    cdef double complex acc
    cdef int ok = 1
    for i in range(n):
        for j in range(n):
            cur[i, j] = g[i, j]
    for step in range(count):
        for i in range(n):
            for j in range(n):
                m[i, j] = cur[i, j] - (1.0 if i == j else 0.0)
        ok &= _opnorm(m, gram, p, tmp, v, 1e-13, 64, &out[step])
        for i in range(n):
            for j in range(n):
                acc = 0
                for k in range(n):
                    if dyadic:
                        acc = acc + cur[i, k] * cur[k, j]
                    else:
                        acc = acc + cur[i, k] * g[k, j]
                nxt[i, j] = acc
        for i in range(n):
            for j in range(n):
                cur[i, j] = nxt[i, j]
    return ok


def _trace_batch(gs, Py_ssize_t count, bint dyadic):
    cdef double complex[:, :, ::1] a = np.ascontiguousarray(gs, dtype=np.complex128)
    cdef Py_ssize_t b = a.shape[0], n = a.shape[1], r
    res = np.empty((b, count))
    conv = np.empty(b, dtype=bool)
    cdef double[:, ::1] out = res
    cdef cnp.npy_bool[::1] ok = conv
    cdef double complex[:, ::1] cur = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] nxt = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] m = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] gram = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] p = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=np.complex128)
    cdef double complex[::1] v = np.empty(n, dtype=np.complex128)
    with nogil:
        for r in range(b):
            ok[r] = _trace(a[r], count, dyadic, cur, nxt, m, gram, p, tmp, v, out[r])
    return res, conv


def power_trace_batch(gs, Py_ssize_t n_max):
    return _trace_batch(gs, n_max, False)


def dyadic_trace_batch(gs, Py_ssize_t depth):
    return _trace_batch(gs, depth + 1, True)
