"""Hot-kernel dispatch.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``MINMETRIC_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MINMETRIC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


class ConvergenceError(ArithmeticError):
    """Power iteration hit its cap without meeting the tolerance."""


def _steps(step):
    return np.ascontiguousarray(step, dtype=np.int64)


def dijkstra_steps(step, weight, source=0):
    w = np.ascontiguousarray(weight, dtype=np.float64).copy()
    w[np.abs(w) < 1e-15] = 0.0
    return _impl.dijkstra_steps(_steps(step), w, int(source))


def bfs_steps(step, gens, source=0):
    return _impl.bfs_steps(_steps(step), np.ascontiguousarray(gens, dtype=np.int64), int(source))


def opnorm_batch(ms, tol=1e-13, max_iter=64, strict=True):
    ms = np.ascontiguousarray(ms, dtype=np.complex128)
    norms, ok = _impl.opnorm_batch(ms, tol, max_iter)
    if strict and not np.all(ok):
        raise ConvergenceError(f"{int((~ok).sum())} matrices did not converge")
    return norms


def power_trace_batch(gs, n_max):
    out, ok = _impl.power_trace_batch(np.ascontiguousarray(gs, dtype=np.complex128), int(n_max))
    if not np.all(ok):
        raise ConvergenceError("operator norm did not converge along a power trace")
    return out


def dyadic_trace_batch(gs, depth):
    out, ok = _impl.dyadic_trace_batch(np.ascontiguousarray(gs, dtype=np.complex128), int(depth))
    if not np.all(ok):
        raise ConvergenceError("operator norm did not converge along a dyadic trace")
    return out
