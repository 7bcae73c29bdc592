"""Both kernel backends against scipy / numpy oracles."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, dijkstra

from minmetric import _pykernels, kernels
from minmetric.linalg import expm_skew, random_skew_hermitian

try:
    from minmetric import _ckernels
except ImportError:  # pragma: no cover - extension missing
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


def _graph(step, weight):
    n, s = step.shape
    rows, cols, vals = [], [], []
    for i in range(n):
        for j in range(s):
            if step[i, j] >= 0:
                rows.append(i)
                cols.append(step[i, j])
                vals.append(weight[j])
    m = {}
    for r, c, v in zip(rows, cols, vals):
        m[(r, c)] = min(v, m.get((r, c), np.inf))
    keys = list(m)
    return csr_matrix(([m[k] for k in keys], ([k[0] for k in keys], [k[1] for k in keys])), shape=(n, n))


def _random_steps(rng, n, s, holes=0.1):
    step = rng.integers(0, n, size=(n, s)).astype(np.int64)
    step[rng.random((n, s)) < holes] = -1
    return step


@pytest.mark.parametrize("impl", BACKENDS)
def test_dijkstra_matches_scipy(impl):
    rng = np.random.default_rng(1)
    for _ in range(5):
        step = _random_steps(rng, 60, 7)
        w = rng.random(7) + 0.05
        got = impl.dijkstra_steps(step, w, 0)
        want = dijkstra(_graph(step, w), indices=0)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS)
def test_bfs_matches_scipy(impl):
    rng = np.random.default_rng(2)
    step = _random_steps(rng, 80, 4, holes=0.3)
    got = impl.bfs_steps(step, np.arange(4, dtype=np.int64), 0)
    g = _graph(step, np.ones(4))
    want = dijkstra(g, indices=0, unweighted=True)
    np.testing.assert_array_equal(got, np.where(np.isfinite(want), want, -1).astype(got.dtype))
    order = breadth_first_order(g, 0, return_predecessors=False)
    assert set(np.flatnonzero(got >= 0).tolist()) == set(order.tolist())


@pytest.mark.parametrize("impl", BACKENDS)
def test_opnorm_matches_svd(impl):
    rng = np.random.default_rng(3)
    ms = rng.standard_normal((200, 3, 3)) + 1j * rng.standard_normal((200, 3, 3))
    norms, ok = impl.opnorm_batch(np.ascontiguousarray(ms), 1e-13, 64)
    assert ok.all()
    np.testing.assert_allclose(norms, np.linalg.norm(ms, 2, axis=(1, 2)), rtol=1e-10)


@pytest.mark.parametrize("impl", BACKENDS)
def test_power_traces_match_direct_powers(impl):
    rng = np.random.default_rng(4)
    us = np.stack([expm_skew(random_skew_hermitian(rng, 2, 0.4)) for _ in range(10)])
    trace, ok = impl.power_trace_batch(us, 12)
    assert ok.all()
    dy, ok2 = impl.dyadic_trace_batch(us, 6)
    assert ok2.all()
    eye = np.eye(2)
    for b, u in enumerate(us):
        for n in range(1, 13):
            want = np.linalg.norm(np.linalg.matrix_power(u, n) - eye, 2)
            assert abs(trace[b, n - 1] - want) < 1e-10
        for j in range(6):
            want = np.linalg.norm(np.linalg.matrix_power(u, 2**j) - eye, 2)
            assert abs(dy[b, j] - want) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 40), st.integers(1, 6), st.integers(0, 10**6))
def test_backends_agree(n, s, seed):
    if _ckernels is None:
        pytest.skip("extension not built")
    rng = np.random.default_rng(seed)
    step = _random_steps(rng, n, s)
    w = rng.random(s)
    np.testing.assert_array_equal(_pykernels.dijkstra_steps(step, w, 0), _ckernels.dijkstra_steps(step, w, 0))
    gens = np.arange(s, dtype=np.int64)
    np.testing.assert_array_equal(_pykernels.bfs_steps(step, gens, 0), _ckernels.bfs_steps(step, gens, 0))


def test_zero_weights_are_snapped():
    step = np.array([[1], [0]], dtype=np.int64)
    assert kernels.dijkstra_steps(step, np.array([1e-17]), 0)[1] == 0.0


def test_pure_python_switch():
    env = dict(os.environ, MINMETRIC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from minmetric import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_opnorm_convergence_error():
    # tol 0 with a single iteration cannot converge on a generic matrix
    m = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    with pytest.raises(kernels.ConvergenceError):
        kernels.opnorm_batch(m, tol=0.0, max_iter=1)
