import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from minmetric import linalg


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.floats(1e-3, 3.0), st.integers(0, 10**6))
def test_expm_skew_vs_scipy(n, norm, seed):
    a = linalg.random_skew_hermitian(np.random.default_rng(seed), n, norm)
    assert abs(np.linalg.norm(a, 2) - norm) < 1e-9 * max(1, norm)
    np.testing.assert_allclose(linalg.expm_skew(a), sla.expm(a), atol=1e-12)


def test_expm_general_vs_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.standard_normal((3, 3))
        np.testing.assert_allclose(linalg.expm(a), sla.expm(a), rtol=1e-10, atol=1e-12)


def test_logm_normal_vs_scipy():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = linalg.random_skew_hermitian(rng, 3, rng.uniform(0.01, 3.0))
        u = sla.expm(a)
        np.testing.assert_allclose(linalg.logm_normal(u), sla.logm(u), atol=1e-9)
        np.testing.assert_allclose(linalg.logm_normal(u), a, atol=1e-9)


def test_sqrtm_vs_scipy():
    rng = np.random.default_rng(2)
    for _ in range(20):
        u = sla.expm(linalg.random_skew_hermitian(rng, 2, rng.uniform(0.01, 3.0)))
        for fn in (linalg.sqrtm_denman_beavers, linalg.sqrtm_normal):
            np.testing.assert_allclose(fn(u), sla.sqrtm(u), atol=1e-10)
    spd = rng.standard_normal((3, 3))
    spd = spd @ spd.T + 3 * np.eye(3)
    np.testing.assert_allclose(linalg.sqrtm_denman_beavers(spd), sla.sqrtm(spd), atol=1e-10)


def test_operator_norm_and_polar():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert abs(linalg.operator_norm(m) - np.linalg.norm(m, 2)) < 1e-10
    u = linalg.polar_project(m)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    w, _ = sla.polar(m)
    np.testing.assert_allclose(u, w, atol=1e-10)


def test_random_skew_real():
    a = linalg.random_skew_hermitian(np.random.default_rng(4), 3, 0.5, real=True)
    assert np.isrealobj(a)
    np.testing.assert_allclose(a, -a.T)
    assert abs(np.linalg.norm(a, 2) - 0.5) < 1e-12


def test_sqrt_failure_raises():
    with pytest.raises(linalg.NumericFailure):
        linalg.sqrtm_denman_beavers(-np.eye(2), max_iter=5)
