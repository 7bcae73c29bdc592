"""Small dense matrix routines used by the matrix groups."""

import numpy as np

from . import kernels


class NumericFailure(ArithmeticError):
    """An iteration diverged or stalled."""


def operator_norm(m):
    """Largest singular value of ``m`` (power iteration on m*m).

    Raises ``kernels.ConvergenceError`` if the iteration cap is hit.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return float(kernels.opnorm_batch(m[None])[0])


def distance_to_identity(m):
    m = np.asarray(m)
    return operator_norm(m - np.eye(m.shape[0]))


def random_skew_hermitian(rng, n, norm, real=False):
    """Random skew-Hermitian (skew-symmetric if ``real``) matrix of operator norm ``norm``."""
    if real:
        x = rng.standard_normal((n, n))
        a = x - x.T
    else:
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = x - x.conj().T
    if n == 1 and real:
        return np.zeros((1, 1))
    s = np.max(np.abs(np.linalg.eigvalsh(-1j * a)))
    if s == 0:
        return a
    return a * (norm / s)


def random_skew_hermitian_batch(rng, count, n, norm, real=False):
    """``count`` independent draws of ``random_skew_hermitian``, as one array."""
    if real:
        x = rng.standard_normal((count, n, n))
        a = x - np.swapaxes(x, 1, 2)
    else:
        x = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
        a = x - np.swapaxes(x, 1, 2).conj()
    s = np.max(np.abs(np.linalg.eigvalsh(-1j * a)), axis=1)
    s = np.where(s == 0, 1.0, s / norm)
    return a / s[:, None, None]


def expm_skew(a):
    """exp of a skew-Hermitian matrix via the Hermitian eigendecomposition."""
    a = np.asarray(a)
    w, v = np.linalg.eigh(-1j * a)
    out = (v * np.exp(1j * w)) @ v.conj().T
    if np.isrealobj(a):
        return out.real
    return out


def expm(a, order=18):
    """Scaling-and-squaring Taylor exponential for general square matrices."""
    a = np.asarray(a)
    nrm = np.linalg.norm(a, 1)
    s = max(0, int(np.ceil(np.log2(nrm))) + 1) if nrm > 0.5 else 0
    b = a / (2.0**s)
    term = np.eye(a.shape[0], dtype=np.result_type(a, float))
    out = term.copy()
    for k in range(1, order + 1):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def logm_normal(u):
    """Principal logarithm of a normal matrix (eigenvalues off the negative axis)."""
    u = np.asarray(u)
    w, v = np.linalg.eig(u)
    out = (v * np.log(w.astype(np.complex128))) @ np.linalg.inv(v)
    if np.isrealobj(u) and np.allclose(out.imag, 0, atol=1e-12):
        return out.real
    return out


def sqrtm_denman_beavers(a, tol=1e-14, max_iter=100):
    """Principal square root by the product form of the Denman-Beavers iteration.

    Falls back to the eigendecomposition route for normal matrices when the
    iteration stalls. Raises ``NumericFailure`` otherwise.
    """
    a = np.asarray(a)
    dtype = np.result_type(a, float)
    n = a.shape[0]
    eye = np.eye(n, dtype=dtype)
    x = a.astype(dtype)
    m = a.astype(dtype)
    for _ in range(max_iter):
        try:
            minv = np.linalg.inv(m)
        except np.linalg.LinAlgError:
            break
        x = 0.5 * x @ (eye + minv)
        m = 0.5 * (eye + 0.5 * (m + minv))
        if np.linalg.norm(m - eye, 1) <= tol:
            return x
    if np.allclose(a @ a.conj().T, a.conj().T @ a, atol=1e-10):
        return sqrtm_normal(a)
    raise NumericFailure("Denman-Beavers iteration did not converge")


def sqrtm_normal(a):
    w, v = np.linalg.eig(np.asarray(a))
    w = w.astype(np.complex128)
    if np.any((w.real <= 0) & (np.abs(w.imag) < 1e-14)):
        raise NumericFailure("eigenvalue on the closed negative axis: no principal root")
    out = (v * np.sqrt(w)) @ np.linalg.inv(v)
    if np.isrealobj(a) and np.allclose(out.imag, 0, atol=1e-12):
        return out.real
    return out


def polar_project(m):
    """Nearest unitary (orthogonal for real input) matrix."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh
