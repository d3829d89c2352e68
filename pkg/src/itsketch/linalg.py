"""Dense linear-algebra kernels shared by the whole package.

Thin, contract-enforcing wrappers around LAPACK (via numpy/scipy) plus a
few small routines (randomized power norm estimate, Lambert W) written
directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular


class SingularMatrixError(ValueError):
    """A triangular factor has an exactly-zero diagonal entry."""


@dataclass(frozen=True)
class QrFactors:
    """Economy QR factors: q has orthonormal columns, r is upper triangular
    with nonnegative diagonal."""

    q: np.ndarray
    r: np.ndarray


def householder_qr_econ(a: np.ndarray) -> QrFactors:
    """Economy QR of an m x n matrix (m >= n) with nonnegative R diagonal.

    The sign convention makes the factorization unique, so repeated calls
    on identical input are bitwise reproducible.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    m, n = a.shape
    if m < n:
        raise ValueError(f"need m >= n, got {m} x {n}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    r = np.triu(signs[:, None] * r)
    return QrFactors(q=q, r=r)


def _check_square_upper(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    if np.any(np.diag(r) == 0.0):
        raise SingularMatrixError("zero diagonal entry in triangular factor")
    return r


def tri_solve_upper(r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve r @ y = c by back substitution (r upper triangular)."""
    r = _check_square_upper(r)
    return solve_triangular(r, np.asarray(c, dtype=float), lower=False)


def tri_solve_upper_transpose(r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve r.T @ y = c by forward substitution (r upper triangular)."""
    r = _check_square_upper(r)
    return solve_triangular(r, np.asarray(c, dtype=float), lower=False, trans="T")


def svd_values(a: np.ndarray) -> np.ndarray:
    """Singular values of a, sorted descending."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    return np.linalg.svd(a, compute_uv=False)


def rand_power_norm_est(
    r: np.ndarray, steps: int | None = None, rng_seed: int = 0
) -> float:
    """Estimate the spectral norm of a square matrix by the randomized
    power method applied to r.T @ r.

    Starts from a normalized Gaussian vector; the returned value never
    exceeds the true largest singular value. Default step count is
    ceil(log2 n), at least 1.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    if steps is None:
        steps = max(1, math.ceil(math.log2(n))) if n > 1 else 1
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(rng_seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(steps):
        w = r.T @ (r @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # started in the null space; estimate is a valid lower bound
            return 0.0
        v = w / nw
    return float(np.linalg.norm(r @ v))


def cond_est(r: np.ndarray) -> float:
    """Condition number of an upper-triangular matrix, computed exactly
    from its singular values (n is small throughout this package)."""
    r = _check_square_upper(r)
    sv = svd_values(r)
    return float(sv[0] / sv[-1])


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for x >= 0.

    Newton iteration from the initial guess log(1 + x); converges to
    1e-14 absolute well within the 100-iteration cap for all x >= 0.
    """
    if x < 0:
        raise ValueError(f"lambert_w0 requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    w = math.log1p(x)
    for _ in range(100):
        ew = math.exp(w)
        step = (w * ew - x) / (ew * (1.0 + w))
        w -= step
        if abs(step) <= 1e-14:
            break
    return w
