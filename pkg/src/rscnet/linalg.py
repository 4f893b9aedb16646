"""Dense linear algebra primitives: symmetric eigensolver, power iteration,
Hadamard and row-wise Kronecker products."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels

SYMMETRY_TOL = 1e-10
MAX_EIG_DIM = 1024
MAX_KR_COLS = 2**24


class SymmetryError(ValueError):
    pass


class SizeLimitError(ValueError):
    pass


def as_matrix(A) -> np.ndarray:
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {M.shape}")
    return M


def sym_eig(A, tol: float = SYMMETRY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching orthonormal
    eigenvectors as columns.
    """
    M = as_matrix(A)
    n, k = M.shape
    if n != k:
        raise SymmetryError(f"matrix must be square, got {M.shape}")
    if n > MAX_EIG_DIM:
        raise SizeLimitError(f"n={n} exceeds the eigensolver limit {MAX_EIG_DIM}")
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    asym = float(np.max(np.abs(M - M.T)))
    if asym > tol:
        raise SymmetryError(f"max |A_ij - A_ji| = {asym:.3e} exceeds {tol:.1e}")
    S = np.ascontiguousarray(0.5 * (M + M.T))
    w, V = _kernels.jacobi_eigh(S)
    order = np.argsort(-w, kind="stable")
    return w[order], np.ascontiguousarray(V[:, order])


def eigvalsh_min(A) -> float:
    return float(sym_eig(A)[0][-1])


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class SpectralEstimate:
    sigma: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.sigma


def power_iteration_spectral_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    iters: int = 400,
    tol: float = 1e-10,
    seed: int = 0,
) -> SpectralEstimate:
    """Estimate ||A||_2 of a symmetric operator, iterating with A^2.

    Each estimate is ||A u|| for a unit u, so it never exceeds ||A||_2.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    sigma_prev = -1.0
    best = 0.0
    for it in range(1, iters + 1):
        y = np.asarray(apply(x), dtype=np.float64)
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return SpectralEstimate(best, True, it)
        z = np.asarray(apply(y / ny), dtype=np.float64)
        nz = float(np.linalg.norm(z))
        sigma = max(ny, nz)
        best = max(best, sigma)
        if nz == 0.0:
            return SpectralEstimate(best, True, it)
        x = z / nz
        if abs(sigma - sigma_prev) < tol * sigma:
            return SpectralEstimate(best, True, it)
        sigma_prev = sigma
    return SpectralEstimate(best, False, iters)


def rect_spectral_norm_power(M: np.ndarray, iters: int = 40, seed: int = 0) -> float:
    """Power-iteration estimate of the largest singular value of a rectangular matrix."""
    M = as_matrix(M)
    if not np.any(M):
        return 0.0
    est = power_iteration_spectral_norm(lambda u: M.T @ (M @ u), M.shape[1], iters=iters, tol=0.0, seed=seed)
    return float(np.sqrt(est.sigma))


def spectral_norm(M: np.ndarray) -> float:
    """Exact largest singular value (LAPACK SVD)."""
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, ord=2))


def hadamard(A, B) -> np.ndarray:
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return A * B


def hadamard_power(A, r: int) -> np.ndarray:
    if r < 1:
        raise ValueError("r must be >= 1")
    A = as_matrix(A)
    out = A.copy()
    for _ in range(r - 1):
        out = out * A
    return out


def khatri_rao_row_power(U, r: int) -> np.ndarray:
    """Row i of the result is the r-fold Kronecker power of row i of U."""
    if r < 1:
        raise ValueError("r must be >= 1")
    U = as_matrix(U)
    n, m = U.shape
    if m**r > MAX_KR_COLS:
        raise SizeLimitError(f"m^r = {m**r} exceeds {MAX_KR_COLS}")
    out = U.copy()
    for _ in range(r - 1):
        out = np.einsum("ia,ib->iab", out, U).reshape(n, -1)
    return out
