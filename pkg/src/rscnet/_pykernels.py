"""Pure numpy versions of the compiled kernels in ``_ckernels``."""
from __future__ import annotations

import numpy as np


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Chess-tournament ordering: every pair (p, q) appears exactly once per sweep,
    # and pairs within a round are disjoint so their rotations commute.
    idx = list(range(n + (n % 2)))
    size = len(idx)
    rounds = []
    for _ in range(size - 1):
        pairs = [(idx[i], idx[size - 1 - i]) for i in range(size // 2)]
        pairs = [(p, q) for p, q in pairs if p < n and q < n]
        if pairs:
            P = np.array([p for p, _ in pairs])
            Q = np.array([q for _, q in pairs])
            rounds.append((P, Q))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigh(a_in: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Cyclic Jacobi with parallel (round-robin) ordering. Unsorted output."""
    A = np.array(a_in, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    fro = float(np.sum(A * A))
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = float(np.sum((A - np.diag(np.diag(A))) ** 2))
        if off == 0.0 or off <= tol * tol * fro:
            break
        for P, Q in rounds:
            apq = A[P, Q]
            active = apq != 0.0
            if not np.any(active):
                continue
            safe = np.where(active, apq, 1.0)
            theta = (A[Q, Q] - A[P, P]) / (2.0 * safe)
            with np.errstate(over="ignore", divide="ignore"):
                t = np.where(theta < 0, -1.0, 1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            x = A[:, P].copy()
            y = A[:, Q].copy()
            A[:, P] = c * x - s * y
            A[:, Q] = s * x + c * y
            x = A[P, :].copy()
            y = A[Q, :].copy()
            A[P, :] = c[:, None] * x - s[:, None] * y
            A[Q, :] = s[:, None] * x + c[:, None] * y
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            x = V[:, P].copy()
            y = V[:, Q].copy()
            V[:, P] = c * x - s * y
            V[:, Q] = s * x + c * y
    return np.diag(A).copy(), V


def _objective(T: np.ndarray, x: np.ndarray, z: np.ndarray) -> float:
    return float(np.sum(np.abs(np.einsum("ijk,i,j->k", T, x, z))))


def _unit(u: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(u)
    return u / nrm if nrm > 0 else u


def ascent_221(T: np.ndarray, x0: np.ndarray, z0: np.ndarray, iters: int = 100):
    """Sign-alternating ascent for sup_{|x|=|z|=1} sum_k |x^T T[:,:,k] z|."""
    x = _unit(np.array(x0, dtype=np.float64))
    z = _unit(np.array(z0, dtype=np.float64))
    prev = _objective(T, x, z)
    for _ in range(iters):
        U = np.einsum("ijk,j->ik", T, z)
        s = np.where(x @ U < 0, -1.0, 1.0)
        x = _unit(U @ s)
        W = np.einsum("ijk,i->jk", T, x)
        s = np.where(z @ W < 0, -1.0, 1.0)
        z = _unit(W @ s)
        val = _objective(T, x, z)
        if val - prev <= 1e-15 * val:
            prev = max(val, prev)
            break
        prev = val
    return prev, x, z
