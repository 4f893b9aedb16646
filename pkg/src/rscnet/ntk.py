"""NTK Gram matrix by two routes (per-sample gradients and the layerwise
Hadamard decomposition), its minimum eigenvalue, and layer Gram checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hermite import NTKBoundConstants, expected_gram_min_eig
from .linalg import sym_eig
from .network import InputNormWarning, NetworkConfig, Params, forward, init, jacobian

MAX_N = 512


@dataclass
class NTKReport:
    K: np.ndarray
    K_decomposed: np.ndarray
    lambda_min_empirical: float
    decomposition_terms: list[np.ndarray]
    B_layers: list[np.ndarray]
    A_layers: list[np.ndarray]
    decomposition_gap: float
    lower_bound: float | None = None
    notes: list[str] = field(default_factory=list)


def b_matrices(params: Params, config: NetworkConfig, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Rows of B_l = D_l (W^(l+1))^T D_{l+1} ... (W^(L))^T D_L v / m^{(L-l+1)/2}, one row per sample.

    Evaluated as an explicit product per sample, independent of the backward pass.
    Returns (A_layers, B_layers) with A_layers[l] = alpha^(l) rows for l = 0..L.
    """
    trace = forward(params, config, X, warn=False)
    A = trace.alphas
    D = trace.act_derivs
    L, m = config.depth, config.width
    n = X.shape[0]
    B = [np.empty((n, m)) for _ in range(L)]
    for i in range(n):
        for l in range(1, L + 1):
            vec = params.v / math.sqrt(m)
            for lp in range(L, l, -1):
                vec = params.weights[lp - 1].T @ (D[lp - 1][i] * vec) / math.sqrt(m)
            B[l - 1][i] = D[l - 1][i] * vec
    return A, B


def decomposed_gram(params: Params, config: NetworkConfig, X: np.ndarray):
    A, B = b_matrices(params, config, X)
    terms = []
    for l in range(1, config.depth + 1):
        Aprev = A[l - 1]
        terms.append((Aprev @ Aprev.T) / config.fan_in(l) * (B[l - 1] @ B[l - 1].T))
    terms.append((A[-1] @ A[-1].T) / config.width)
    return sum(terms), terms, A, B


def ntk_gram(params: Params, config: NetworkConfig, X: np.ndarray) -> NTKReport:
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds {MAX_N}")
    notes = []
    if not np.all(np.abs(np.sum(X * X, axis=1) - d) <= 1e-6 * d):
        warnings.warn("rows of X are not normalized to ||x||^2 = d", InputNormWarning, stacklevel=2)
        notes.append("unnormalized rows")
    J = jacobian(params, config, forward(params, config, X, warn=False))
    K = J @ J.T
    K = 0.5 * (K + K.T)
    Kd, terms, A, B = decomposed_gram(params, config, X)
    nk = float(np.linalg.norm(K))
    gap = float(np.linalg.norm(K - Kd)) / nk if nk > 0 else float(np.linalg.norm(Kd))
    lam = float(sym_eig(K)[0][-1])
    return NTKReport(K, Kd, lam, terms, B, A, gap, None, notes)


@dataclass(frozen=True)
class BoundCheck:
    empirical: float
    bound: float
    bound_paper: float
    tolerance: float
    satisfied: bool


def ntk_min_eig_bound(report: NTKReport, constants: NTKBoundConstants) -> BoundCheck:
    """Compare lambda_min(K) with c0 * lambda_1 (orthonormal convention drives the check)."""
    if constants.lambda1 is None:
        raise ValueError("constants.lambda1 must be set (use hermite.lambda1_estimate)")
    bound = constants.c0_orthonormal * constants.lambda1
    paper = constants.c0 * constants.lambda1
    tol = constants.c0_orthonormal * (constants.lambda1_stderr or 0.0) + 1e-8
    report.lower_bound = bound
    return BoundCheck(report.lambda_min_empirical, bound, paper, tol, report.lambda_min_empirical >= bound - tol)


@dataclass
class LayerGramResult:
    layer: int
    lambda_min: list[float]
    lambda_hat: list[float]
    passed: list[bool]

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.passed)) if self.passed else float("nan")


def layer_gram_concentration(config: NetworkConfig, X: np.ndarray, n_seeds: int = 100, samples: int = 4096,
                             seed0: int = 0) -> list[LayerGramResult]:
    """Fraction of seeds with lambda_min(A^(l) A^(l)T) >= (m/4) lambda_hat_l for l = 1..L.

    lambda_hat_l is the Monte Carlo lambda_min of E[phi(A^(l-1) g / sqrt(m_{l-1})) phi(...)^T]
    with g ~ N(0, s_l^2 I), s_l the init std of layer l. Layer 0 reports lambda_min(X X^T).
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    L, m = config.depth, config.width
    results = [LayerGramResult(l, [], [], []) for l in range(L + 1)]
    lam_x = float(sym_eig(0.5 * (X @ X.T + (X @ X.T).T))[0][-1])
    for k in range(n_seeds):
        seed = seed0 + k
        params = init(config, seed)
        trace = forward(params, config, X, warn=False)
        results[0].lambda_min.append(lam_x)
        results[0].lambda_hat.append(lam_x)
        results[0].passed.append(True)
        for l in range(1, L + 1):
            Al = trace.alphas[l]
            G = Al @ Al.T
            lam = 0.0 if m < n else float(sym_eig(0.5 * (G + G.T))[0][-1])
            est = expected_gram_min_eig(trace.alphas[l - 1], config.layer_std(l), config.activation, samples,
                                        seed=10_000 * seed + l)
            results[l].lambda_min.append(lam)
            results[l].lambda_hat.append(est.value)
            results[l].passed.append(lam >= 0.25 * m * est.value)
    return results


def layer_norm_ratios(config: NetworkConfig, X: np.ndarray, seed: int, c: float) -> np.ndarray:
    """||alpha^(l)(x_i)||^2 / (c m) for every layer (rows) and input (columns)."""
    params = init(config, seed)
    trace = forward(params, config, np.atleast_2d(X), warn=False)
    return np.array([np.sum(a * a, axis=1) / (c * config.width) for a in trace.alphas[1:]])
