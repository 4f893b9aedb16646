"""Hermite polynomials, Gauss-Hermite quadrature, Hermite coefficients of
activations, and the constants of the NTK minimum-eigenvalue lower bound.

Conventions for the generalized family with variance ``a``:

* ``orthonormal`` (default): H_r(x / sqrt(a)); orthonormal under N(0, a).
* ``paper`` / ``scaled``: a^(r/2) H_r(x / sqrt(a)).
* ``rodrigues``: a^(-r/2) H_r(x / sqrt(a)), i.e. (-1)^r/sqrt(r!) e^{x^2/2a} d^r/dx^r e^{-x^2/2a}.

H_r is the normalized probabilist polynomial He_r / sqrt(r!).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .activation import Activation, resolve
from .linalg import sym_eig

CONVENTIONS = ("orthonormal", "paper", "scaled", "rodrigues")
FAMILIES = ("probabilist", "physicist", "generalized")


class OrderLimitError(RuntimeError):
    pass


class DegenerateOrderWarning(UserWarning):
    pass


@lru_cache(maxsize=16)
def gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(z)], z ~ N(0, 1) (weights sum to 1), by Golub-Welsch."""
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    off = np.sqrt(np.arange(1, nodes, dtype=np.float64))
    J = np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = sym_eig(J)
    order = np.argsort(vals)
    x = vals[order]
    w = vecs[0, order] ** 2
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry of the rule
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def probabilist_table(R: int, x) -> np.ndarray:
    """Rows H_0(x), ..., H_R(x) from sqrt(r+1) H_{r+1} = x H_r - sqrt(r) H_{r-1}."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((R + 1,) + x.shape)
    out[0] = 1.0
    if R >= 1:
        out[1] = x
    for r in range(1, R):
        out[r + 1] = (x * out[r] - math.sqrt(r) * out[r - 1]) / math.sqrt(r + 1)
    return out


def physicist_table(R: int, x) -> np.ndarray:
    """Rows of (-1)^r/sqrt(r!) e^{x^2} d^r/dx^r e^{-x^2}, via their own three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((R + 1,) + x.shape)
    out[0] = 1.0
    if R >= 1:
        out[1] = 2.0 * x
    for r in range(1, R):
        out[r + 1] = (2.0 * x * out[r] - 2.0 * math.sqrt(r) * out[r - 1]) / math.sqrt(r + 1)
    return out


def convention_factor(convention: str, a: float, r: int) -> float:
    if convention == "orthonormal":
        return 1.0
    if convention in ("paper", "scaled"):
        return a ** (r / 2.0)
    if convention == "rodrigues":
        return a ** (-r / 2.0)
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class HermiteBasis:
    family: str = "probabilist"
    a: float = 1.0
    convention: str = "orthonormal"

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if not self.a > 0:
            raise ValueError("variance a must be positive")
        if self.family == "probabilist" and self.a != 1.0:
            raise ValueError("the probabilist family has a = 1; use family='generalized'")

    def table(self, R: int, x) -> np.ndarray:
        if self.family == "physicist":
            return physicist_table(R, x)
        x = np.asarray(x, dtype=np.float64)
        T = probabilist_table(R, x / math.sqrt(self.a))
        scale = np.array([convention_factor(self.convention, self.a, r) for r in range(R + 1)])
        return T * scale.reshape((-1,) + (1,) * x.ndim)


def hermite_eval(basis: HermiteBasis, r: int, x):
    if r < 0:
        raise ValueError("order r must be >= 0")
    val = basis.table(r, x)[r]
    return float(val) if np.ndim(x) == 0 else val


def _as_function(activation) -> tuple[Callable[[np.ndarray], np.ndarray], str]:
    if isinstance(activation, (str, Activation)):
        act = resolve(activation)
        return act.fn, act.kind
    if callable(activation):
        return activation, getattr(activation, "__name__", "callable")
    raise TypeError("activation must be a name, an Activation or a callable")


def gaussian_expectation(fn: Callable[[np.ndarray], np.ndarray], a: float, nodes: int = 200) -> float:
    """E[fn(z)] for z ~ N(0, a)."""
    x, w = gauss_hermite(nodes)
    return float(w @ fn(math.sqrt(a) * x))


@dataclass
class HermiteCoeffs:
    """Orthonormal-convention coefficients mu_0..mu_R of phi under N(0, a)."""

    activation: str
    a: float
    coeffs: np.ndarray
    R: int
    nodes: int
    energy: float

    def in_convention(self, convention: str) -> np.ndarray:
        """Coefficients <phi, H_r^{[a]}> with the basis of the given convention."""
        return np.array([c * convention_factor(convention, self.a, r) for r, c in enumerate(self.coeffs)])

    @property
    def cumulative_energy(self) -> np.ndarray:
        return np.cumsum(self.coeffs**2)


def _coeffs_at(fn: Callable[[np.ndarray], np.ndarray], a: float, R: int, nodes: int) -> np.ndarray:
    x, w = gauss_hermite(nodes)
    vals = fn(math.sqrt(a) * x)
    return probabilist_table(R, x) @ (w * vals)


def hermite_coeffs(activation, a: float = 1.0, R: int = 12, nodes: int = 200) -> HermiteCoeffs:
    """mu_r = E[phi(z) H_r(z / sqrt(a))], z ~ N(0, a), by Gauss-Hermite quadrature.

    The rule is accepted when a rule with 50% more nodes reproduces every
    coefficient to 1e-10 relative; otherwise OrderLimitError is raised.
    """
    if not a > 0:
        raise ValueError("variance a must be positive")
    if nodes < 2 * R + 2:
        raise ValueError(f"need nodes >= 2R+2 = {2 * R + 2}")
    fn, name = _as_function(activation)
    mu = _coeffs_at(fn, a, R, nodes)
    check = _coeffs_at(fn, a, R, nodes + nodes // 2)
    scale = max(1.0, float(np.linalg.norm(mu)))
    if float(np.max(np.abs(mu - check))) > 1e-10 * scale:
        raise OrderLimitError(f"quadrature with {nodes} nodes has not converged up to order {R}")
    energy = gaussian_expectation(lambda z: fn(z) ** 2, a, nodes)
    if float(np.sum(mu**2)) > energy + 1e-8:
        raise OrderLimitError("Bessel inequality violated; quadrature unreliable")
    mu[np.abs(mu) < 1e-15 * scale] = 0.0
    return HermiteCoeffs(name, a, mu, R, nodes, energy)


def c_phi_sigma0(activation, sigma0: float, nodes: int = 200) -> float:
    """E[phi(z)^2] for z ~ N(0, sigma0^2)."""
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    fn, _ = _as_function(activation)
    return gaussian_expectation(lambda z: fn(z) ** 2, sigma0 * sigma0, nodes)


def hermite_product_expectation(r: int, r2: int, c_x: float, c_y: float, sigma: float, u_x, u_y,
                                samples: int = 10**6, seed: int = 0, convention: str = "orthonormal",
                                chunk: int = 200_000) -> tuple[float, float]:
    """Monte Carlo E[H_r^{[c_x^2 s^2]}(c_x <g,u_x>) H_r2^{[c_y^2 s^2]}(c_y <g,u_y>)], g ~ N(0, s^2 I).

    Returns (estimate, standard error). Chunks use seeds derived from (seed, chunk index)
    and are summed in chunk order.
    """
    u_x = np.asarray(u_x, dtype=np.float64)
    u_y = np.asarray(u_y, dtype=np.float64)
    if abs(np.linalg.norm(u_x) - 1.0) > 1e-10 or abs(np.linalg.norm(u_y) - 1.0) > 1e-10:
        raise ValueError("u_x and u_y must be unit vectors")
    if u_x.shape != u_y.shape:
        raise ValueError("u_x and u_y must have the same dimension")
    if samples < 10**4:
        raise ValueError("samples must be >= 1e4")
    bx = HermiteBasis("generalized", c_x**2 * sigma**2, convention)
    by = HermiteBasis("generalized", c_y**2 * sigma**2, convention)
    total = 0.0
    total_sq = 0.0
    done = 0
    k = 0
    while done < samples:
        size = min(chunk, samples - done)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), k]))
        g = sigma * rng.standard_normal((size, u_x.size))
        vals = bx.table(r, c_x * (g @ u_x))[r] * by.table(r2, c_y * (g @ u_y))[r2]
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += size
        k += 1
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def product_expectation_exact(r: int, r2: int, c_x: float, c_y: float, sigma: float, u_x, u_y,
                              convention: str = "orthonormal") -> float:
    """Exact value of the product expectation under a convention (Mehler's formula)."""
    if r != r2:
        return 0.0
    rho = float(np.dot(u_x, u_y))
    scale = convention_factor(convention, c_x**2 * sigma**2, r) * convention_factor(convention, c_y**2 * sigma**2, r)
    return scale * rho**r


def product_expectation_claimed(r: int, r2: int, c_x: float, c_y: float, sigma: float, u_x, u_y) -> float:
    """Closed form carrying extra sigma^{6r} c^{3r} factors: sigma^{6r} c_x^{3r} c_y^{3r} <u_x,u_y>^r delta_{rr'}."""
    if r != r2:
        return 0.0
    return sigma ** (6 * r) * c_x ** (3 * r) * c_y ** (3 * r) * float(np.dot(u_x, u_y)) ** r


@dataclass
class Lambda1Estimate:
    value: float
    stderr: float
    batch_values: np.ndarray
    gram: np.ndarray = field(repr=False)

    def __float__(self) -> float:
        return self.value


def expected_gram_min_eig(A: np.ndarray, sigma: float, activation, samples: int = 4096, seed: int = 0,
                          batches: int = 10) -> Lambda1Estimate:
    """lambda_min of (1/S) sum_s phi(A g_s / sqrt(k)) phi(A g_s / sqrt(k))^T, g_s ~ N(0, sigma^2 I_k)."""
    A = np.asarray(A, dtype=np.float64)
    n, k = A.shape
    if n > 512:
        raise ValueError(f"n={n} exceeds 512")
    fn, _ = _as_function(activation)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7919]))
    G = sigma * rng.standard_normal((k, samples))
    F = fn(A @ G / math.sqrt(k))
    gram = (F @ F.T) / samples
    gram = 0.5 * (gram + gram.T)
    value = float(sym_eig(gram)[0][-1])
    edges = np.linspace(0, samples, batches + 1).astype(int)
    bvals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        Fb = F[:, lo:hi]
        gb = (Fb @ Fb.T) / (hi - lo)
        bvals.append(float(sym_eig(0.5 * (gb + gb.T))[0][-1]))
    bvals = np.array(bvals)
    se = float(np.std(bvals, ddof=1) / math.sqrt(batches)) if batches > 1 else 0.0
    return Lambda1Estimate(value, se, bvals, gram)


def lambda1_estimate(X: np.ndarray, sigma: float, activation, samples: int = 4096, seed: int = 0) -> Lambda1Estimate:
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n > 512:
        raise ValueError(f"n={n} exceeds 512")
    if not np.all(np.abs(np.sum(X * X, axis=1) - d) <= 1e-6 * d):
        raise ValueError("rows of X must satisfy ||x_i||^2 = d")
    return expected_gram_min_eig(X, sigma, activation, samples, seed)


def lambda0(X: np.ndarray) -> float:
    """lambda_min of the Gram matrix of the unit-normalized rows of X."""
    X = np.asarray(X, dtype=np.float64)
    U = X / np.linalg.norm(X, axis=1, keepdims=True)
    G = U @ U.T
    return float(sym_eig(0.5 * (G + G.T))[0][-1])


def lambda1_hermite_bound(X: np.ndarray, sigma: float, activation, R: int = 12) -> dict:
    """Lower bounds on lambda_1 from a single Hermite order: max_r mu_r^2 lambda_0.

    ``orthonormal`` uses the orthonormal coefficients at variance sigma^2; ``paper``
    additionally multiplies by sigma^{6r} c_{phi,sigma}^{3r}.
    """
    lam0 = lambda0(X)
    mu = hermite_coeffs(activation, sigma * sigma, R).coeffs
    c = c_phi_sigma0(activation, sigma)
    orth = max(float(mu[r] ** 2) for r in range(1, R + 1)) * lam0
    paper = max(float(mu[r] ** 2) * sigma ** (6 * r) * c ** (3 * r) for r in range(1, R + 1)) * lam0
    return {"lambda0": lam0, "orthonormal": orth, "paper": paper}


def h_C_seq(sigma0: float, L: int) -> np.ndarray:
    """h_C(0..L) with h_C(0) = 0 and h_C(l+1) = 1 + sigma0^2 h_C(l)."""
    out = np.zeros(L + 1)
    for l in range(L):
        out[l + 1] = 1.0 + sigma0 * sigma0 * out[l]
    return out


def layer_norm_tolerance(sigma0: float, l: int, L: int) -> float:
    """Allowed |‖alpha^(l)‖^2 / (c m) - 1| at layer l of an L-layer net: h_C(l) / (2 h_C(L))."""
    h = h_C_seq(sigma0, L)
    return float(h[l] / (2.0 * h[L]))


@dataclass
class NTKBoundConstants:
    c_phi_sigma0: float
    nu0_sq: float
    sigma0: float
    c_grid: np.ndarray
    mu_r0_sq: np.ndarray
    c0_lr: np.ndarray
    c0_lr_orthonormal: np.ndarray
    c0: float
    c0_orthonormal: float
    best_r: int | None
    best_r_orthonormal: int | None
    degenerate_orders: list[int]
    lambda1: float | None = None
    lambda1_stderr: float | None = None
    lambda0: float | None = None

    @property
    def lower_bound(self) -> float | None:
        return None if self.lambda1 is None else self.c0_orthonormal * self.lambda1

    @property
    def lower_bound_paper(self) -> float | None:
        return None if self.lambda1 is None else self.c0 * self.lambda1


def ntk_lower_bound_constants(activation, sigma0: float, L: int, R: int = 12, grid_points: int = 32,
                              c_bounds: tuple[float, float] | None = None, nodes: int = 200) -> NTKBoundConstants:
    """Constants of the lambda-recursion at weight variance nu0^2 = sigma0^2 / c_{phi,sigma0}.

    mu_r0_sq[r] is min over c in [sqrt(c/2), sqrt(3c/2)] of the squared r-th coefficient at
    variance c^2 nu0^2. c0_lr[l, r] = (mu_r0_sq[r] / (6c))^l (sigma0^2/2)^(3rl) and
    c0_lr_orthonormal drops the (sigma0^2/2)^(3rl) factor.
    """
    act = resolve(activation) if isinstance(activation, str) else activation
    c = c_phi_sigma0(act, sigma0, nodes)
    nu0_sq = sigma0 * sigma0 / c
    lo, hi = c_bounds if c_bounds is not None else (math.sqrt(c / 2.0), math.sqrt(1.5 * c))
    grid = np.linspace(lo, hi, grid_points)
    table = np.array([hermite_coeffs(act, ci * ci * nu0_sq, R, nodes).coeffs for ci in grid])
    mu_sq = np.min(table**2, axis=0)
    levels = np.arange(L)[:, None]
    orders = np.arange(R + 1)[None, :]
    base = mu_sq[None, :] / (6.0 * c)
    c0_orth = base**levels
    c0_lr = c0_orth * (sigma0 * sigma0 / 2.0) ** (3 * orders * levels)
    degenerate = [r for r in range(2, R + 1) if mu_sq[r] <= 1e-24]
    usable = [r for r in range(2, R + 1) if r not in degenerate]
    if not usable:
        warnings.warn("every order r >= 2 has vanishing coefficients; bound is 0", DegenerateOrderWarning,
                      stacklevel=2)
        return NTKBoundConstants(c, nu0_sq, sigma0, grid, mu_sq, c0_lr, c0_orth, 0.0, 0.0, None, None, degenerate)
    row = L - 1
    best = max(usable, key=lambda r: c0_lr[row, r])
    best_o = max(usable, key=lambda r: c0_orth[row, r])
    return NTKBoundConstants(c, nu0_sq, sigma0, grid, mu_sq, c0_lr, c0_orth, float(c0_lr[row, best]),
                             float(c0_orth[row, best_o]), best, best_o, degenerate)


def coefficient_table(activation, a: float, R: int, nodes: int = 200) -> list[tuple[int, float, float]]:
    hc = hermite_coeffs(activation, a, R, nodes)
    cum = hc.cumulative_energy
    return [(r, float(hc.coeffs[r]), float(cum[r])) for r in range(R + 1)]


def orthonormality_matrix(a: float, R: int, nodes: int = 200, convention: str = "orthonormal") -> np.ndarray:
    """Gram matrix of H_0..H_R under N(0, a) by quadrature."""
    x, w = gauss_hermite(nodes)
    T = HermiteBasis("generalized", a, convention).table(R, math.sqrt(a) * x)
    return (T * w) @ T.T

