"""Deep fully connected network with 1/sqrt(width) scaling and a scalar output.

    alpha^(0) = x
    alpha^(l) = phi(W^(l) alpha^(l-1) / sqrt(m_{l-1})),   m_0 = d
    f(theta; x) = v . alpha^(L) / sqrt(m)

Parameters flatten as vec(W^(1)), ..., vec(W^(L)), v with column-major vec.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .activation import Activation, resolve

MAGIC = b"RSCN"
FORMAT_VERSION = 1
MAX_DENSE_HESSIAN = 2000


class InputNormWarning(UserWarning):
    pass


def sigma0_sharp(sigma1: float, m: int) -> float:
    return sigma1 / (2.0 * (1.0 + math.sqrt(math.log(m) / (2.0 * m))))


def sigma0_conservative(sigma1: float, m: int) -> float:
    return sigma1 / (2.0 * (1.0 + 2.0 * math.sqrt(math.log(m)) / math.sqrt(m)))


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and initialization settings.

    ``init_scheme="standard"`` draws every weight from N(0, sigma0^2).
    ``init_scheme="ntk"`` keeps layer 1 at N(0, sigma0^2) and draws layers
    l >= 2 from N(0, nu0^2) with nu0^2 = sigma0^2 / c_{phi,sigma0}, so every
    pre-activation has variance close to sigma0^2.
    """

    depth: int
    input_dim: int
    width: int
    activation: Activation | str = "tanh"
    sigma1: float = 1.0
    seed: int = 0
    sigma0_rule: str = "sharp"
    init_scheme: str = "standard"

    def __post_init__(self) -> None:
        object.__setattr__(self, "activation", resolve(self.activation))
        if self.depth < 1 or self.width < 1 or self.input_dim < 1:
            raise ValueError("depth, width and input_dim must be >= 1")
        if not self.sigma1 > 0:
            raise ValueError("sigma1 must be positive")
        if self.sigma0_rule not in ("sharp", "conservative"):
            raise ValueError(f"unknown sigma0_rule {self.sigma0_rule!r}")
        if self.init_scheme not in ("standard", "ntk"):
            raise ValueError(f"unknown init_scheme {self.init_scheme!r}")

    @property
    def sigma0(self) -> float:
        if self.sigma0_rule == "sharp":
            return sigma0_sharp(self.sigma1, self.width)
        return sigma0_conservative(self.sigma1, self.width)

    @property
    def nu0(self) -> float:
        from .hermite import c_phi_sigma0

        s0 = self.sigma0
        return s0 / math.sqrt(c_phi_sigma0(self.activation, s0))

    def layer_std(self, layer: int) -> float:
        if self.init_scheme == "ntk" and layer >= 2:
            return self.nu0
        return self.sigma0

    def fan_in(self, layer: int) -> int:
        return self.input_dim if layer == 1 else self.width

    def layer_shape(self, layer: int) -> tuple[int, int]:
        return (self.width, self.fan_in(layer))

    @property
    def n_params(self) -> int:
        m, d, L = self.width, self.input_dim, self.depth
        return m * d + (L - 1) * m * m + m

    def with_(self, **changes) -> "NetworkConfig":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return NetworkConfig(**data)


@dataclass(frozen=True)
class Params:
    weights: tuple[np.ndarray, ...]
    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(np.asarray(W, dtype=np.float64) for W in self.weights))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64))
        for W in self.weights:
            if not np.all(np.isfinite(W)):
                raise ValueError("non-finite weight entry")
        if not np.all(np.isfinite(self.v)):
            raise ValueError("non-finite entry in v")

    @property
    def depth(self) -> int:
        return len(self.weights)

    def flat(self) -> np.ndarray:
        parts = [W.ravel(order="F") for W in self.weights]
        parts.append(self.v)
        return np.concatenate(parts)

    @staticmethod
    def from_flat(config: NetworkConfig, theta: np.ndarray) -> "Params":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (config.n_params,):
            raise ValueError(f"expected {config.n_params} parameters, got {theta.shape}")
        weights = []
        off = 0
        for l in range(1, config.depth + 1):
            rows, cols = config.layer_shape(l)
            weights.append(theta[off : off + rows * cols].reshape((rows, cols), order="F"))
            off += rows * cols
        return Params(tuple(weights), theta[off:].copy())

    def check(self, config: NetworkConfig) -> None:
        if self.depth != config.depth:
            raise ValueError(f"params have depth {self.depth}, config {config.depth}")
        for l, W in enumerate(self.weights, start=1):
            if W.shape != config.layer_shape(l):
                raise ValueError(f"layer {l} has shape {W.shape}, expected {config.layer_shape(l)}")
        if self.v.shape != (config.width,):
            raise ValueError(f"v has shape {self.v.shape}, expected ({config.width},)")


def _layer_rng(seed: int, layer: int) -> np.random.Generator:
    # One counter-based stream per (seed, layer): results do not depend on
    # which layers are drawn or in what order.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(layer)])))


def init_layer(config: NetworkConfig, layer: int, seed: int | None = None) -> np.ndarray:
    s = config.seed if seed is None else seed
    rng = _layer_rng(s, layer)
    return config.layer_std(layer) * rng.standard_normal(config.layer_shape(layer))


def init(config: NetworkConfig, seed: int | None = None) -> Params:
    """Gaussian initialization; v is a Gaussian draw normalized to unit length."""
    s = config.seed if seed is None else seed
    weights = tuple(init_layer(config, l, s) for l in range(1, config.depth + 1))
    v = _layer_rng(s, config.depth + 1).standard_normal(config.width)
    v /= np.linalg.norm(v)
    return Params(weights, v)


def zeros(config: NetworkConfig) -> Params:
    return Params(tuple(np.zeros(config.layer_shape(l)) for l in range(1, config.depth + 1)), np.zeros(config.width))


@dataclass
class ForwardTrace:
    """Layer outputs for a single input (1-d arrays) or a batch (rows)."""

    alphas: list[np.ndarray]
    preacts: list[np.ndarray]
    act_derivs: list[np.ndarray]
    output: float | np.ndarray
    normalized: bool = True
    batched: bool = False

    def rows(self, name: str) -> list[np.ndarray]:
        seq = getattr(self, name)
        return seq if self.batched else [a[None, :] for a in seq]


def _norm_ok(X: np.ndarray, d: int) -> bool:
    return bool(np.all(np.abs(np.sum(X * X, axis=1) - d) <= 1e-6 * max(d, 1)))


def forward(params: Params, config: NetworkConfig, x: np.ndarray, warn: bool = True) -> ForwardTrace:
    """Forward pass for one input (1-d) or a batch of inputs (n x d)."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    X = x if batched else x[None, :]
    if X.shape[1] != config.input_dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match d={config.input_dim}")
    normalized = _norm_ok(X, config.input_dim)
    if warn and not normalized:
        warnings.warn("inputs are not normalized to ||x||^2 = d", InputNormWarning, stacklevel=2)
    act = config.activation
    alphas = [X]
    preacts, derivs = [], []
    a = X
    for l, W in enumerate(params.weights, start=1):
        z = (a @ W.T) / math.sqrt(config.fan_in(l))
        preacts.append(z)
        derivs.append(act.d1(z))
        a = act.fn(z)
        alphas.append(a)
    out = (a @ params.v) / math.sqrt(config.width)
    if not batched:
        return ForwardTrace([r[0] for r in alphas], [r[0] for r in preacts], [r[0] for r in derivs],
                            float(out[0]), normalized, False)
    return ForwardTrace(alphas, preacts, derivs, out, normalized, True)


def predict(params: Params, config: NetworkConfig, X: np.ndarray) -> np.ndarray:
    return forward(params, config, np.atleast_2d(X), warn=False).output


@dataclass
class GradientBundle:
    per_layer_grads: list[np.ndarray]
    v_grad: np.ndarray
    flat: np.ndarray
    input_grad: np.ndarray
    sensitivities: list[np.ndarray]


def sensitivities(params: Params, config: NetworkConfig, trace: ForwardTrace) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Batched backward recursion.

    Returns (B, Delta, input_grads) with B[l-1] the rows b^(l) = df/dalpha^(l),
    Delta[l-1] = D^(l) * b^(l) = df/dpreact^(l), and input_grads = df/dx rows.
    """
    derivs = trace.rows("act_derivs")
    n = derivs[0].shape[0]
    L, m = config.depth, config.width
    B = [None] * L
    Delta = [None] * L
    b = np.broadcast_to(params.v / math.sqrt(m), (n, m))
    for l in range(L, 0, -1):
        B[l - 1] = np.array(b)
        delta = derivs[l - 1] * b
        Delta[l - 1] = delta
        b = (delta @ params.weights[l - 1]) / math.sqrt(config.fan_in(l))
    return B, Delta, b


def weighted_gradient(params: Params, config: NetworkConfig, trace: ForwardTrace, weights: np.ndarray,
                      Delta: list[np.ndarray] | None = None) -> np.ndarray:
    """Flat sum_i weights_i * grad_theta f(theta; x_i) without per-sample storage."""
    alphas = trace.rows("alphas")
    if Delta is None:
        _, Delta, _ = sensitivities(params, config, trace)
    w = np.asarray(weights, dtype=np.float64)
    parts = []
    for l in range(1, config.depth + 1):
        # G^T is built directly so its C-order ravel is the column-major vec(G)
        Gt = (alphas[l - 1].T @ (Delta[l - 1] * w[:, None])) / math.sqrt(config.fan_in(l))
        parts.append(Gt.ravel())
    parts.append((w @ alphas[-1]) / math.sqrt(config.width))
    return np.concatenate(parts)


def jacobian(params: Params, config: NetworkConfig, trace: ForwardTrace) -> np.ndarray:
    """Per-sample gradient rows J (n x p)."""
    alphas = trace.rows("alphas")
    _, Delta, _ = sensitivities(params, config, trace)
    n = alphas[0].shape[0]
    blocks = []
    for l in range(1, config.depth + 1):
        # vec(delta alpha^T) in column-major order is kron(alpha, delta)
        blk = np.einsum("ij,ik->ijk", alphas[l - 1], Delta[l - 1]).reshape(n, -1)
        blocks.append(blk / math.sqrt(config.fan_in(l)))
    blocks.append(alphas[-1] / math.sqrt(config.width))
    return np.concatenate(blocks, axis=1)


def backward(params: Params, config: NetworkConfig, trace: ForwardTrace) -> GradientBundle:
    """Exact gradient of f for a single-input trace."""
    if trace.batched:
        raise ValueError("backward expects a single-input trace; use jacobian() for batches")
    alphas = trace.rows("alphas")
    B, Delta, xin = sensitivities(params, config, trace)
    grads = []
    for l in range(1, config.depth + 1):
        # outer(alpha, delta) in C order is G^T, whose buffer is the column-major vec(G)
        grads.append(np.outer(alphas[l - 1][0], Delta[l - 1][0] / math.sqrt(config.fan_in(l))).T)
    v_grad = alphas[-1][0] / math.sqrt(config.width)
    flat = np.concatenate([G.T.ravel() for G in grads] + [v_grad])
    return GradientBundle(grads, v_grad, flat, xin[0], [b[0] for b in B])


def grad_flat(params: Params, config: NetworkConfig, x: np.ndarray) -> np.ndarray:
    return backward(params, config, forward(params, config, x, warn=False)).flat


def ntk_feature(params: Params, config: NetworkConfig, x: np.ndarray) -> np.ndarray:
    return grad_flat(params, config, x)


def default_hvp_eps(theta: np.ndarray, vdir: np.ndarray) -> float:
    return math.sqrt(np.finfo(np.float64).eps) * (1.0 + float(np.linalg.norm(theta))) / float(np.linalg.norm(vdir))


def hvp(params: Params, config: NetworkConfig, x: np.ndarray, vdir: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Hessian-vector product by central differences of the exact gradient."""
    return hvp_operator(params, config, x, eps)(vdir)


def hvp_operator(params: Params, config: NetworkConfig, x: np.ndarray,
                 eps: float | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """u -> grad^2_theta f(theta; x) u with theta flattened once."""
    theta = params.flat()
    theta_norm = float(np.linalg.norm(theta))
    x = np.asarray(x, dtype=np.float64)

    def apply(vdir: np.ndarray) -> np.ndarray:
        vdir = np.asarray(vdir, dtype=np.float64)
        h = eps
        if h is None:
            h = math.sqrt(np.finfo(np.float64).eps) * (1.0 + theta_norm) / float(np.linalg.norm(vdir))
        if not h > 0:
            raise ValueError("eps must be positive")
        gp = grad_flat(Params.from_flat(config, theta + h * vdir), config, x)
        gm = grad_flat(Params.from_flat(config, theta - h * vdir), config, x)
        return (gp - gm) / (2.0 * h)

    return apply


def hessian_from_grad(grad_fn: Callable[[np.ndarray], np.ndarray], theta: np.ndarray, eps: float | None = None,
                      check_symmetry: bool = True) -> np.ndarray:
    """Dense Hessian by central differencing a gradient callback coordinatewise."""
    theta = np.asarray(theta, dtype=np.float64)
    p = theta.size
    if p > MAX_DENSE_HESSIAN:
        raise ValueError(f"p={p} exceeds the dense Hessian limit {MAX_DENSE_HESSIAN}")
    if eps is None:
        eps = math.sqrt(np.finfo(np.float64).eps) * (1.0 + float(np.linalg.norm(theta)))
    H = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = eps
        H[:, j] = (grad_fn(theta + e) - grad_fn(theta - e)) / (2.0 * eps)
    asym = float(np.linalg.norm(H - H.T))
    if check_symmetry and asym > 1e-5 * float(np.linalg.norm(H)) + 1e-9:
        raise RuntimeError(f"finite-difference Hessian asymmetry {asym:.3e} is too large")
    return 0.5 * (H + H.T)


def dense_hessian(params: Params, config: NetworkConfig, x: np.ndarray, eps: float | None = None) -> np.ndarray:
    if config.n_params > MAX_DENSE_HESSIAN:
        raise ValueError(f"p={config.n_params} exceeds the dense Hessian limit {MAX_DENSE_HESSIAN}")
    return hessian_from_grad(lambda th: grad_flat(Params.from_flat(config, th), config, x), params.flat(), eps)


def save_params(path: str | Path, params: Params, config: NetworkConfig) -> None:
    params.check(config)
    header = MAGIC + struct.pack("<IIII", FORMAT_VERSION, config.depth, config.input_dim, config.width)
    Path(path).write_bytes(header + params.flat().astype("<f8").tobytes())


def load_params(path: str | Path) -> tuple[Params, tuple[int, int, int]]:
    """Read a parameter file; returns (params, (L, d, m))."""
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    version, L, d, m = struct.unpack("<IIII", raw[4:20])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported parameter file version {version}")
    cfg = NetworkConfig(depth=L, input_dim=d, width=m, activation="identity")
    body = np.frombuffer(raw[20:], dtype="<f8")
    if body.size != cfg.n_params:
        raise ValueError(f"expected {cfg.n_params} entries, found {body.size}")
    return Params.from_flat(cfg, body.astype(np.float64)), (L, d, m)


def layer_input_jacobians(params: Params, config: NetworkConfig, trace: ForwardTrace) -> list[np.ndarray]:
    """d alpha^(l) / d alpha^(l-1) = D^(l) W^(l) / sqrt(m_{l-1}) for a single input."""
    return [trace.act_derivs[l - 1][:, None] * params.weights[l - 1] / math.sqrt(config.fan_in(l))
            for l in range(1, config.depth + 1)]

