"""Empirical checks of the Hessian bound, the (2,2,1)-tensor bounds and the
layerwise norm bounds against their closed forms."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .bounds import BoundContext, in_spec_ball
from .linalg import power_iteration_spectral_norm, rect_spectral_norm_power, spectral_norm, sym_eig
from .network import (
    MAX_DENSE_HESSIAN,
    NetworkConfig,
    Params,
    backward,
    dense_hessian,
    forward,
    hvp_operator,
    layer_input_jacobians,
)
from .trainer import loss_and_grads

REL_TOL = 1e-6


@dataclass
class VerificationReport:
    quantity: str
    empirical: float
    bound: float
    satisfied: bool
    margin: float
    method: str
    probabilistic: bool = False
    flags: list[str] = field(default_factory=list)

    @classmethod
    def make(cls, quantity: str, empirical: float, bound: float, method: str, probabilistic: bool = False,
             flags: Sequence[str] = ()) -> "VerificationReport":
        empirical, bound = float(empirical), float(bound)
        ok = empirical <= bound * (1.0 + REL_TOL) if bound >= 0 else empirical <= bound
        margin = empirical / bound if bound != 0 else (0.0 if empirical == 0 else math.inf)
        return cls(quantity, empirical, bound, bool(ok), margin, method, probabilistic, list(flags))

    def to_dict(self) -> dict:
        return asdict(self)


def hessian_spectral_norm(params: Params, config: NetworkConfig, x: np.ndarray, method: str = "auto",
                          iters: int = 400, tol: float = 1e-6, seed: int = 0) -> tuple[float, str]:
    """||grad^2_theta f(theta; x)||_2 by the dense oracle (p <= 2000) or HVP power iteration."""
    use_dense = method == "dense" or (method == "auto" and config.n_params <= MAX_DENSE_HESSIAN)
    if use_dense:
        H = dense_hessian(params, config, x)
        w = sym_eig(H)[0]
        return float(max(abs(w[0]), abs(w[-1]))), "dense_oracle"
    est = power_iteration_spectral_norm(hvp_operator(params, config, x), config.n_params, iters=iters,
                                        tol=tol, seed=seed)
    return est.sigma, "power_iteration"


def verify_hessian_bound(params: Params, net_config: NetworkConfig, ctx: BoundContext, X: np.ndarray,
                         theta0: Params | None = None, method: str = "auto", iters: int = 400,
                         tol: float = 1e-6, seed: int = 0) -> VerificationReport:
    """max_i ||grad^2 f(theta; x_i)||_2 against c_H / sqrt(m)."""
    flags = []
    if theta0 is not None and not in_spec_ball(params, theta0, ctx.rho, ctx.rho1).inside:
        flags.append("precondition: theta outside the spectral ball")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    vals = []
    used = method
    for i, x in enumerate(X):
        val, used = hessian_spectral_norm(params, net_config, x, method, iters, tol, seed + i)
        vals.append(val)
    return VerificationReport.make("hessian_spectral_norm", max(vals), ctx.hessian_bound, used, flags=flags)


def tensor_221_norm_estimate(T: np.ndarray, restarts: int = 20, iters: int = 100, seed: int = 0) -> float:
    """Lower estimate of sup_{|x|=|z|=1} sum_k |sum_ij T_ijk x_i z_j| by sign-alternating ascent."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    T = np.ascontiguousarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise ValueError("expected an order-3 tensor")
    if not np.any(T):
        return 0.0
    d1, d2, _ = T.shape
    rng = np.random.default_rng(seed)
    best = 0.0
    for r in range(restarts):
        if r == 0:
            # deterministic start from the dominant singular pair of the summed slices
            U, _, Vt = np.linalg.svd(T.sum(axis=2))
            x0, z0 = U[:, 0].copy(), Vt[0].copy()
        else:
            x0, z0 = rng.standard_normal(d1), rng.standard_normal(d2)
        val, _, _ = _kernels.ascent_221(T, np.ascontiguousarray(x0), np.ascontiguousarray(z0), iters)
        best = max(best, float(val))
    return best


def tensor_221_grid(T: np.ndarray, steps: int = 100) -> float:
    """Brute-force sup over a grid of angles; only for d1 = d2 = 2."""
    if T.shape[0] != 2 or T.shape[1] != 2:
        raise ValueError("grid oracle supports d1 = d2 = 2")
    ang = np.linspace(0.0, math.pi, steps, endpoint=False)
    xs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    vals = np.einsum("ijk,ai,bj->abk", T, xs, xs)
    return float(np.max(np.sum(np.abs(vals), axis=2)))


def layer_tensors(params: Params, config: NetworkConfig, x: np.ndarray, layer: int) -> dict[str, np.ndarray]:
    """Second-derivative tensors of alpha^(l) at input x; the output index is the last axis.

    aa: d^2 alpha / d alpha^(l-1)^2, aw: mixed with vec(W^(l)), ww: d^2 alpha / d vec(W^(l))^2.
    """
    trace = forward(params, config, x, warn=False)
    W = params.weights[layer - 1]
    a = trace.alphas[layer - 1]
    z = trace.preacts[layer - 1]
    m, fan = W.shape
    p1 = config.activation.d1(z)
    p2 = config.activation.d2(z)
    aa = np.einsum("i,ij,ik->jki", p2, W, W) / fan
    aw = np.zeros((fan, m, fan, m))
    idx = np.arange(m)
    # (1/fan) phi''_i W_ik a_j' [j = i]
    aw[:, idx, :, idx] = (p2[:, None, None] * W[:, :, None] * a[None, None, :]) / fan
    # (1/sqrt(fan)) phi'_i [j = i][j' = k]
    eye = np.eye(fan)
    aw[:, idx, :, idx] += p1[:, None, None] * eye[None, :, :] / math.sqrt(fan)
    aw = aw.reshape(fan, m * fan, m)
    ww = np.zeros((m, fan, m, fan, m))
    ww[idx, :, idx, :, idx] = p2[:, None, None] * np.outer(a, a)[None, :, :] / fan
    ww = ww.reshape(m * fan, m * fan, m)
    return {"aa": aa, "aw": aw, "ww": ww}


def tensor_bounds(ctx: BoundContext, layer: int) -> dict[str, float]:
    g2 = ctx.gamma**2
    hl = float(ctx.h[layer - 1])
    return {
        "aa": ctx.beta_phi * g2,
        "aw": 0.5 * ctx.beta_phi * (g2 + hl * hl) + 1.0,
        "ww": ctx.beta_phi * hl * hl,
    }


def verify_tensor_bounds(params: Params, config: NetworkConfig, ctx: BoundContext, X: np.ndarray,
                         restarts: int = 20, seed: int = 0) -> list[VerificationReport]:
    X = np.atleast_2d(X)
    out = []
    for l in range(2, config.depth + 1):
        best = {"aa": 0.0, "aw": 0.0, "ww": 0.0}
        for i, x in enumerate(X):
            for key, T in layer_tensors(params, config, x, l).items():
                best[key] = max(best[key], tensor_221_norm_estimate(T, restarts, seed=seed + i))
        bnd = tensor_bounds(ctx, l)
        for key in ("aa", "aw", "ww"):
            out.append(VerificationReport.make(f"tensor221_{key}_l{l}", best[key], bnd[key], "alternating_ascent"))
    return out


def verify_appendix_A(params: Params, net_config: NetworkConfig, ctx: BoundContext, X: np.ndarray,
                      params0: Params | None = None, y: np.ndarray | None = None,
                      tensors: bool | None = None) -> list[VerificationReport]:
    """Layerwise spectral, norm, sensitivity, gradient and loss bounds, maximized over inputs."""
    cfg = net_config
    p0 = params if params0 is None else params0
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    L, m = cfg.depth, cfg.width
    reports = []
    for l, W0 in enumerate(p0.weights, start=1):
        reports.append(VerificationReport.make(f"init_spectral_W{l}", spectral_norm(W0), cfg.sigma1 * math.sqrt(m),
                                               "dense_oracle", probabilistic=True))
    flags = []
    if params0 is not None and not in_spec_ball(params, params0, ctx.rho, ctx.rho1).inside:
        flags.append("precondition: theta outside the spectral ball")
    worst: dict[str, tuple[float, float]] = {}

    def track(name: str, value: float, bound: float) -> None:
        prev = worst.get(name)
        if prev is None or value / max(bound, 1e-300) > prev[0] / max(prev[1], 1e-300):
            worst[name] = (value, bound)

    for x in X:
        trace = forward(params, cfg, x, warn=False)
        gb = backward(params, cfg, trace)
        jacs = layer_input_jacobians(params, cfg, trace)
        for l in range(1, L + 1):
            if l >= 2:
                track(f"dalpha_dalpha_l{l}", spectral_norm(jacs[l - 1]), ctx.gamma)
            fan = cfg.fan_in(l)
            # the Jacobian w.r.t. vec(W^(l)) has orthogonal rows phi'_i alpha^(l-1)^T / sqrt(fan)
            dw = float(np.max(np.abs(trace.act_derivs[l - 1]))) * float(np.linalg.norm(trace.alphas[l - 1])) / math.sqrt(fan)
            track(f"dalpha_dw_l{l}", dw, float(ctx.h[l - 1]))
            track(f"alpha_norm_l{l}", float(np.linalg.norm(trace.alphas[l])), float(ctx.h[l]) * math.sqrt(m))
            b = gb.sensitivities[l - 1]
            track(f"b_l2_l{l}", float(np.linalg.norm(b)), ctx.b_bound(l))
            track(f"b_inf_l{l}", float(np.max(np.abs(b))), ctx.b_bound(l))
        track("predictor_grad", float(np.linalg.norm(gb.flat)), ctx.varrho)
        track("input_grad", float(np.linalg.norm(gb.input_grad)), ctx.input_grad_bound)
    for name, (val, bnd) in worst.items():
        reports.append(VerificationReport.make(name, val, bnd, "dense_oracle", flags=flags))
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        loss, grad, _ = loss_and_grads(params, cfg, X, y)
        reports.append(VerificationReport.make("loss_ball", loss, ctx.c_loss_ball, "dense_oracle", flags=flags))
        reports.append(VerificationReport.make("loss_grad", float(np.linalg.norm(grad)),
                                               2.0 * math.sqrt(loss) * ctx.varrho, "dense_oracle", flags=flags))
        loss0, _, _ = loss_and_grads(p0, cfg, X, y)
        reports.append(VerificationReport.make("loss_init", loss0, ctx.c_loss_init, "dense_oracle",
                                               probabilistic=True))
    if tensors is None:
        tensors = m <= 8
    if tensors:
        reports.extend(verify_tensor_bounds(params, cfg, ctx, X))
    return reports


def perturb_in_ball(params: Params, rho: float, rho1: float, seed: int, low: float = 0.5,
                    high: float = 0.9) -> Params:
    """Add Gaussian matrices rescaled (via power iteration) to a spectral deviation in [low, high] * rho."""
    rng = np.random.default_rng(seed)
    weights = []
    for l, W in enumerate(params.weights, start=1):
        G = rng.standard_normal(W.shape)
        s = rect_spectral_norm_power(G, iters=200, seed=seed + l)
        weights.append(W + rng.uniform(low, high) * rho * G / s)
    g = rng.standard_normal(params.v.shape)
    v = params.v + rng.uniform(low, high) * rho1 * g / np.linalg.norm(g)
    return Params(tuple(weights), v)


def loglog_slope(widths: Sequence[float], values: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(widths, float)), np.log(np.asarray(values, float)), 1)[0])
