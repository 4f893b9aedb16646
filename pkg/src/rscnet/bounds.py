"""Closed-form constants for the Hessian, smoothness and RSC bounds, and
membership tests for the layerwise spectral ball and the Q_kappa sets."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import rect_spectral_norm_power
from .network import NetworkConfig, Params

BALL_POWER_ITERS = 40
BALL_SLACK = 1e-6


def gamma(sigma1: float, rho: float, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    return sigma1 + rho / math.sqrt(m)


def h_seq(gamma_: float, phi0_abs: float, L: int) -> np.ndarray:
    """h(1..L+1) with h(l) = gamma^(l-1) + |phi(0)| sum_{i=1}^{l-1} gamma^(i-1); index 0 holds h(1)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    out = np.empty(L + 1)
    for l in range(1, L + 2):
        out[l - 1] = gamma_ ** (l - 1) + phi0_abs * sum(gamma_ ** (i - 1) for i in range(1, l))
    return out


def g_of(a: float, phi0_abs: float, L: int) -> float:
    return a**L + phi0_abs * sum(a**i for i in range(1, L + 1))


def psi_H(h: Sequence[float], gamma_: float, beta_phi: float, L: int) -> float:
    """Pair maximum over 1 <= l1 < l2 <= L; for L = 1 it is beta_phi * h(1)^2."""
    if L == 1:
        return beta_phi * h[0] ** 2
    best = -math.inf
    for l1 in range(1, L + 1):
        for l2 in range(l1 + 1, L + 1):
            h1, h2 = h[l1 - 1], h[l2 - 1]
            best = max(best,
                       beta_phi * h1 * h1,
                       h1 * (0.5 * beta_phi * (gamma_**2 + h2 * h2) + 1.0),
                       beta_phi * gamma_**2 * h1 * h2)
    return best


def c_H_value(L: int, gamma_: float, beta_phi: float, phi0_abs: float, rho1: float) -> tuple[float, float]:
    """Returns (psi_H, c_H)."""
    h = h_seq(gamma_, phi0_abs, L)
    psi = psi_H(h, gamma_, beta_phi, L)
    max_pow = max(gamma_ ** (L - l) for l in range(1, L + 1))
    first = L * (L * L * gamma_ ** (2 * L) + L * gamma_**L + 1.0) * (1.0 + rho1) * psi * max_pow
    second = L * gamma_**L * float(np.max(h[:L]))
    return float(psi), float(first + second)


def varrho_value(L: int, gamma_: float, phi0_abs: float, rho1: float, m: int) -> float:
    h = h_seq(gamma_, phi0_abs, L)
    tail = sum(h[l - 1] ** 2 * gamma_ ** (2 * (L - l)) for l in range(1, L + 2))
    return math.sqrt(h[L] ** 2 + (1.0 + rho1) ** 2 * tail / m)


def loss_constant(y: Sequence[float], a: float, b: float, phi0_abs: float, L: int) -> float:
    """c_{a,b} = (2/n) sum y^2 + 2 (1+a)^2 g(b)^2."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("labels must be non-empty")
    return 2.0 * float(np.mean(y * y)) + 2.0 * (1.0 + a) ** 2 * g_of(b, phi0_abs, L) ** 2


def smoothness_beta_value(b: float, varrho: float, c_H: float, c_loss_ball: float, m: int) -> float:
    return b * varrho**2 + c_H * math.sqrt(c_loss_ball) / math.sqrt(m)


def rsc_c2(a: float, c_H: float, varrho: float, rho2: float, c_loss_ball: float) -> float:
    return 2.0 * c_H * (a * varrho * rho2 + math.sqrt(c_loss_ball))


def rsc_alpha_value(gbar_norm_sq: float, a: float, kappa: float, c_H: float, varrho: float, rho2: float,
                    c_loss_ball: float, m: int) -> float:
    return a * kappa**2 * gbar_norm_sq - rsc_c2(a, c_H, varrho, rho2, c_loss_ball) / math.sqrt(m)


def rsc_alpha_general_value(gbar_norm_sq: float, lambda_t: float, a: float, kappa: float, c_H: float,
                            varrho: float, rho2: float, m: int) -> float:
    if lambda_t < 0:
        raise ValueError("lambda_t must be nonnegative")
    c4 = 2.0 * a * varrho * c_H * rho2
    c4t = c_H * math.sqrt(lambda_t)
    return a * kappa**2 * gbar_norm_sq - (c4 + c4t) / math.sqrt(m)


@dataclass
class BoundContext:
    """All theoretical constants for one (network, radii, labels) setting."""

    L: int
    m: int
    sigma1: float
    rho: float
    rho1: float
    rho2: float
    kappa: float
    loss_a: float
    loss_b: float
    beta_phi: float
    phi0_abs: float
    gamma: float
    h: np.ndarray
    psiH: float
    cH: float
    varrho: float
    c_loss_init: float
    c_loss_ball: float
    beta: float
    c1: float
    c2: float
    notes: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, config: NetworkConfig, y: Sequence[float], rho: float = 1.0, rho1: float = 1.0,
              rho2: float | None = None, kappa: float = 1.0, loss_a: float = 2.0, loss_b: float = 2.0,
              gamma_override: float | None = None, beta_phi: float | None = None,
              phi0_abs: float | None = None) -> "BoundContext":
        """Evaluate every constant. ``rho2=None`` picks eta * 2 sqrt(c_{rho1,gamma}) * varrho with eta = 1/beta."""
        if not 0 < kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        act = config.activation
        notes = []
        if not act.is_one_lipschitz or act.kind == "identity":
            msg = f"{act.kind}: constants use the 1-Lipschitz formulas (lipschitz={act.lipschitz:.4g})"
            notes.append(msg)
            if not act.is_one_lipschitz:
                warnings.warn(msg, stacklevel=2)
        bphi = act.smoothness if beta_phi is None else beta_phi
        p0 = act.phi0_abs if phi0_abs is None else phi0_abs
        L, m = config.depth, config.width
        gam = gamma(config.sigma1, rho, m) if gamma_override is None else gamma_override
        h = h_seq(gam, p0, L)
        psi, cH = c_H_value(L, gam, bphi, p0, rho1)
        vr = varrho_value(L, gam, p0, rho1, m)
        c_init = loss_constant(y, 0.0, config.sigma1, p0, L)
        c_ball = loss_constant(y, rho1, gam, p0, L)
        beta = smoothness_beta_value(loss_b, vr, cH, c_ball, m)
        if rho2 is None:
            rho2 = (1.0 / beta) * 2.0 * math.sqrt(c_ball) * vr
        c1 = loss_a * kappa**2
        c2 = rsc_c2(loss_a, cH, vr, rho2, c_ball)
        return cls(L, m, config.sigma1, rho, rho1, rho2, kappa, loss_a, loss_b, bphi, p0, gam, h, psi, cH, vr,
                   c_init, c_ball, beta, c1, c2, notes)

    def rsc_alpha(self, gbar_norm_sq: float) -> float:
        return rsc_alpha_value(gbar_norm_sq, self.loss_a, self.kappa, self.cH, self.varrho, self.rho2,
                               self.c_loss_ball, self.m)

    def rsc_alpha_general(self, gbar_norm_sq: float, lambda_t: float) -> float:
        return rsc_alpha_general_value(gbar_norm_sq, lambda_t, self.loss_a, self.kappa, self.cH, self.varrho,
                                       self.rho2, self.m)

    def step_size(self, omega: float = 1.0) -> float:
        if not 0 < omega < 2:
            raise ValueError("omega must lie in (0, 2)")
        return omega / self.beta

    @property
    def hessian_bound(self) -> float:
        return self.cH / math.sqrt(self.m)

    def b_bound(self, l: int) -> float:
        return self.gamma ** (self.L - l) * (1.0 + self.rho1) / math.sqrt(self.m)

    @property
    def input_grad_bound(self) -> float:
        return self.gamma**self.L * (1.0 + self.rho1) / math.sqrt(self.m)

    def as_report(self) -> dict:
        return {
            "gamma": self.gamma,
            "h": [float(v) for v in self.h],
            "psi_H": self.psiH,
            "c_H": self.cH,
            "varrho": self.varrho,
            "beta": self.beta,
            "c_loss_ball": self.c_loss_ball,
            "c1": self.c1,
            "c2": self.c2,
        }


@dataclass(frozen=True)
class BallMembership:
    inside: bool
    margins: tuple[float, ...]

    def __bool__(self) -> bool:
        return self.inside


def layer_deviations(theta: Params, theta0: Params, iters: int = BALL_POWER_ITERS) -> tuple[list[float], float]:
    if theta.depth != theta0.depth or theta.v.shape != theta0.v.shape:
        raise ValueError("parameter shapes do not match")
    devs = []
    for l, (W, W0) in enumerate(zip(theta.weights, theta0.weights), start=1):
        if W.shape != W0.shape:
            raise ValueError(f"layer {l} shape mismatch {W.shape} vs {W0.shape}")
        devs.append(rect_spectral_norm_power(W - W0, iters=iters, seed=l))
    return devs, float(np.linalg.norm(theta.v - theta0.v))


def in_spec_ball(theta: Params, theta0: Params, rho: float, rho1: float) -> BallMembership:
    """Layerwise spectral ball: ||W^(l) - W0^(l)||_2 <= rho for all l and ||v - v0|| <= rho1."""
    devs, vdev = layer_deviations(theta, theta0)
    margins = tuple([rho - d for d in devs] + [rho1 - vdev])
    inside = all(d <= rho + BALL_SLACK for d in devs) and vdev <= rho1 + BALL_SLACK
    return BallMembership(inside, margins)


def in_euc_ball(theta: np.ndarray, center: np.ndarray, rho2: float) -> bool:
    return float(np.linalg.norm(np.asarray(theta) - np.asarray(center))) <= rho2


def q_kappa_cosine(theta_candidate: np.ndarray, theta_t: np.ndarray, gbar: np.ndarray) -> float:
    disp = np.asarray(theta_candidate, dtype=np.float64) - np.asarray(theta_t, dtype=np.float64)
    nd = float(np.linalg.norm(disp))
    ng = float(np.linalg.norm(gbar))
    if nd == 0.0 or ng == 0.0:
        raise ValueError("cosine undefined: zero displacement or zero mean gradient")
    return float(disp @ gbar) / (nd * ng)


def in_q_kappa(theta_candidate: np.ndarray, theta_t: np.ndarray, gbar: np.ndarray, kappa: float) -> bool:
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    # 1e-12 absorbs roundoff so exactly parallel steps count at kappa = 1
    return abs(q_kappa_cosine(theta_candidate, theta_t, gbar)) >= kappa - 1e-12
