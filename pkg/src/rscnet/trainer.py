"""Full-batch gradient descent on the square loss with RSC and smoothness monitoring."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import BoundContext, in_spec_ball, q_kappa_cosine
from .network import NetworkConfig, Params, forward, sensitivities, weighted_gradient

LOG_HEADER = ["t", "loss", "gbar_norm", "alpha_t", "eta_t", "in_ball", "step_norm", "contraction"]
DIVERGENCE_LOSS = 1e6


class DivergenceError(RuntimeError):
    def __init__(self, message: str, log: list["TrainLogRecord"]):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class TrainConfig:
    max_iters: int = 3000
    loss_target: float = 1e-3
    omega: float = 1.0
    kappa: float = 1.0
    rho: float = 1.0
    rho1: float = 1.0
    rho2: float | None = None
    loss: str = "square"
    monitor_every: int = 1
    eta: float | None = None
    check_ball: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.omega < 2:
            raise ValueError("omega must lie in (0, 2)")
        if self.loss != "square":
            raise ValueError("only the square loss is supported")
        if self.max_iters < 0 or self.monitor_every < 1:
            raise ValueError("max_iters must be >= 0 and monitor_every >= 1")


@dataclass
class TrainLogRecord:
    t: int
    loss: float
    gbar_norm: float
    alpha_t: float
    eta_t: float
    in_ball: bool
    margins: tuple[float, ...]
    step_norm: float
    grad_norm: float
    q_cosine: float
    contraction: float = float("nan")

    def row(self) -> list:
        return [self.t, repr(self.loss), repr(self.gbar_norm), repr(self.alpha_t), repr(self.eta_t),
                int(self.in_ball), repr(self.step_norm), repr(self.contraction)]


@dataclass
class TrainResult:
    params: Params
    log: list[TrainLogRecord]
    ctx: BoundContext
    stop_reason: str
    flags: dict = field(default_factory=dict)


def square_loss(pred: np.ndarray, y: np.ndarray) -> float:
    r = pred - y
    return float(np.mean(r * r))


def loss_and_grads(params: Params, config: NetworkConfig, X: np.ndarray, y: np.ndarray, with_gbar: bool = True):
    """Returns (loss, grad of loss, mean predictor gradient gbar or None)."""
    trace = forward(params, config, X, warn=False)
    pred = trace.output
    n = y.size
    _, Delta, _ = sensitivities(params, config, trace)
    lprime = 2.0 * (pred - y)
    grad = weighted_gradient(params, config, trace, lprime / n, Delta)
    gbar = weighted_gradient(params, config, trace, np.full(n, 1.0 / n), Delta) if with_gbar else None
    return square_loss(pred, y), grad, gbar


def train(params0: Params, net_config: NetworkConfig, train_config: TrainConfig, X: np.ndarray,
          y: Sequence[float], ctx: BoundContext | None = None) -> TrainResult:
    """Gradient descent theta_{t+1} = theta_t - eta grad L(theta_t) with eta = omega / beta."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("labels must be finite")
    d = X.shape[1]
    if not np.all(np.abs(np.sum(X * X, axis=1) - d) <= 1e-6 * d):
        raise ValueError("rows of X must satisfy ||x_i||^2 = d")
    params0.check(net_config)
    if ctx is None:
        ctx = BoundContext.build(net_config, y, rho=train_config.rho, rho1=train_config.rho1,
                                 rho2=train_config.rho2, kappa=train_config.kappa)
    eta = train_config.eta if train_config.eta is not None else ctx.step_size(train_config.omega)
    theta = params0.flat()
    params = params0
    n = y.size
    log: list[TrainLogRecord] = []
    flags = {"alpha_nonpositive_steps": [], "ball_exit_steps": []}
    stop = "max_iters"
    t = 0
    while True:
        trace = forward(params, net_config, X, warn=False)
        loss = square_loss(trace.output, y)
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceError(f"loss {loss} at step {t}", log)
        finished = loss < train_config.loss_target or t >= train_config.max_iters
        monitored = t % train_config.monitor_every == 0 or finished
        _, Delta, _ = sensitivities(params, net_config, trace)
        grad = weighted_gradient(params, net_config, trace, 2.0 * (trace.output - y) / n, Delta)
        step = -eta * grad
        if monitored:
            gbar = weighted_gradient(params, net_config, trace, np.full(n, 1.0 / n), Delta)
            gbar_sq = float(gbar @ gbar)
            alpha = ctx.rsc_alpha(gbar_sq)
            if train_config.check_ball:
                ball = in_spec_ball(params, params0, ctx.rho, ctx.rho1)
                inside, margins = ball.inside, ball.margins
            else:
                inside, margins = True, ()
            try:
                cos = q_kappa_cosine(theta + step, theta, gbar)
            except ValueError:
                cos = float("nan")
            if alpha <= 0:
                flags["alpha_nonpositive_steps"].append(t)
            if not inside:
                flags["ball_exit_steps"].append(t)
            log.append(TrainLogRecord(t, loss, math.sqrt(gbar_sq), alpha, eta, inside, margins,
                                      0.0 if finished else float(np.linalg.norm(step)),
                                      float(np.linalg.norm(grad)), cos))
        if finished:
            stop = "loss_target" if loss < train_config.loss_target else "max_iters"
            break
        theta = theta + step
        params = Params.from_flat(net_config, theta)
        t += 1
    _fill_contraction(log)
    return TrainResult(params, log, ctx, stop, flags)


def _fill_contraction(log: list[TrainLogRecord]) -> None:
    if not log:
        return
    best = min(r.loss for r in log)
    for cur, nxt in zip(log[:-1], log[1:]):
        denom = cur.loss - best
        cur.contraction = (nxt.loss - best) / denom if denom > 0 else float("nan")


def min_gbar_over_run(log: Sequence[TrainLogRecord]) -> float:
    if not log:
        raise ValueError("empty log")
    return min(r.gbar_norm for r in log)


@dataclass(frozen=True)
class StepCheck:
    t: int
    lhs: float
    rhs: float
    holds: bool


def verify_one_step_inequalities(log: Sequence[TrainLogRecord], beta: float) -> list[StepCheck]:
    """L_{t+1} <= L_t - eta (1 - beta eta / 2) ||grad L_t||^2 for consecutive logged steps."""
    out = []
    for cur, nxt in zip(log[:-1], log[1:]):
        if nxt.t != cur.t + 1:
            continue
        eta = cur.eta_t
        rhs = cur.loss - eta * (1.0 - beta * eta / 2.0) * cur.grad_norm**2
        # relative slack for floating-point evaluation of the two losses
        holds = nxt.loss <= rhs + 1e-12 * max(1.0, abs(cur.loss))
        out.append(StepCheck(cur.t, nxt.loss, rhs, holds))
    return out


def gradient_bound_checks(log: Sequence[TrainLogRecord], varrho: float) -> list[bool]:
    """||grad L|| <= 2 sqrt(L) varrho at every in-ball logged step."""
    return [r.grad_norm <= 2.0 * math.sqrt(r.loss) * varrho * (1 + 1e-12) for r in log if r.in_ball]


def write_log_csv(path: str | Path, log: Sequence[TrainLogRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_HEADER)
        for r in log:
            w.writerow(r.row())


def last_quartile_cv(log: Sequence[TrainLogRecord]) -> float:
    g = np.array([r.gbar_norm for r in log])
    tail = g[3 * len(g) // 4 :] if len(g) >= 4 else g
    mean = float(np.mean(tail))
    return float(np.std(tail) / mean) if mean > 0 else float("nan")
