import csv
import math

import numpy as np
import pytest

from rscnet.data import synthetic
from rscnet.network import NetworkConfig, Params, init, zeros
from rscnet.trainer import (
    LOG_HEADER,
    DivergenceError,
    TrainConfig,
    TrainLogRecord,
    gradient_bound_checks,
    last_quartile_cv,
    min_gbar_over_run,
    train,
    verify_one_step_inequalities,
    write_log_csv,
)


def rec(t, loss, grad_norm, eta, g=1.0):
    return TrainLogRecord(t, loss, g, 0.0, eta, True, (), 0.0, grad_norm, 1.0)


def test_zero_net_zero_labels_stops_immediately():
    ds = synthetic(8, 3, 0)
    cfg = NetworkConfig(2, 3, 4)
    res = train(zeros(cfg), cfg, TrainConfig(), ds.X, np.zeros(8))
    assert res.stop_reason == "loss_target" and len(res.log) == 1 and res.log[0].loss == 0.0


def test_one_step_matches_linear_regression_update():
    ds = synthetic(6, 3, 1)
    m, d, n = 4, 3, 6
    cfg = NetworkConfig(1, d, m, activation="identity")
    p0 = init(cfg, 2)
    eta = 0.05
    res = train(p0, cfg, TrainConfig(max_iters=1, loss_target=0.0, eta=eta), ds.X, ds.y)
    W, v = p0.weights[0], p0.v
    F = ds.X @ W.T / math.sqrt(d * m)  # features for the v block
    r = F @ v - ds.y
    v1 = v - eta * 2 * F.T @ r / n
    W1 = W - eta * 2 * np.outer(v, ds.X.T @ r) / (n * math.sqrt(d * m))
    np.testing.assert_allclose(res.params.v, v1, atol=1e-14)
    np.testing.assert_allclose(res.params.weights[0], W1, atol=1e-14)
    assert res.log[0].loss == pytest.approx(np.mean(r * r), abs=1e-15)


def test_one_step_inequality_on_scalar_quadratic():
    # L(theta) = theta^2, beta = 2, eta = 1/2: theta_1 = 0 and the bound is tight
    th0 = 1.7
    log = [rec(0, th0**2, 2 * th0, 0.5), rec(1, 0.0, 0.0, 0.5)]
    (chk,) = verify_one_step_inequalities(log, beta=2.0)
    assert chk.rhs == pytest.approx(0.0, abs=1e-15) and chk.holds
    bad = [rec(0, 1.0, 2.0, 0.5), rec(1, 0.5, 0.0, 0.5)]
    assert not verify_one_step_inequalities(bad, 2.0)[0].holds
    tiny = [rec(0, 1.0, 2.0, 1e-300), rec(1, 1.0, 2.0, 1e-300)]
    assert verify_one_step_inequalities(tiny, 2.0)[0].rhs == 1.0


def test_min_gbar():
    assert min_gbar_over_run([rec(0, 1.0, 1.0, 0.1, g=0.3)]) == 0.3
    assert min_gbar_over_run([rec(t, 1.0, 1.0, 0.1, g=0.7) for t in range(5)]) == 0.7
    with pytest.raises(ValueError):
        min_gbar_over_run([])


def test_run_invariants_and_replay(tmp_path):
    ds = synthetic(16, 8, 3)
    cfg = NetworkConfig(2, 8, 32)
    tc = TrainConfig(max_iters=40, loss_target=0.0)
    a = train(init(cfg), cfg, tc, ds.X, ds.y)
    b = train(init(cfg), cfg, tc, ds.X, ds.y)
    write_log_csv(tmp_path / "a.csv", a.log)
    write_log_csv(tmp_path / "b.csv", b.log)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    with open(tmp_path / "a.csv") as fh:
        assert next(csv.reader(fh)) == LOG_HEADER
    assert all(verify_one_step_inequalities(a.log, a.ctx.beta)[i].holds for i in range(40))
    assert all(gradient_bound_checks(a.log, a.ctx.varrho))
    assert all(r.alpha_t < a.ctx.beta for r in a.log)
    losses = [r.loss for r in a.log]
    assert all(x >= y for x, y in zip(losses, losses[1:]))
    assert a.log[-1].eta_t == pytest.approx(1.0 / a.ctx.beta)
    assert np.isfinite(last_quartile_cv(a.log))


def test_divergence_reports_partial_log():
    ds = synthetic(8, 4, 0)
    cfg = NetworkConfig(2, 4, 8)
    with pytest.raises(DivergenceError) as exc:
        train(init(cfg), cfg, TrainConfig(max_iters=200, loss_target=0.0, eta=1e4), ds.X, ds.y)
    assert len(exc.value.log) >= 1


def test_input_validation():
    ds = synthetic(4, 3, 0)
    cfg = NetworkConfig(1, 3, 2)
    with pytest.raises(ValueError):
        train(init(cfg), cfg, TrainConfig(), 2 * ds.X, ds.y)
    with pytest.raises(ValueError):
        train(init(cfg), cfg, TrainConfig(), ds.X, np.full(4, np.nan))
    for bad in (dict(omega=2.0), dict(omega=0.0), dict(loss="logistic"), dict(monitor_every=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
