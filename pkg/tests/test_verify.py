import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rscnet import _pykernels
from rscnet.bounds import BoundContext
from rscnet.data import synthetic
from rscnet.linalg import spectral_norm
from rscnet.network import NetworkConfig, init, zeros
from rscnet.verify import (
    VerificationReport,
    hessian_spectral_norm,
    loglog_slope,
    perturb_in_ball,
    tensor_221_grid,
    tensor_221_norm_estimate,
    verify_appendix_A,
    verify_hessian_bound,
    verify_tensor_bounds,
)


def test_report_satisfaction_rule():
    assert VerificationReport.make("q", 1.0 + 5e-7, 1.0, "dense_oracle").satisfied
    assert not VerificationReport.make("q", 1.0 + 2e-6, 1.0, "dense_oracle").satisfied
    assert VerificationReport.make("q", 0.5, 2.0, "dense_oracle").margin == 0.25


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 6))
def test_single_slice_reduces_to_spectral_norm(seed, d1, d2):
    M = np.random.default_rng(seed).standard_normal((d1, d2))
    assert tensor_221_norm_estimate(M[:, :, None], restarts=20) == pytest.approx(spectral_norm(M), rel=1e-6)


def test_zero_tensor():
    assert tensor_221_norm_estimate(np.zeros((3, 4, 2))) == 0.0
    with pytest.raises(ValueError):
        tensor_221_norm_estimate(np.ones((2, 2, 2)), restarts=0)


@pytest.mark.parametrize("seed", range(10))
def test_estimate_close_to_grid_oracle(seed):
    T = np.random.default_rng(seed).standard_normal((2, 2, 2))
    grid = tensor_221_grid(T, steps=100)
    est = tensor_221_norm_estimate(T, restarts=20, seed=seed)
    assert abs(est - grid) <= 0.02 * grid


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))
def test_estimate_below_valid_upper_bounds(seed, a, b, c):
    T = np.random.default_rng(seed).standard_normal((a, b, c))
    est = tensor_221_norm_estimate(T, restarts=5, seed=seed)
    assert est <= sum(spectral_norm(T[:, :, k]) for k in range(c)) * (1 + 1e-12)
    assert est <= math.sqrt(c) * np.linalg.norm(T) * (1 + 1e-12)


def test_backends_agree_from_same_start(rng):
    T = np.ascontiguousarray(rng.standard_normal((4, 5, 3)))
    x0, z0 = rng.standard_normal(4), rng.standard_normal(5)
    from rscnet import _kernels

    a = _kernels.ascent_221(T, x0.copy(), z0.copy(), 50)[0]
    b = _pykernels.ascent_221(T, x0.copy(), z0.copy(), 50)[0]
    assert a == pytest.approx(b, rel=1e-10)


def test_linear_network_hessian_norm():
    cfg = NetworkConfig(1, 3, 5, activation="identity")
    ds = synthetic(3, 3, 0)
    ctx = BoundContext.build(cfg, ds.y)
    rep = verify_hessian_bound(init(cfg), cfg, ctx, ds.X)
    assert rep.empirical == pytest.approx(1 / math.sqrt(5), abs=1e-7)
    # beta_phi = 0 leaves c_H = gamma, so the bound is gamma / sqrt(m)
    assert rep.bound == pytest.approx((1 + 1 / math.sqrt(5)) / math.sqrt(5))
    assert rep.satisfied


def test_dense_and_power_iteration_agree():
    cfg = NetworkConfig(2, 4, 12)
    p = init(cfg, 3)
    x = synthetic(1, 4, 1).X[0]
    dense, m1 = hessian_spectral_norm(p, cfg, x, "dense")
    power, m2 = hessian_spectral_norm(p, cfg, x, "power", iters=2000, tol=1e-10)
    assert (m1, m2) == ("dense_oracle", "power_iteration")
    assert power == pytest.approx(dense, rel=1e-3)


def test_out_of_ball_is_flagged():
    cfg = NetworkConfig(2, 3, 6)
    ds = synthetic(2, 3, 0)
    p0 = init(cfg)
    ctx = BoundContext.build(cfg, ds.y, rho=0.1, rho1=0.1)
    far = perturb_in_ball(p0, 5.0, 5.0, seed=1)
    rep = verify_hessian_bound(far, cfg, ctx, ds.X, theta0=p0)
    assert rep.flags and "outside" in rep.flags[0]


def test_perturbations_stay_in_ball():
    cfg = NetworkConfig(3, 4, 16)
    p0 = init(cfg)
    for s in range(5):
        p = perturb_in_ball(p0, 1.0, 0.5, seed=s)
        assert all(spectral_norm(W - W0) <= 1.0 for W, W0 in zip(p.weights, p0.weights))
        assert np.linalg.norm(p.v - p0.v) <= 0.5


@pytest.mark.parametrize("act", ["tanh", "sigmoid"])
@pytest.mark.parametrize("L", [1, 2, 3])
def test_appendix_suite_small_nets(act, L):
    import warnings

    cfg = NetworkConfig(L, 4, 6, activation=act)
    ds = synthetic(3, 4, L)
    p0 = init(cfg, L)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ctx = BoundContext.build(cfg, ds.y)
    for p in (p0, perturb_in_ball(p0, 1.0, 1.0, seed=L)):
        reps = verify_appendix_A(p, cfg, ctx, ds.X, params0=p0, y=ds.y)
        bad = [r for r in reps if not r.satisfied and not r.probabilistic]
        assert not bad, bad
        assert any(r.quantity.startswith("tensor221") for r in reps) == (L >= 2)


def test_zero_net_layer_jacobian():
    cfg = NetworkConfig(2, 3, 4)
    ds = synthetic(2, 3, 0)
    reps = verify_appendix_A(zeros(cfg), cfg, BoundContext.build(cfg, ds.y), ds.X, tensors=False)
    r = next(r for r in reps if r.quantity == "dalpha_dalpha_l2")
    assert r.empirical == 0.0 and r.satisfied


def test_tensor_bounds_tiny_net():
    cfg = NetworkConfig(3, 4, 6)
    ds = synthetic(2, 4, 5)
    p0 = init(cfg)
    ctx = BoundContext.build(cfg, ds.y)
    reps = verify_tensor_bounds(perturb_in_ball(p0, 1.0, 1.0, seed=4), cfg, ctx, ds.X)
    assert len(reps) == 6 and all(r.satisfied for r in reps)


def test_loglog_slope():
    ms = [64, 128, 256, 512]
    assert loglog_slope(ms, [3.0 / math.sqrt(m) for m in ms]) == pytest.approx(-0.5, abs=1e-12)
