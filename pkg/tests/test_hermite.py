import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rscnet import hermite as Hm
from rscnet.activation import get

from .oracles import hermegauss_probability, normalized_physicist, normalized_probabilist

# mu_r of tanh under N(0, 1) from scipy.integrate.quad against numpy's HermiteE series
TANH_MU_QUAD = {1: 0.6057055096021589, 3: -0.14843719078727272, 5: 0.06254752375270359,
                7: -0.03144541928767863, 9: 0.017419931422436155, 11: -0.010291840580021534}
TANH_C1_QUAD = 0.39429449039784115
TANH_C_HALF_QUAD = 0.17351614343237184


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 15), st.floats(-6, 6))
def test_tables_match_numpy_series(r, x):
    assert Hm.probabilist_table(r, x)[r] == pytest.approx(normalized_probabilist(r, x), rel=1e-10, abs=1e-10)
    ref = normalized_physicist(r, x)
    assert Hm.physicist_table(r, x)[r] == pytest.approx(ref, rel=1e-10, abs=1e-10 * max(1, 2.0**r))


def test_point_values():
    assert Hm.hermite_eval(Hm.HermiteBasis(), 2, 1.0) == pytest.approx(0.0, abs=1e-15)
    for conv in Hm.CONVENTIONS:
        assert Hm.hermite_eval(Hm.HermiteBasis("generalized", 4.0, conv), 2, 2.0) == pytest.approx(0, abs=1e-15)
    for fam, a in [("probabilist", 1.0), ("physicist", 1.0), ("generalized", 3.0)]:
        np.testing.assert_array_equal(Hm.hermite_eval(Hm.HermiteBasis(fam, a), 0, np.linspace(-2, 2, 5)), 1.0)
    with pytest.raises(ValueError):
        Hm.HermiteBasis("generalized", 0.0)
    with pytest.raises(ValueError):
        Hm.HermiteBasis("probabilist", 2.0)


def test_gauss_hermite_matches_numpy():
    for n in (5, 40, 120):
        x, w = Hm.gauss_hermite(n)
        xr, wr = hermegauss_probability(n)
        np.testing.assert_allclose(x, xr, atol=1e-10)
        np.testing.assert_allclose(w, wr, atol=1e-13)


@pytest.mark.parametrize("a", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_orthonormality(a):
    G = Hm.orthonormality_matrix(a, 10)
    np.testing.assert_allclose(G, np.eye(11), atol=1e-8)
    P = Hm.orthonormality_matrix(a, 4, convention="paper")
    np.testing.assert_allclose(np.diag(P), [a**r for r in range(5)], rtol=1e-10)


def test_physicist_integral_and_rodrigues_identity():
    x, w = Hm.gauss_hermite(120)
    # int Ht_r^2 e^{-x^2} dx = sqrt(pi) 2^r, via x = z / sqrt(2), z ~ N(0, 1)
    T = Hm.physicist_table(8, x / math.sqrt(2))
    np.testing.assert_allclose((T**2) @ w * math.sqrt(math.pi), math.sqrt(math.pi) * 2.0 ** np.arange(9), rtol=1e-10)
    xs = np.linspace(-3, 3, 41)
    np.testing.assert_allclose(Hm.physicist_table(8, xs),
                               Hm.HermiteBasis("generalized", 0.5, "rodrigues").table(8, xs), rtol=1e-10, atol=1e-9)
    assert not np.allclose(Hm.physicist_table(3, xs), Hm.HermiteBasis("generalized", 0.5, "paper").table(3, xs))


def test_coefficients_of_polynomials():
    mu = Hm.hermite_coeffs("identity", 1.0, 10).coeffs
    np.testing.assert_allclose(mu, np.eye(11)[1], atol=1e-12)
    mu2 = Hm.hermite_coeffs(lambda z: z * z, 1.0, 10).coeffs
    np.testing.assert_allclose(mu2, [1, 0, math.sqrt(2)] + [0] * 8, atol=1e-10)


def test_tanh_coefficients_against_quadrature_oracle():
    hc = Hm.hermite_coeffs("tanh", 1.0, 12)
    for r, val in TANH_MU_QUAD.items():
        assert hc.coeffs[r] == pytest.approx(val, abs=1e-11)
    np.testing.assert_allclose(hc.coeffs[0::2], 0, atol=1e-12)
    cum = hc.cumulative_energy
    assert np.all(np.diff(cum) >= 0) and cum[-1] <= hc.energy
    assert hc.energy == pytest.approx(TANH_C1_QUAD, abs=1e-12)
    np.testing.assert_allclose(hc.in_convention("paper"), hc.coeffs)
    h2 = Hm.hermite_coeffs("tanh", 2.0, 6)
    np.testing.assert_allclose(h2.in_convention("rodrigues") * 2.0 ** (np.arange(7) / 2), h2.coeffs, rtol=1e-12)


def test_coefficient_errors():
    with pytest.raises(ValueError):
        Hm.hermite_coeffs("tanh", 1.0, 12, nodes=20)
    with pytest.raises(Hm.OrderLimitError):
        Hm.hermite_coeffs(lambda z: np.abs(z) ** 0.5, 1.0, 20, nodes=60)


def test_c_phi_sigma0():
    assert Hm.c_phi_sigma0("identity", 1.0) == pytest.approx(1.0, abs=1e-13)
    assert Hm.c_phi_sigma0("identity", 2.0) == pytest.approx(4.0, abs=1e-12)
    assert Hm.c_phi_sigma0("tanh", 1.0) == pytest.approx(TANH_C1_QUAD, abs=1e-12)
    assert Hm.c_phi_sigma0("tanh", 0.5) == pytest.approx(TANH_C_HALF_QUAD, abs=1e-12)
    z = np.random.default_rng(0).standard_normal(10**7)
    t2 = np.tanh(z) ** 2
    assert abs(t2.mean() - Hm.c_phi_sigma0("tanh", 1.0)) < 4 * t2.std() / math.sqrt(z.size)
    with pytest.raises(ValueError):
        Hm.c_phi_sigma0("tanh", 0.0)


def test_product_expectation_examples():
    u = np.array([0.6, 0.8])
    w = np.array([1.0, 0.0])
    assert Hm.hermite_product_expectation(0, 0, 1.0, 1.3, 0.7, u, w, samples=10**4) == (1.0, 0.0)
    m, se = Hm.hermite_product_expectation(1, 1, 1.0, 1.0, 1.0, u, u)
    assert abs(m - 1) < 4 * se
    m, se = Hm.hermite_product_expectation(1, 2, 1.0, 1.0, 1.0, u, w)
    assert abs(m) < 4 * se
    with pytest.raises(ValueError):
        Hm.hermite_product_expectation(1, 1, 1.0, 1.0, 1.0, 2 * u, u)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_product_expectation_orthonormal_convention(sigma):
    u = np.array([0.6, 0.8, 0.0])
    w = np.array([0.0, 0.96, 0.28])
    for r in range(4):
        for r2 in range(4):
            m, se = Hm.hermite_product_expectation(r, r2, 0.9, 1.2, sigma, u, w, seed=r * 4 + r2)
            target = float(u @ w) ** r if r == r2 else 0.0
            assert abs(m - target) <= 4 * se + 1e-12, (r, r2, m, target, se)


def test_claimed_product_factor_differs_from_paper_convention_value():
    u = np.array([0.6, 0.8])
    claimed = Hm.product_expectation_claimed(2, 2, 0.9, 1.2, 2.0, u, u)
    exact = Hm.product_expectation_exact(2, 2, 0.9, 1.2, 2.0, u, u, convention="paper")
    m, se = Hm.hermite_product_expectation(2, 2, 0.9, 1.2, 2.0, u, u, convention="paper")
    assert abs(m - exact) < 4 * se
    assert abs(claimed - exact) > 100 * se


def test_c0_constants():
    with pytest.warns(Hm.DegenerateOrderWarning):
        k = Hm.ntk_lower_bound_constants("identity", math.sqrt(2.0), 2, R=4)
    np.testing.assert_array_equal(k.c0_lr[0], 1.0)
    assert k.c0_lr[1, 1] == pytest.approx(1.0 / 12.0, rel=1e-12)
    t = Hm.ntk_lower_bound_constants("tanh", 0.43, 3)
    np.testing.assert_allclose(t.c0_lr[2], t.c0_lr[1] ** 2, rtol=1e-12)
    assert t.best_r_orthonormal == 3 and 1 not in t.degenerate_orders
    assert all(r % 2 == 0 for r in t.degenerate_orders)
    assert t.c0 < t.c0_orthonormal


def test_lambda1_examples(rng):
    x = rng.standard_normal((1, 6))
    x *= math.sqrt(6) / np.linalg.norm(x)
    est = Hm.lambda1_estimate(x, 0.8, "tanh", samples=20000, seed=1)
    assert abs(est.value - Hm.c_phi_sigma0("tanh", 0.8)) < 5 * est.stderr + 1e-3
    X = rng.standard_normal((3, 5))
    X *= (math.sqrt(5) / np.linalg.norm(X, axis=1))[:, None]
    dup = np.vstack([X, X[:1]])
    assert abs(Hm.lambda1_estimate(dup, 0.5, "tanh").value) < 1e-10
    ident = Hm.lambda1_estimate(X, 0.7, "identity", samples=200000, seed=3)
    exact = np.linalg.eigvalsh(0.49 * X @ X.T / 5)[0]
    assert ident.value == pytest.approx(exact, rel=0.05)
    with pytest.raises(ValueError):
        Hm.lambda1_estimate(2 * X, 0.5, "tanh")


def test_h_C_and_layer_tolerance():
    h = Hm.h_C_seq(0.5, 3)
    np.testing.assert_allclose(h, [0, 1, 1.25, 1.3125])
    assert Hm.layer_norm_tolerance(0.5, 3, 3) == 0.5
    assert Hm.layer_norm_tolerance(0.5, 1, 3) == pytest.approx(1 / (2 * 1.3125))


def test_coefficient_table_rows():
    rows = Hm.coefficient_table("tanh", 1.0, 3)
    assert [r for r, _, _ in rows] == [0, 1, 2, 3]
    assert rows[3][2] == pytest.approx(TANH_MU_QUAD[1] ** 2 + TANH_MU_QUAD[3] ** 2, rel=1e-10)
