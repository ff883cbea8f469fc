import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mellin_deconv import (
    DensityEstimate,
    FrequencyFunction,
    Gamma,
    MellinContext,
    NoNoise,
    QuadratureConfig,
    SampleMatrix,
    Uniform01,
    contaminate,
    delta_g,
    empirical_mellin,
    estimate_at,
    estimate_on_grid,
    minimax_cutoff_schedule,
    sample,
    theoretical_risk,
)
from mellin_deconv.distributions import ProductModel, ScaledLogGamma
from mellin_deconv.estimator import sigma_moment, weighted_risk_mellin, weighted_risk_spatial

F1 = Gamma(4, 2)
G1 = Uniform01()


def f1(x):
    return x**3 * np.exp(-0.5 * x) / 96


def test_empirical_mellin_examples():
    y = SampleMatrix([1.0, 2.0, 4.0])
    assert empirical_mellin(y, MellinContext(1.0), 0.0) == 1.0
    assert empirical_mellin(y, MellinContext(2.0), 0.0) == pytest.approx(7 / 3)


@given(st.floats(min_value=-100, max_value=100))
def test_empirical_mellin_modulus_bounded(t):
    y = SampleMatrix([1.0, 2.0, 4.0])
    assert abs(empirical_mellin(y, MellinContext(1.0), t)) <= 1.0 + 1e-15


def test_empirical_mellin_multivariate_product():
    y = SampleMatrix([[1.0, 2.0], [3.0, 0.5]])
    ctx = MellinContext([1.5, 0.5])
    t = np.array([0.3, -1.2])
    expected = np.mean([np.prod(row ** (ctx.c_array - 1 + 1j * t)) for row in np.asarray(y)])
    assert empirical_mellin(y, ctx, t) == pytest.approx(expected, rel=1e-13)


def test_delta_g_examples(ctx1):
    assert delta_g(G1, ctx1, 2) == pytest.approx(14 / (3 * math.pi), rel=1e-12)
    assert delta_g(NoNoise(), ctx1, 3.3) == pytest.approx(3.3 / math.pi, rel=1e-12)


@given(st.floats(min_value=0.1, max_value=20), st.floats(min_value=0.1, max_value=20))
def test_delta_g_monotone(k1, k2):
    ctx = MellinContext(1.0)
    lo, hi = sorted((k1, k2))
    assert delta_g(G1, ctx, lo) <= delta_g(G1, ctx, hi) * (1 + 1e-12)


def test_delta_g_two_dimensional_factorizes():
    ctx = MellinContext([1.0, 1.0])
    one = delta_g(G1, MellinContext(1.0), 2)
    assert delta_g(ProductModel([G1, G1]), ctx, [2, 2]) == pytest.approx(one**2, rel=1e-12)


def test_g0_violation_names_frequency(ctx1):
    with pytest.raises(ValueError, match="t="):
        delta_g(G1, ctx1, 5, QuadratureConfig(tol_zero=0.5))


def test_estimate_without_noise_recovers_gamma_density(ctx1):
    values = []
    for seed in range(50):
        y = sample(F1, 2000, seed)
        values.append(estimate_at(DensityEstimate(y, NoNoise(), ctx1, 4), 4.0))
    assert abs(np.median(values) - f1(4.0)) < 0.05


def test_exact_transform_gives_truncated_inverse(ctx1):
    # replacing the empirical transform by M_c[f_Y] yields f_k, which approaches f
    fy = lambda t: F1.mellin(1.0, t[..., 0]) * G1.mellin(1.0, t[..., 0])
    errs = []
    for k in (2, 5, 10, 20):
        est = DensityEstimate(None, G1, ctx1, k, transform=fy)
        errs.append(weighted_risk_mellin(est, F1))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-6


def test_vanishing_cutoff_gives_zero(ctx1, fixture_y):
    est = DensityEstimate(fixture_y, G1, ctx1, 1e-6)
    assert abs(est.at(3.0)) < 1e-6


def test_on_grid_matches_pointwise(ctx1, fixture_y):
    est = DensityEstimate(fixture_y, G1, ctx1, 4)
    x = np.linspace(0.1, 25, 100)
    grid = estimate_on_grid(est, x)
    pointwise = [estimate_at(est, xi) for xi in x]
    assert grid == pointwise
    assert estimate_on_grid(est, []) == []
    assert estimate_on_grid(est, [3.0]) == [estimate_at(est, 3.0)]


def test_on_grid_matches_pointwise_in_two_dimensions(fixture_y):
    ctx = MellinContext([1.0, 1.0])
    y = np.column_stack([np.asarray(fixture_y)[:, 0], np.asarray(fixture_y)[::-1, 0]])
    est = DensityEstimate(y, ProductModel([G1, G1]), ctx, [3, 2])
    pts = np.array([[1.0, 2.0], [5.0, 7.0], [0.5, 10.0]])
    grid = est.on_grid(pts)
    assert grid.tolist() == [est.at(p) for p in pts]
    mesh = est.on_mesh([pts[:, 0], pts[:, 1]])
    np.testing.assert_allclose(np.diag(mesh), grid, rtol=1e-10, atol=1e-14)


def test_estimate_is_real_and_cache_read_only(ctx1, fixture_y):
    est = DensityEstimate(fixture_y, G1, ctx1, 4)
    assert est.imaginary_residue([[1.0], [4.0], [9.0]]) < 1e-13
    with pytest.raises(ValueError):
        est._coef[0] = 0.0


def test_estimate_rejects_nonpositive_points(ctx1, fixture_y):
    est = DensityEstimate(fixture_y, G1, ctx1, 4)
    with pytest.raises(ValueError):
        est.at(0.0)


def test_theoretical_risk_example(ctx1):
    risk = theoretical_risk(F1, G1, ctx1, 4, 1000)
    assert risk.sigma == 1.0
    # (2π)^-1 (2k + 2k³/3) / n at k = 4
    assert risk.variance_bound == pytest.approx((4 + 64 / 3) / math.pi / 1000, rel=1e-12)
    assert risk.total == risk.bias_sq + risk.variance_bound


def test_theoretical_bias_monotone_and_exhausted(ctx1):
    biases = [theoretical_risk(F1, G1, ctx1, k, 1000).bias_sq for k in (1, 2, 4, 8, 16, 64)]
    assert all(a >= b for a, b in zip(biases, biases[1:]))
    assert theoretical_risk(F1, G1, ctx1, 200, 1000).bias_sq < 1e-12


def test_theoretical_bias_two_dimensional_monotone():
    ctx = MellinContext([1.0, 1.0])
    f = ProductModel([F1, Gamma(2, 1)])
    g = ProductModel([G1, G1])
    b = lambda k: theoretical_risk(f, g, ctx, k, 500).bias_sq
    assert b([1, 1]) >= b([2, 1]) >= b([2, 3]) >= b([5, 5]) >= 0


def test_sigma_moment_closed_form():
    ctx = MellinContext(0.5)
    # E[X^-1] E[U^-1] with X ~ Gamma(4, 2), U ~ Pareto: (1/6) (1/2)
    assert sigma_moment(F1, ScaledLogGamma(0, 1, 1), ctx) == pytest.approx(1 / 12)
    with pytest.raises(ValueError, match="different c"):
        sigma_moment(F1, G1, MellinContext(0.25))


def test_minimax_schedule():
    assert minimax_cutoff_schedule(1, 1, 1024).k[0] == pytest.approx(4.0, rel=1e-12)
    k = minimax_cutoff_schedule([1, 1], [1, 1], 2**16)
    np.testing.assert_allclose(k.k, [4.0, 4.0])


@given(
    st.lists(st.floats(min_value=0.2, max_value=5), min_size=1, max_size=4),
    st.floats(min_value=0.0, max_value=3),
    st.integers(min_value=10, max_value=10**6),
)
def test_minimax_schedule_balances_bias_terms(s, gamma, n):
    # every axis contributes k_i^(-2 s_i) = n^(-2 / (2 + sum_j (2 γ_j + 1) / s_j))
    s = np.array(s)
    g = np.full_like(s, gamma)
    k = np.array(minimax_cutoff_schedule(s, g, n).k)
    target = 1.0 / (2.0 + np.sum((2 * g + 1) / s))
    np.testing.assert_allclose(np.log(k) * s / math.log(n), target, rtol=1e-10)


def test_minimax_schedule_not_scale_invariant():
    s = np.array([1.0, 2.5])
    g = np.array([0.5, 2.0])
    a = minimax_cutoff_schedule(s, g, 5000).k
    b = minimax_cutoff_schedule(2 * s, g, 5000).k
    assert not np.allclose(a, b)


def test_spatial_and_mellin_risks_agree(ctx1, fixture_y):
    est = DensityEstimate(fixture_y, G1, ctx1, 4)
    assert weighted_risk_spatial(est, F1) == pytest.approx(weighted_risk_mellin(est, F1), rel=0.03)


def test_empirical_mellin_unbiased():
    ctx = MellinContext(1.0)
    t = np.array([0.0, 1.0, 3.0])
    draws = []
    for seed in range(200):
        y = contaminate(sample(F1, 500, seed, 0), sample(G1, 500, seed, 1))
        draws.append(empirical_mellin(y, ctx, t[:, None]))
    draws = np.array(draws)
    truth = F1.mellin(1.0, t) * G1.mellin(1.0, t)
    se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
    dev = np.abs(draws.mean(axis=0) - truth)
    assert np.all(dev <= 4 * np.maximum(se, 1e-15))


def test_risk_decreases_along_consistent_schedule():
    ctx = MellinContext(1.0)
    medians = []
    for n in (250, 1000, 4000):
        k = n**0.2
        risks = []
        for r in range(20):
            y = contaminate(sample(F1, n, 77, r, 0), sample(G1, n, 77, r, 1))
            risks.append(weighted_risk_mellin(DensityEstimate(y, G1, ctx, k), F1))
        medians.append(np.median(risks))
    assert medians[0] > medians[1] > medians[2]
