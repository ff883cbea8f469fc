import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from mellin_deconv import (
    Beta1b,
    Gamma,
    LogNormal,
    NoNoise,
    ProductModel,
    SampleMatrix,
    ScaledBeta,
    ScaledLogGamma,
    Uniform01,
    Weibull,
    contaminate,
    decay_profile,
    density,
    mellin_closed_form,
    parse_model,
    sample,
)
from mellin_deconv.harness import transforms_report

CATALOG = [
    ("beta(b=1)", 1.0),
    ("beta(b=3)", 0.5),
    ("uniform()", 1.0),
    ("pareto()", 0.5),
    ("slgamma(mu=0.3,a=2,lambda=1.5)", 1.0),
    ("loggamma(a=0.5,lambda=1)", 0.5),
    ("gamma(shape=4,scale=2)", 1.0),
    ("gamma(shape=4,scale=2)", 0.0),
    ("weibull(m=2)", 0.5),
    ("lognormal(mu=0,lambda=1)", 1.0),
    ("lognormal(mu=0.5,lambda=0.7)", 0.3),
    ("scaledbeta(p=4,q=5,scale=2)", 1.0),
]
T_POINTS = [-5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0]


def test_density_examples():
    assert density(Beta1b(2), 0.5) == pytest.approx(1.0)
    assert density(Gamma(4, 2), 2.0) == pytest.approx(8 * math.exp(-1) / 96)
    assert density(Uniform01(), 1.5) == 0.0


def test_product_density_multiplies_axes():
    model = ProductModel([Gamma(4, 2), Weibull(2)])
    x = np.array([[2.0, 0.5], [5.0, 1.0]])
    expected = Gamma(4, 2).pdf(x[:, 0]) * Weibull(2).pdf(x[:, 1])
    np.testing.assert_allclose(density(model, x), expected, rtol=1e-14)


@pytest.mark.parametrize("spec, c", CATALOG)
def test_closed_form_matches_quadrature(spec, c):
    rows = transforms_report(spec, c, T_POINTS)
    assert max(r[3] for r in rows) < 1e-6


def test_closed_form_examples():
    assert mellin_closed_form(Uniform01(), 1.0, 0.0) == pytest.approx(1.0)
    pareto = ScaledLogGamma(0, 1, 1)
    assert mellin_closed_form(pareto, 0.5, 1.0) == pytest.approx(1 / (1.5 - 1j))
    assert mellin_closed_form(LogNormal(0, 1), 1.0, 2.0) == pytest.approx(math.exp(-2))


def test_closed_form_against_gamma_function_oracle():
    # shape d, scale 1: Γ(c + d - 1 + it) / Γ(d)
    val = mellin_closed_form(Gamma(3.5, 1.0), 1.2, 0.7)
    assert val == pytest.approx(special.gamma(3.7 + 0.7j) / special.gamma(3.5), rel=1e-12)
    # Weibull: Γ(1 + s/m) with s = c - 1 + it
    s = 0.4 - 1 + 2j
    assert mellin_closed_form(Weibull(1.5), 0.4, 2.0) == pytest.approx(special.gamma(1 + s / 1.5), rel=1e-12)


@pytest.mark.parametrize(
    "model, c",
    [(Beta1b(2), 0.0), (ScaledLogGamma(0, 1, 1), 2.0), (Gamma(4, 2), -3.0), (Weibull(2), -1.0)],
)
def test_closed_form_domain_errors(model, c):
    with pytest.raises(ValueError, match="requires"):
        mellin_closed_form(model, c, 0.0)


@pytest.mark.parametrize("spec, c", CATALOG)
def test_normalization_and_conjugate_symmetry(spec, c):
    model = parse_model(spec)
    assert mellin_closed_form(model, 1.0, 0.0) == pytest.approx(1.0, abs=1e-14)
    t = np.linspace(-30, 30, 61)
    vals = model.mellin(c, t)
    np.testing.assert_allclose(vals[::-1], np.conj(vals), atol=1e-14)


@given(st.floats(min_value=-50, max_value=50), st.integers(min_value=1, max_value=4))
def test_beta_sandwich_bound(t, b):
    # |M_c[g](t)| (1 + t²)^(b/2) stays within constants that depend on b and c only
    ratio = abs(Beta1b(b).mellin(1.0, t)) * (1 + t * t) ** (b / 2)
    # at c = 1 each factor j sqrt(1+t²)/sqrt(j²+t²) lies in [1, j]
    assert 1.0 - 1e-12 <= ratio <= math.factorial(b) * (1.0 + 1e-12)


def test_decay_profiles():
    assert decay_profile(Uniform01()).gamma == (1.0,)
    assert decay_profile(Beta1b(2)).gamma == (2.0,)
    assert decay_profile(ScaledLogGamma(0, 0.5, 1)).gamma == (0.5,)
    assert decay_profile(NoNoise()).gamma == (0.0,)
    prof = decay_profile(LogNormal(0, 1))
    assert not prof.smooth
    with pytest.raises(ValueError, match="super smooth"):
        prof.gamma
    for model in (Gamma(4, 2), Weibull(2)):
        assert not decay_profile(model).smooth


def test_sample_is_deterministic_and_stream_separated():
    a = sample(Gamma(4, 2), 1000, 7, 3, 0)
    b = sample(Gamma(4, 2), 1000, 7, 3, 0)
    c = sample(Gamma(4, 2), 1000, 7, 3, 1)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert isinstance(a, SampleMatrix) and a.shape == (1000, 1)


def test_sample_moments():
    u = sample(Uniform01(), 100_000, 1)
    assert abs(u.mean() - 0.5) < 0.01
    g = sample(Gamma(4, 2), 100_000, 2)
    assert abs(g.mean() - 8.0) < 0.12


@pytest.mark.parametrize(
    "model",
    [
        Beta1b(1),
        Beta1b(3),
        ScaledLogGamma(0, 1, 1),
        ScaledLogGamma(0.2, 0.5, 1.0),
        ScaledLogGamma(0, 2.5, 2.0),
        Gamma(4, 2),
        Gamma(0.7, 1.0),
        Weibull(2),
        LogNormal(0, 1),
        ScaledBeta(4, 5, 2),
    ],
    ids=lambda m: m.spec(),
)
def test_sampler_kolmogorov_smirnov(model):
    n = 100_000
    draws = sample(model, n, 99)[:, 0]
    stat = stats.kstest(draws, lambda x: model.cdf(x)).statistic
    assert stat < 1.63 / math.sqrt(n)


@pytest.mark.parametrize("spec", [s for s, _ in CATALOG if not s.startswith("uniform")])
def test_cdf_matches_integrated_density(spec):
    model = parse_model(spec)
    lo = model.support[0]
    x = float(model.ppf(0.6))
    mass = integrate.quad(model.pdf, lo, x, limit=200)[0]
    assert mass == pytest.approx(0.6, abs=1e-7)


def test_scaled_beta_renormalized_constant():
    # (1/560)(x/2)^3 (1 - x/2)^4 integrates to 1/78400; the unit-mass constant is 140
    printed = lambda x: (0.5 * x) ** 3 * (1 - 0.5 * x) ** 4 / 560
    assert integrate.quad(printed, 0, 2)[0] == pytest.approx(1 / 78400, rel=1e-12)
    x = np.linspace(0.1, 1.9, 7)
    np.testing.assert_allclose(ScaledBeta(4, 5, 2).pdf(x), 140 * 560 * printed(x), rtol=1e-12)


def test_contaminate():
    x = SampleMatrix([[2.0, 3.0]])
    u = SampleMatrix([[0.5, 1.0]])
    np.testing.assert_array_equal(contaminate(x, u), [[1.0, 3.0]])
    np.testing.assert_array_equal(contaminate(x, np.ones((1, 2))), x)
    with pytest.raises(ValueError, match="shape"):
        contaminate(x, SampleMatrix([[1.0]]))
    y = contaminate(sample(Uniform01(), 100_000, 3, 0), sample(Uniform01(), 100_000, 3, 1))
    assert abs(y.mean() - 0.25) < 0.01


def test_sample_matrix_rejects_nonpositive():
    with pytest.raises(ValueError):
        SampleMatrix([[1.0], [0.0]])


def test_no_noise():
    g = NoNoise()
    np.testing.assert_array_equal(g.mellin(0.3, np.array([0.0, 5.0])), [1.0, 1.0])
    np.testing.assert_array_equal(sample(g, 5, 1), np.ones((5, 1)))


@pytest.mark.parametrize(
    "spec, expected",
    [
        ("gamma(shape=4,scale=2)", Gamma(4, 2)),
        ("beta(b=2)", Beta1b(2)),
        ("lognormal(mu=0,lambda=1)", LogNormal(0, 1)),
        ("pareto()", ScaledLogGamma(0, 1, 1)),
        ("uniform()", Uniform01()),
        ("loggamma(a=0.5,lambda=1)", ScaledLogGamma(0, 0.5, 1)),
        ("none()", NoNoise()),
    ],
)
def test_parse_model(spec, expected):
    model = parse_model(spec)
    assert type(model) is type(expected)
    assert model.params() == expected.params()
    assert parse_model(model.spec()).params() == model.params()


@pytest.mark.parametrize("spec", ["gamma", "gamma(shape=a)", "beta(b=1.5)", "foo()", "gamma(rate=2)"])
def test_parse_model_errors(spec):
    with pytest.raises(ValueError):
        parse_model(spec)


def test_moments_from_closed_form():
    # E[X^p] of Gamma(shape, scale) is scale^p Γ(shape + p) / Γ(shape)
    assert Gamma(4, 2).moment(-1.0) == pytest.approx(2**-1 * special.gamma(3) / special.gamma(4))
    assert Uniform01().moment(1.0) == pytest.approx(0.5)
