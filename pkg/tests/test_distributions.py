import numpy as np
import pytest
from numpy.testing import assert_allclose

from distributions import Normal, ShiftedExponential, ShiftedGamma, TabulatedCdf, parse_known_spec
from errors import ConfigurationError

LAWS = [Normal(1.0), Normal(2.0), ShiftedGamma(2.0, 0.5, 1.0), ShiftedGamma(2.0, 0.5, 4.0), ShiftedExponential(4.0)]


@pytest.mark.parametrize("law,target", [(Normal(2.0), 4.0), (ShiftedGamma(2.0, 0.5, 4.0), 4.0), (ShiftedExponential(1.0), 1.0)])
def test_variance_matches_target(law, target):
    assert abs(law.variance - target) < 1e-12


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.describe())
def test_sample_moments(law):
    rng = np.random.default_rng(7)
    draws = law.sample(rng, 1_000_000)
    sigma = np.sqrt(law.variance)
    assert abs(draws.mean()) < 5 * sigma / 1e3
    assert abs(draws.var() / law.variance - 1) < 0.02


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.describe())
def test_pdf_is_derivative_of_cdf(law):
    t = np.linspace(law.ppf(0.001), law.ppf(0.999), 1000)
    step = 1e-5
    numeric = (law.cdf(t + step) - law.cdf(t - step)) / (2 * step)
    assert_allclose(numeric, law.pdf(t), atol=1e-4)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.describe())
def test_ppf_inverts_cdf(law):
    p = np.array([0.01, 0.1, 0.5, 0.9, 0.99])
    assert_allclose(law.cdf(law.ppf(p)), p, atol=1e-9)


def test_gamma_support_starts_at_minus_mean():
    law = ShiftedGamma(2.0, 0.5, 1.0)
    lower = -law.scale_factor * 4.0
    assert law.cdf(lower - 1e-9) == 0.0
    assert law.pdf(lower - 1.0) == 0.0


def test_exponential_cdf_left_of_support():
    law = ShiftedExponential(4.0)
    assert law.cdf(-2.5) == 0.0
    assert law.cdf(-2.0) == 0.0
    assert law.pdf(-3.0) == 0.0


@pytest.mark.parametrize(
    "spec,expected",
    [
        ("normal:0.079", Normal(0.079)),
        ("normal 1", Normal(1.0)),
        ("gamma:2:0.5:4", ShiftedGamma(2.0, 0.5, 4.0)),
        ("exp:4", ShiftedExponential(4.0)),
    ],
)
def test_parse_known_spec(spec, expected):
    assert parse_known_spec(spec) == expected


@pytest.mark.parametrize("spec", ["cauchy:1", "normal", "normal:abc", "normal:-1", "gamma:2:0.5", "table:"])
def test_parse_known_spec_rejects(spec):
    with pytest.raises(ConfigurationError):
        parse_known_spec(spec)


def test_tabulated_law_from_csv(tmp_path):
    t = np.linspace(-6, 6, 601)
    path = tmp_path / "known.csv"
    path.write_text("t,F\n" + "\n".join(f"{a:.10f},{b:.12f}" for a, b in zip(t, Normal(1.0).cdf(t))))

    law = parse_known_spec(f"table:{path}")

    assert isinstance(law, TabulatedCdf)
    assert law.cdf(-10.0) == 0.0 and law.cdf(10.0) == 1.0
    assert_allclose(law.cdf([-1.0, 0.0, 1.5]), Normal(1.0).cdf([-1.0, 0.0, 1.5]), atol=1e-4)
    assert_allclose(law.pdf([-1.0, 0.0, 1.5]), Normal(1.0).pdf([-1.0, 0.0, 1.5]), atol=1e-3)
    assert abs(law.variance - 1.0) < 1e-2


def test_tabulated_law_rejects_decreasing_values():
    with pytest.raises(ConfigurationError):
        TabulatedCdf(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.6, 0.5]))


def test_tabulated_law_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        parse_known_spec(f"table:{tmp_path / 'missing.csv'}")
