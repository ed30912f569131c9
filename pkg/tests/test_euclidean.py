import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DegenerateDesign, OutsideDomain
from euclidean import (
    fit_euclidean,
    jacobian_psi,
    lambda_param_family,
    map_gamma_to_params,
    sandwich_covariance,
    sigma_star_diagnostic,
)
from model_core import Dataset
from moments import GammaEstimate, LambdaEstimate, accumulate_moments, fit_gamma, grad_phi_gamma


def _gamma(values) -> GammaEstimate:
    return GammaEstimate(gamma=np.asarray(values, dtype=float), gamma_matrix=2 * np.eye(8), theta=np.zeros(8))


def _lambda(values) -> LambdaEstimate:
    return LambdaEstimate(lam=np.asarray(values, dtype=float), lambda_matrix=2 * np.eye(5), upsilon=np.zeros(5))


def _params(gamma) -> np.ndarray:
    return np.array(map_gamma_to_params(_gamma(gamma)).as_tuple())


def _random_gammas(count: int, seed: int = 5):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        g = np.empty(8)
        g[:4] = rng.uniform(0.5, 2.0, 4) * rng.choice([-1, 1], 4)
        g[4] = rng.normal()
        g[5] = g[4] ** 2 + rng.uniform(0.5, 2.0)
        g[6] = rng.normal(scale=2.0)
        g[7] = g[5] ** 2 + rng.uniform(0.5, 2.0)
        v = g[7] - g[5] ** 2
        d = g[1] + 2 * g[0] * (g[6] - g[4] * g[5]) / v
        if abs(d) > 0.2:
            out.append(g)
    return out


def test_d0_parameters(d0):
    fit = fit_euclidean(d0)
    assert_allclose(fit.params.as_tuple(), (2.0, 1.0, 1.0), rtol=1e-10)
    assert fit.pi_valid


def test_zero_intercept_mapping():
    params = map_gamma_to_params(_gamma([0, 2, 0, 3, 0.5, 1.5, 2.0, 4.5]))
    assert_allclose(params.as_tuple(), (0.0, 1.5, 4 / 3))


def test_pi_above_one_is_flagged_not_raised():
    params = map_gamma_to_params(_gamma([0, 1.07, 0, 1.07, 0.0, 1.0, 0.0, 3.0]))
    assert_allclose(params.pi, 1.07)
    assert not params.pi_valid


def test_no_spread_in_x_squared():
    with pytest.raises(DegenerateDesign):
        map_gamma_to_params(_gamma([1, 1, 1, 1, 1.0, 2.0, 1.0, 4.0]))


def test_vanishing_denominator_is_outside_domain():
    with pytest.raises(OutsideDomain):
        map_gamma_to_params(_gamma([0, 0, 1, 1, 0.5, 1.5, 2.0, 4.5]))


def test_jacobian_entry_on_d0(d0):
    g = fit_gamma(accumulate_moments(d0))
    psi = jacobian_psi(g.gamma)
    assert psi.shape == (3, 8)
    assert_allclose(psi[1, 3], 9 / 29, rtol=1e-10)


def test_jacobian_matches_finite_differences():
    for gamma in _random_gammas(100):
        psi = jacobian_psi(gamma)
        numeric = np.empty((3, 8))
        for k in range(8):
            step = 1e-6 * (1 + abs(gamma[k]))
            up, down = gamma.copy(), gamma.copy()
            up[k] += step
            down[k] -= step
            numeric[:, k] = (_params(up) - _params(down)) / (2 * step)
        scale = max(1.0, np.abs(psi).max())
        assert_allclose(numeric, psi, rtol=1e-6, atol=1e-6 * scale)


def test_alpha_ignores_fourth_moment_without_intercept():
    psi = jacobian_psi(np.array([0, 2, 0, 3, 0.5, 1.5, 2.0, 4.5]))
    assert psi[0, 7] == 0


def _brute_force_sigma(data: Dataset, g: GammaEstimate, psi: np.ndarray) -> np.ndarray:
    meat = np.zeros((8, 8))
    for obs in data:
        phi = grad_phi_gamma(g.gamma, obs)
        meat += np.outer(phi, phi)
    meat /= data.n
    inv = np.linalg.inv(g.gamma_matrix)
    return psi @ inv @ meat @ inv @ psi.T


def test_sandwich_matches_brute_force(d0):
    g = fit_gamma(accumulate_moments(d0))
    psi = jacobian_psi(g.gamma)
    sigma, _ = sandwich_covariance(d0, g, psi)
    assert_allclose(sigma, _brute_force_sigma(d0, g, psi), rtol=1e-10, atol=1e-12)


def test_sandwich_on_random_sample_is_psd(won_sample):
    fit = fit_euclidean(won_sample)
    assert_allclose(fit.sigma, fit.sigma.T)
    assert np.all(np.linalg.eigvalsh(fit.sigma) >= -1e-10 * np.abs(fit.sigma).max())
    assert np.all(fit.std_errors > 0)


def test_duplicating_sample_halves_variance(won_sample):
    once = fit_euclidean(won_sample)
    twice = fit_euclidean(Dataset(np.tile(won_sample.x, 2), np.tile(won_sample.y, 2)))
    assert_allclose(twice.params.as_tuple(), once.params.as_tuple(), rtol=1e-9)
    assert_allclose(twice.sigma, once.sigma, rtol=1e-8)
    assert_allclose(twice.std_errors, once.std_errors / np.sqrt(2), rtol=1e-8)


def test_scaling_response_scales_line(won_sample):
    once = fit_euclidean(won_sample)
    scaled = fit_euclidean(Dataset(won_sample.x, 3.0 * won_sample.y))
    a, b, p = once.params.as_tuple()
    assert_allclose(scaled.params.as_tuple(), (3 * a, 3 * b, p), rtol=1e-9)


def test_lambda_family_example():
    family = lambda_param_family(_lambda([1.0, 0.5, 0.0, 2.0, 0.5]))
    assert_allclose(family.alpha_variants, (2.0, 2.0, 2.0))
    assert_allclose(family.beta_variants, (1.0, 1.0, 1.0))
    assert_allclose(family.pi_variants, (0.5, 0.5, 0.5))


def test_lambda_family_without_slope():
    family = lambda_param_family(_lambda([1.0, 0.0, 0.0, 2.0, 0.5]))
    assert family.alpha_variants[:2] == (None, None)
    assert family.beta_variants[0] is None
    assert family.pi_variants[0] is None
    assert_allclose(family.alpha_variants[2], 2.0)
    assert_allclose(family.beta_variants[1:], (1.0, 0.0))
    assert_allclose(family.pi_variants[1:], (0.0, 0.5))


def test_lambda_family_without_linear_square_term():
    family = lambda_param_family(_lambda([1.0, 0.5, 0.0, 0.0, 0.5]))
    assert family.alpha_variants[1] == 0.0
    assert family.alpha_variants[2] is None
    assert family.pi_variants[1:] == (None, None)


def test_lambda_family_combinations():
    family = lambda_param_family(_lambda([1.0, 0.5, 0.0, 2.0, 0.5]))
    combos = dict(family.combinations())
    assert len(combos) == 27
    assert combos[(1, 2, 3)].as_tuple() == pytest.approx((2.0, 1.0, 0.5))
    assert set(family.as_dict()) == {f"{p}{i}" for p in ("alpha", "beta", "pi") for i in (1, 2, 3)}


def _two_point_mixture(alpha, beta, sigma, s):
    """
    Equal-weight π = 1/2 mixture whose conditional moments in x are exactly polynomial:
    each x carries Y = ±s from the known part and α + βx ± σ from the unknown part.
    """
    rows = []
    for x in (-1.0, 0.0, 1.0, 2.0):
        line = alpha + beta * x
        rows += [(x, -s), (x, s), (x, line - sigma), (x, line + sigma)]
    return Dataset.from_observations(rows)


def test_sigma_star_recovers_known_variance():
    data = _two_point_mixture(1.0, 2.0, 0.5, 1.5)
    estimate = sigma_star_diagnostic(accumulate_moments(data))
    assert estimate.value == pytest.approx(1.5**2, rel=1e-8)


def test_sigma_star_undefined_for_single_component():
    data = Dataset(np.arange(-2.0, 3.0), 2.0 + np.arange(-2.0, 3.0))
    estimate = sigma_star_diagnostic(accumulate_moments(data))
    assert estimate.value is None
    assert estimate.reason
