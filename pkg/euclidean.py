"""
Euclidean part of the model: (α, β, π) from γ_n, its sandwich covariance, the
λ-based alternative estimators and the σ* moment diagnostic.
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

import settings
from errors import DegenerateDesign, OutsideDomain
from model_core import Dataset, EuclideanParams
from moments import (
    GammaEstimate,
    LambdaEstimate,
    MomentSummary,
    accumulate_moments,
    cubic_response_coefficients,
    fit_gamma,
    fit_lambda,
    grad_phi_gamma_matrix,
)

logger = logging.getLogger(__name__)

PARAM_NAMES = ("alpha", "beta", "pi")


@dataclass(frozen=True, eq=False)
class EuclideanFit:
    params: EuclideanParams
    sigma: np.ndarray
    std_errors: np.ndarray
    pi_valid: bool
    jacobian: np.ndarray
    gamma: GammaEstimate
    n: int

    @property
    def eta(self) -> Tuple[float, float]:
        return (self.params.alpha, self.params.beta)


@dataclass(frozen=True)
class LambdaParamFamily:
    """The three λ-based variants of each parameter. None marks an undefined variant."""

    alpha_variants: Tuple[Optional[float], Optional[float], Optional[float]]
    beta_variants: Tuple[Optional[float], Optional[float], Optional[float]]
    pi_variants: Tuple[Optional[float], Optional[float], Optional[float]]

    def combination(self, i: int, j: int, k: int) -> Optional[EuclideanParams]:
        """(α^(i), β^(j), π^(k)) with 1-based indices, or None if any is undefined."""
        a, b, p = self.alpha_variants[i - 1], self.beta_variants[j - 1], self.pi_variants[k - 1]
        if a is None or b is None or p is None:
            return None
        return EuclideanParams(a, b, p)

    def combinations(self) -> Iterator[Tuple[Tuple[int, int, int], Optional[EuclideanParams]]]:
        for idx in product((1, 2, 3), repeat=3):
            yield idx, self.combination(*idx)

    def as_dict(self) -> Dict[str, Optional[float]]:
        out = {}
        for name, variants in zip(PARAM_NAMES, (self.alpha_variants, self.beta_variants, self.pi_variants)):
            for i, value in enumerate(variants, start=1):
                out[f"{name}{i}"] = value
        return out


@dataclass(frozen=True)
class SigmaStarEstimate:
    value: Optional[float]
    reason: Optional[str] = None


def _guard(gamma: np.ndarray) -> float:
    return settings.DENOMINATOR_GUARD * max(1.0, float(np.max(np.abs(gamma))))


def _denominators(gamma: np.ndarray) -> Tuple[float, float, float]:
    g = np.asarray(gamma, dtype=float)
    guard = _guard(g)
    v = g[7] - g[5] ** 2
    if abs(v) <= guard:
        raise DegenerateDesign(f"gamma_8 - gamma_6^2 = {v:.3g}: X^2 has no spread")
    c = g[6] - g[4] * g[5]
    d = g[1] + 2.0 * g[0] * c / v
    if abs(d) <= guard:
        raise OutsideDomain(f"beta denominator {d:.3g} vanishes: gamma outside the estimator domain")
    return v, c, d


def map_gamma_to_params(g: GammaEstimate) -> EuclideanParams:
    """
    β = γ₄ / (γ₂ + 2γ₁(γ₇ − γ₅γ₆)/(γ₈ − γ₆²)), then π = γ₂/β, then α = γ₁/π.

    π may fall outside (0, 1]; the caller reads EuclideanParams.pi_valid.
    """
    gamma = g.gamma
    guard = _guard(gamma)
    _, _, d = _denominators(gamma)

    beta = gamma[3] / d
    if abs(beta) <= guard:
        raise OutsideDomain("beta_n vanishes: pi_n = gamma_2 / beta_n undefined")
    pi = gamma[1] / beta
    if abs(pi) <= guard:
        raise OutsideDomain("pi_n = 0: alpha_n and the functional estimators are undefined")
    alpha = gamma[0] / pi
    return EuclideanParams(alpha=float(alpha), beta=float(beta), pi=float(pi))


def jacobian_psi(gamma: np.ndarray) -> np.ndarray:
    """3×8 matrix of partial derivatives of (α, β, π) with respect to γ₁..γ₈."""
    g = np.asarray(gamma, dtype=float)
    v, c, d = _denominators(g)
    if abs(g[3]) <= _guard(g) or abs(g[1]) <= _guard(g):
        raise OutsideDomain("gamma_2 or gamma_4 vanishes: (alpha, beta, pi) not differentiable here")
    g1, g2, g4 = g[0], g[1], g[3]
    g5, g6 = g[4], g[5]

    dd = np.zeros(8)
    dd[0] = 2.0 * c / v
    dd[1] = 1.0
    dd[4] = -2.0 * g1 * g6 / v
    dd[5] = 2.0 * g1 * (-g5 * v + 2.0 * g6 * c) / v**2
    dd[6] = 2.0 * g1 / v
    dd[7] = -2.0 * g1 * c / v**2

    d_beta = -g4 / d**2 * dd
    d_beta[3] += 1.0 / d

    d_pi = (g2 / g4) * dd
    d_pi[1] += d / g4
    d_pi[3] -= g2 * d / g4**2

    q = g2 * d
    dq = g2 * dd
    dq[1] += d
    d_alpha = -g1 * g4 / q**2 * dq
    d_alpha[0] += g4 / q
    d_alpha[3] += g1 / q

    return np.vstack([d_alpha, d_beta, d_pi])


def invert_gamma_matrix(g: GammaEstimate, cond_threshold: float = settings.COND_THRESHOLD) -> np.ndarray:
    cond = float(np.linalg.cond(g.gamma_matrix))
    if not np.isfinite(cond) or cond > cond_threshold:
        raise DegenerateDesign("Gamma_n is singular or ill-conditioned", condition=cond)
    return np.linalg.inv(g.gamma_matrix)


def sandwich_covariance(
    data: Dataset,
    g: GammaEstimate,
    psi: np.ndarray,
    cond_threshold: float = settings.COND_THRESHOLD,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Σ_n = Ψ Γ_n⁻¹ ℙ_n(φ̇ φ̇ᵀ) Γ_n⁻¹ Ψᵀ and the standard errors sqrt(diag(Σ_n)/n).
    """
    gamma_inv = invert_gamma_matrix(g, cond_threshold)
    phi = grad_phi_gamma_matrix(g.gamma, data)
    meat = phi.T @ phi / data.n
    bread = psi @ gamma_inv
    sigma = bread @ meat @ bread.T
    sigma = 0.5 * (sigma + sigma.T)
    std_errors = np.sqrt(np.clip(np.diag(sigma), 0.0, None) / data.n)
    return sigma, std_errors


def _variant(numerator: float, denominator: float, guards: Tuple[float, ...], tol: float) -> Optional[float]:
    if any(abs(v) <= tol for v in guards):
        return None
    return float(numerator / denominator)


def lambda_param_family(est: LambdaEstimate, tol: float = settings.DENOMINATOR_GUARD) -> LambdaParamFamily:
    """
    The nine λ-based formulas. A variant is undefined when one of its guard values
    (denominators of the formula or of the relation it inverts) is within tol of 0.
    """
    l1, l2, _, l4, l5 = (float(v) for v in est.lam)
    alphas = (
        _variant(l1 * l5, l2**2, (l2,), tol),
        _variant(l4, 2.0 * l2, (l2,), tol),
        _variant(l4**2, 4.0 * l1 * l5, (l1, l5, l4), tol),
    )
    betas = (
        _variant(l5, l2, (l2,), tol),
        _variant(l4, 2.0 * l1, (l1,), tol),
        _variant(l2 * l4**2, 4.0 * l5 * l1**2, (l1, l5), tol),
    )
    pis = (
        _variant(l2**2, l5, (l2, l5), tol),
        _variant(2.0 * l1 * l2, l4, (l4,), tol),
        _variant(4.0 * l1**2 * l5, l4**2, (l4,), tol),
    )
    return LambdaParamFamily(alphas, betas, pis)


def sigma_star_diagnostic(m: MomentSummary, cond_threshold: float = settings.COND_THRESHOLD) -> SigmaStarEstimate:
    """
    Moment estimate of the known component's error variance:

        σ*² = (λ₃λ₅ − λ₇λ₂) / (λ₅ − λ₂²)

    with λ₇ one third of the X coefficient in the OLS of Y³ on (1, X, X², X³).
    Highly unstable in practice; reported as a diagnostic only.
    """
    lam = fit_lambda(m, cond_threshold).lam
    coef = cubic_response_coefficients(m, cond_threshold)
    l2, l3, l5 = lam[1], lam[2], lam[4]
    # X coefficient over 3, not the X² coefficient: only this recovers σ*² under forward substitution
    l7 = coef[1] / 3.0

    denominator = l5 - l2**2
    if abs(denominator) <= settings.DENOMINATOR_GUARD * max(1.0, abs(l5), l2**2):
        return SigmaStarEstimate(None, "lambda_5 - lambda_2^2 vanishes (single-component data)")
    value = float((l3 * l5 - l7 * l2) / denominator)
    if value < 0:
        return SigmaStarEstimate(None, f"negative moment estimate {value:.4g}")
    return SigmaStarEstimate(value)


def fit_euclidean(
    data: Dataset,
    moments: Optional[MomentSummary] = None,
    cond_threshold: float = settings.COND_THRESHOLD,
) -> EuclideanFit:
    """Moments -> γ_n -> (α_n, β_n, π_n) with Σ_n. Invalid π_n is flagged, not raised."""
    m = moments if moments is not None else accumulate_moments(data)
    g = fit_gamma(m, cond_threshold)
    params = map_gamma_to_params(g)
    psi = jacobian_psi(g.gamma)
    sigma, std_errors = sandwich_covariance(data, g, psi, cond_threshold)

    if not params.pi_valid:
        logger.debug(f"[FIT] pi_n = {params.pi:.4f} outside (0, 1]")
    logger.debug(
        f"[FIT] n={data.n} alpha={params.alpha:.4f} beta={params.beta:.4f} pi={params.pi:.4f} "
        f"se=({std_errors[0]:.4f}, {std_errors[1]:.4f}, {std_errors[2]:.4f})"
    )
    return EuclideanFit(
        params=params,
        sigma=sigma,
        std_errors=std_errors,
        pi_valid=params.pi_valid,
        jacobian=psi,
        gamma=g,
        n=data.n,
    )
