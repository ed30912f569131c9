"""
Raw moments of (X, Y) and the two closed-form least-squares systems built on them.

γ-system (8 parameters): OLS of Y on X, OLS of Y² on X², and the first four raw
moments of X. λ-system (5 parameters): OLS of Y on X and OLS of Y² on (1, X, X²).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

import settings
from errors import DegenerateDesign, NumericOverflowError
from model_core import Dataset, Observation

logger = logging.getLogger(__name__)

# (p, q) exponents of X^p Y^q
MONOMIALS: Tuple[Tuple[int, int], ...] = (
    (1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (6, 0), (7, 0), (8, 0),
    (0, 1), (0, 2), (0, 3),
    (1, 1), (1, 2), (1, 3),
    (2, 1), (2, 2), (2, 3),
    (3, 2), (3, 3),
)  # fmt: skip


def monomial_name(p: int, q: int) -> str:
    parts = []
    if p:
        parts.append("X" if p == 1 else f"X^{p}")
    if q:
        parts.append("Y" if q == 1 else f"Y^{q}")
    return "".join(parts) or "1"


@dataclass(frozen=True)
class MomentSummary:
    """Sample means of the monomials X^p Y^q. Index as ``m[p, q]``; ``m[0, 0]`` is 1."""

    n: int
    means: Dict[Tuple[int, int], float]

    def __getitem__(self, key: Tuple[int, int]) -> float:
        if key == (0, 0):
            return 1.0
        return self.means[key]

    @property
    def var_x(self) -> float:
        return self[2, 0] - self[1, 0] ** 2

    @property
    def var_x2(self) -> float:
        return self[4, 0] - self[2, 0] ** 2


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    gamma: np.ndarray
    gamma_matrix: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True, eq=False)
class LambdaEstimate:
    lam: np.ndarray
    lambda_matrix: np.ndarray
    upsilon: np.ndarray


def _chunk_sum(values: np.ndarray, name: str) -> float:
    try:
        total = math.fsum(values.tolist())
    except (OverflowError, ValueError):
        raise NumericOverflowError(name)
    if not math.isfinite(total):
        raise NumericOverflowError(name)
    return total


def accumulate_moments(data: Dataset, chunk_size: int = settings.MOMENT_CHUNK_SIZE) -> MomentSummary:
    """
    Exact sample means of every monomial in MONOMIALS.

    Each chunk is summed with math.fsum and the chunk totals are combined with
    fsum again, so the result does not depend on observation order beyond the last ulp.
    """
    partials: Dict[Tuple[int, int], list] = {key: [] for key in MONOMIALS}

    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, data.n, chunk_size):
            x = data.x[start : start + chunk_size]
            y = data.y[start : start + chunk_size]
            x_pow = {1: x}
            for p in range(2, 9):
                x_pow[p] = x_pow[p - 1] * x
            y_pow = {1: y, 2: y * y}
            y_pow[3] = y_pow[2] * y

            for p, q in MONOMIALS:
                if q == 0:
                    term = x_pow[p]
                elif p == 0:
                    term = y_pow[q]
                else:
                    term = x_pow[p] * y_pow[q]
                partials[(p, q)].append(_chunk_sum(term, monomial_name(p, q)))

    means = {}
    for key, sums in partials.items():
        name = monomial_name(*key)
        mean = _chunk_sum(np.asarray(sums), name) / data.n
        if not math.isfinite(mean):
            raise NumericOverflowError(name)
        means[key] = mean

    logger.debug(f"[MOMENTS] Accumulated {len(MONOMIALS)} moments over n={data.n}")
    return MomentSummary(n=data.n, means=means)


def _check_condition(matrix: np.ndarray, label: str, threshold: float) -> None:
    cond = float(np.linalg.cond(matrix))
    if not math.isfinite(cond) or cond > threshold:
        raise DegenerateDesign(f"{label} design is singular or ill-conditioned", condition=cond)


def _cramer_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cramer's rule for the 2×2 / 3×3 / 4×4 normal equations."""
    det = np.linalg.det(a)
    out = np.empty(len(b))
    for k in range(len(b)):
        replaced = a.copy()
        replaced[:, k] = b
        out[k] = np.linalg.det(replaced) / det
    return out


def _simple_ols(m: MomentSummary, response_q: int, regressor_p: int, threshold: float) -> Tuple[float, float]:
    """Intercept and slope of the OLS of Y^q on X^p, from moments."""
    design = np.array([[1.0, m[regressor_p, 0]], [m[regressor_p, 0], m[2 * regressor_p, 0]]])
    _check_condition(design, f"OLS of {monomial_name(0, response_q)} on {monomial_name(regressor_p, 0)}", threshold)
    mean_r = m[regressor_p, 0]
    var_r = m[2 * regressor_p, 0] - mean_r**2
    cov = m[regressor_p, response_q] - mean_r * m[0, response_q]
    slope = cov / var_r
    return m[0, response_q] - slope * mean_r, slope


def _polynomial_design(m: MomentSummary, degree: int) -> np.ndarray:
    return np.array([[m[i + j, 0] for j in range(degree + 1)] for i in range(degree + 1)])


def gamma_matrix(m: MomentSummary) -> Tuple[np.ndarray, np.ndarray]:
    """Γ_n and θ_n of the γ normal equations Γ_n γ = θ_n."""
    big = np.zeros((8, 8))
    big[0:2, 0:2] = [[1.0, m[1, 0]], [m[1, 0], m[2, 0]]]
    big[2:4, 2:4] = [[1.0, m[2, 0]], [m[2, 0], m[4, 0]]]
    big[4:, 4:] = np.eye(4)
    theta = np.array([m[0, 1], m[1, 1], m[0, 2], m[2, 2], m[1, 0], m[2, 0], m[3, 0], m[4, 0]])
    return 2.0 * big, 2.0 * theta


def lambda_matrix(m: MomentSummary) -> Tuple[np.ndarray, np.ndarray]:
    """Λ_n and Υ_n of the λ normal equations Λ_n λ = Υ_n."""
    big = np.zeros((5, 5))
    big[0:2, 0:2] = _polynomial_design(m, 1)
    big[2:5, 2:5] = _polynomial_design(m, 2)
    upsilon = np.array([m[0, 1], m[1, 1], m[0, 2], m[1, 2], m[2, 2]])
    return 2.0 * big, 2.0 * upsilon


def fit_gamma(m: MomentSummary, cond_threshold: float = settings.COND_THRESHOLD) -> GammaEstimate:
    """
    Solve the γ-system through its two 2×2 regressions.

    Raises:
        DegenerateDesign: sample variance of X or of X² is zero (or the design is
            ill-conditioned beyond cond_threshold).
    """
    if m.var_x <= 0 or m.var_x2 <= 0:
        raise DegenerateDesign(f"var(X)={m.var_x:.3g}, var(X^2)={m.var_x2:.3g}: regressors have no spread")

    g1, g2 = _simple_ols(m, response_q=1, regressor_p=1, threshold=cond_threshold)
    g3, g4 = _simple_ols(m, response_q=2, regressor_p=2, threshold=cond_threshold)
    gamma = np.array([g1, g2, g3, g4, m[1, 0], m[2, 0], m[3, 0], m[4, 0]])
    big, theta = gamma_matrix(m)
    logger.debug(f"[MOMENTS] gamma={np.array2string(gamma, precision=6)}")
    return GammaEstimate(gamma=gamma, gamma_matrix=big, theta=theta)


def fit_lambda(m: MomentSummary, cond_threshold: float = settings.COND_THRESHOLD) -> LambdaEstimate:
    big, upsilon = lambda_matrix(m)
    _check_condition(big, "Lambda_n", cond_threshold)

    l1, l2 = _simple_ols(m, response_q=1, regressor_p=1, threshold=cond_threshold)
    quad = _cramer_solve(_polynomial_design(m, 2), np.array([m[0, 2], m[1, 2], m[2, 2]]))
    return LambdaEstimate(lam=np.array([l1, l2, *quad]), lambda_matrix=big, upsilon=upsilon)


def solve_gamma_system(g: GammaEstimate) -> np.ndarray:
    """Full 8×8 solve of Γ_n γ = θ_n (cross-check path)."""
    return np.linalg.solve(g.gamma_matrix, g.theta)


def solve_lambda_system(est: LambdaEstimate) -> np.ndarray:
    """Full 5×5 solve of Λ_n λ = Υ_n (cross-check path)."""
    return np.linalg.solve(est.lambda_matrix, est.upsilon)


def cubic_response_coefficients(m: MomentSummary, cond_threshold: float = settings.COND_THRESHOLD) -> np.ndarray:
    """OLS coefficients of Y³ on (1, X, X², X³)."""
    design = _polynomial_design(m, 3)
    _check_condition(design, "OLS of Y^3 on cubic polynomial", cond_threshold)
    rhs = np.array([m[0, 3], m[1, 3], m[2, 3], m[3, 3]])
    return _cramer_solve(design, rhs)


def grad_phi_gamma(gamma: np.ndarray, obs: Observation) -> np.ndarray:
    """Gradient of the γ least-squares criterion at one observation."""
    x, y = obs
    g = np.asarray(gamma, dtype=float)
    r1 = y - g[0] - g[1] * x
    r2 = y * y - g[2] - g[3] * x * x
    return -2.0 * np.array(
        [r1, x * r1, r2, x * x * r2, x - g[4], x**2 - g[5], x**3 - g[6], x**4 - g[7]]
    )


def grad_phi_gamma_matrix(gamma: np.ndarray, data: Dataset) -> np.ndarray:
    """Row i is grad_phi_gamma(gamma, data[i]); shape n×8."""
    g = np.asarray(gamma, dtype=float)
    x, y = data.x, data.y
    x2 = x * x
    r1 = y - g[0] - g[1] * x
    r2 = y * y - g[2] - g[3] * x2
    cols = (r1, x * r1, r2, x2 * r2, x - g[4], x2 - g[5], x2 * x - g[6], x2 * x2 - g[7])
    return -2.0 * np.column_stack(cols)


def phi_gamma(gamma: np.ndarray, obs: Observation) -> float:
    """The γ least-squares criterion at one observation; grad_phi_gamma is its gradient."""
    x, y = obs
    g = np.asarray(gamma, dtype=float)
    value = (y - g[0] - g[1] * x) ** 2 + (y * y - g[2] - g[3] * x * x) ** 2
    for k in range(4):
        value += (x ** (k + 1) - g[4 + k]) ** 2
    return float(value)
