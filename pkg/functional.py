"""
Semiparametric c.d.f. estimator of the unknown component's error:

    F_n(t) = {J_n(t, η_n) − (1 − π_n) K_n(t, η_n)} / π_n

with J_n the ecdf of the fitted residuals and K_n the empirical mean of
F*(t + α_n + β_n X_i), plus its estimated influence function and pointwise
standard errors.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

import settings
from density import DensityFit, f_n_pdf_grid, residuals
from errors import OutsideDomain
from euclidean import EuclideanFit, invert_gamma_matrix
from model_core import Dataset, KnownComponent
from moments import GammaEstimate, grad_phi_gamma_matrix
from schemas import DensityConfig, EstimationSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1)
        if pts.size == 0:
            raise ValueError("evaluation grid is empty")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("evaluation grid must be strictly increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True, eq=False)
class FunctionalFit:
    grid: EvaluationGrid
    f_raw: np.ndarray
    f_clamped: np.ndarray
    j_vals: np.ndarray
    k_vals: np.ndarray
    pi: float
    se: Optional[np.ndarray] = None


def default_grid(data: Dataset, fit: EuclideanFit, size: int = settings.DEFAULT_GRID_POINTS) -> EvaluationGrid:
    """`size` equally spaced points over [min residual, max residual]."""
    resid = residuals(data, fit)
    lo, hi = float(resid.min()), float(resid.max())
    if hi <= lo:
        # all residuals equal: centre a unit-width window on them
        lo, hi = lo - 0.5, hi + 0.5
    return EvaluationGrid(np.linspace(lo, hi, size))


def _check_pi(pi: float) -> None:
    if pi == 0:
        raise OutsideDomain("pi_n = 0: F_n is undefined")


def j_n(data: Dataset, eta: Tuple[float, float], t):
    """Ecdf of the residuals y − α − βx at t (scalar or array), via one sort and binary search."""
    alpha, beta = eta
    resid = np.sort(data.y - alpha - beta * data.x)
    values = np.searchsorted(resid, t, side="right") / data.n
    return float(values) if np.ndim(values) == 0 else values


def k_n(
    data: Dataset,
    known: KnownComponent,
    eta: Tuple[float, float],
    t,
    row_chunk: int = settings.INFLUENCE_ROW_CHUNK,
):
    """Mean of F*(t + α + βX_i) at t (scalar or array)."""
    alpha, beta = eta
    shift = alpha + beta * data.x
    pts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(pts.size)
    for start in range(0, pts.size, row_chunk):
        block = pts[start : start + row_chunk, None]
        out[start : start + row_chunk] = known.f_star.cdf(block + shift[None, :]).mean(axis=1)
    return float(out[0]) if np.ndim(t) == 0 else out


def f_n_cdf(data: Dataset, known: KnownComponent, fit: EuclideanFit, grid: EvaluationGrid) -> FunctionalFit:
    pi = fit.params.pi
    _check_pi(pi)
    j_vals = j_n(data, fit.eta, grid.points)
    k_vals = k_n(data, known, fit.eta, grid.points)
    f_raw = (j_vals - (1.0 - pi) * k_vals) / pi
    logger.debug(f"[CDF] F_n on {len(grid)} points, raw range [{f_raw.min():.4f}, {f_raw.max():.4f}]")
    return FunctionalFit(
        grid=grid,
        f_raw=f_raw,
        f_clamped=np.clip(f_raw, 0.0, 1.0),
        j_vals=j_vals,
        k_vals=k_vals,
        pi=pi,
    )


def parameter_influence(
    data: Dataset, fit: EuclideanFit, cond_threshold: float = settings.COND_THRESHOLD
) -> np.ndarray:
    """n×3 matrix of (ψ̂^α, ψ̂^β, ψ̂^π)_i = −Ψ Γ_n⁻¹ φ̇(x_i, y_i)."""
    g: GammaEstimate = fit.gamma
    gamma_inv = invert_gamma_matrix(g, cond_threshold)
    phi = grad_phi_gamma_matrix(g.gamma, data)
    return -phi @ (fit.jacobian @ gamma_inv).T


def influence_matrix(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    functional: FunctionalFit,
    density_at_grid: np.ndarray,
    cond_threshold: float = settings.COND_THRESHOLD,
    row_chunk: int = settings.INFLUENCE_ROW_CHUNK,
) -> np.ndarray:
    """
    |grid|×n matrix of ψ̂^F_{t,i}.

    Row t: (1/π)1(r_i ≤ t) + f(t)ψ̂^α_i + f(t)X̄ψ̂^β_i − ((1−π)/π)F*(t+α+βx_i)
    + ((K_n(t) − J_n(t))/π²)ψ̂^π_i, with f the supplied density values.
    """
    pi = fit.params.pi
    _check_pi(pi)
    alpha, beta = fit.eta
    resid = residuals(data, fit)
    shift = alpha + beta * data.x
    x_bar = float(np.mean(data.x))
    psi3 = parameter_influence(data, fit, cond_threshold)

    pts = functional.grid.points
    dens = np.asarray(density_at_grid, dtype=float)
    out = np.empty((pts.size, data.n))
    for start in range(0, pts.size, row_chunk):
        stop = min(start + row_chunk, pts.size)
        t = pts[start:stop, None]
        f_t = dens[start:stop, None]
        gap = ((functional.k_vals[start:stop] - functional.j_vals[start:stop]) / pi**2)[:, None]
        out[start:stop] = (
            (resid[None, :] <= t) / pi
            + f_t * psi3[None, :, 0]
            + f_t * x_bar * psi3[None, :, 1]
            - (1.0 - pi) / pi * known.f_star.cdf(t + shift[None, :])
            + gap * psi3[None, :, 2]
        )
    return out


def influence_hat(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    g: GammaEstimate,
    f_n_at_t: float,
    t: float,
    cond_threshold: float = settings.COND_THRESHOLD,
) -> np.ndarray:
    """Per-observation ψ̂^F at a single t."""
    if g is not fit.gamma:
        fit = replace(fit, gamma=g)
    functional = f_n_cdf(data, known, fit, EvaluationGrid(np.array([t])))
    return influence_matrix(data, known, fit, functional, np.array([f_n_at_t]), cond_threshold)[0]


def pointwise_se(influence: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """n^{-1/2}·sqrt(mean ψ² − (mean ψ)²) along the last axis."""
    values = np.asarray(influence, dtype=float)
    n = values.shape[-1] if n is None else n
    if n < 2:
        raise ValueError("pointwise standard errors need n >= 2")
    mean = values.mean(axis=-1)
    second = (values**2).mean(axis=-1)
    return np.sqrt(np.clip(second - mean**2, 0.0, None) / n)


def density_fallback(functional: FunctionalFit) -> np.ndarray:
    """Central difference of the clamped F_n over the grid; approximates f when f_n is disabled."""
    if len(functional.grid) < 2:
        return np.zeros(len(functional.grid))
    return np.gradient(functional.f_clamped, functional.grid.points)


def estimate_functional(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    grid: EvaluationGrid,
    density_cfg: Optional[DensityConfig] = None,
    options: Optional[EstimationSettings] = None,
) -> Tuple[FunctionalFit, Optional[DensityFit], np.ndarray]:
    """
    F_n with pointwise standard errors, the density fit used inside the influence
    function, and the influence matrix itself (reused by the bootstrap).
    """
    options = options or EstimationSettings()
    density_cfg = density_cfg or DensityConfig()
    functional = f_n_cdf(data, known, fit, grid)

    density = None
    if options.use_density:
        density = f_n_pdf_grid(data, known, fit, grid.points, density_cfg)
        plug = density.f_raw if options.density_at == "raw" else density.f_clamped
    else:
        plug = density_fallback(functional)

    influence = influence_matrix(data, known, fit, functional, plug, options.cond_threshold)
    functional = replace(functional, se=pointwise_se(influence, data.n))
    return functional, density, influence
