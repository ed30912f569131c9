"""
Error density estimator f_n: a Gaussian kernel smoother of the fitted residuals
minus the known-component correction, divided by π_n.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import hermite_e
from scipy.integrate import trapezoid
from scipy.stats import iqr, norm

import settings
from errors import DegenerateDesign, OutsideDomain
from euclidean import EuclideanFit
from model_core import Dataset, KnownComponent
from schemas import DensityConfig

logger = logging.getLogger(__name__)

BINNING_GRID = 401
KERNEL_TRUNCATION = 4.0  # Gaussian derivative kernels are cut at this many bandwidths
SCALE_RULE_CONSTANT = 1.06


@dataclass(frozen=True, eq=False)
class DensityFit:
    grid: np.ndarray
    f_raw: np.ndarray
    f_clamped: np.ndarray
    bandwidth: float

    @property
    def integral(self) -> float:
        """Trapezoidal integral of max(f_n, 0) over the grid."""
        return float(trapezoid(self.f_clamped, self.grid))


def residuals(data: Dataset, fit: EuclideanFit) -> np.ndarray:
    alpha, beta = fit.eta
    return data.y - alpha - beta * data.x


def _robust_scale(values: np.ndarray) -> float:
    sd = float(np.std(values, ddof=1))
    spread = float(iqr(values)) / 1.349
    return min(sd, spread) if spread > 0 else sd


def _linear_binning(z: np.ndarray, lo: float, hi: float, size: int) -> np.ndarray:
    delta = (hi - lo) / (size - 1)
    pos = (z - lo) / delta
    left = np.clip(np.floor(pos).astype(int), 0, size - 2)
    weight = pos - left
    counts = np.bincount(left, weights=1.0 - weight, minlength=size)
    counts += np.bincount(left + 1, weights=weight, minlength=size)
    return counts


def _binned_functional(counts: np.ndarray, order: int, g: float, lo: float, hi: float) -> float:
    """
    Binned estimate of ∫ f^{(order)} f for even order, using the order-th derivative
    of the Gaussian kernel with bandwidth g.
    """
    size = counts.size
    n = counts.sum()
    delta = (hi - lo) / (size - 1)
    lags = min(int(math.floor(KERNEL_TRUNCATION * g * math.sqrt(order + 1) / delta)), size - 1)
    arg = np.arange(-lags, lags + 1) * delta / g
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    kernel = hermite_e.hermeval(arg, coeffs) * norm.pdf(arg) / g ** (order + 1)
    smoothed = np.convolve(counts, kernel, mode="full")[lags : lags + size]
    return float(np.sum(counts * smoothed) / n**2)


def plugin_bandwidth(values: np.ndarray) -> float:
    """
    Two-stage direct plug-in bandwidth for a Gaussian kernel.

    Data are standardized by min(sd, IQR/1.349), linearly binned, and the density
    functionals ψ6 then ψ4 are estimated with normal-reference pilot bandwidths.
    """
    n = values.size
    scale = _robust_scale(values)
    z = (values - values.mean()) / scale
    lo, hi = float(z.min()), float(z.max())
    counts = _linear_binning(z, lo, hi, BINNING_GRID)

    g6 = (2.0 * math.sqrt(2.0) ** 9 / (7.0 * n)) ** (1.0 / 9.0)
    psi6 = _binned_functional(counts, 6, g6, lo, hi)
    if psi6 >= 0:
        raise DegenerateDesign(f"plug-in stage 1 functional psi6={psi6:.3g} is not negative")
    g4 = (-3.0 * math.sqrt(2.0 / math.pi) / (psi6 * n)) ** (1.0 / 7.0)
    psi4 = _binned_functional(counts, 4, g4, lo, hi)
    if psi4 <= 0:
        raise DegenerateDesign(f"plug-in stage 2 functional psi4={psi4:.3g} is not positive")

    return scale * (4.0 * math.pi) ** (-0.1) * (1.0 / (psi4 * n)) ** 0.2


def scale_rule_bandwidth(values: np.ndarray) -> float:
    return SCALE_RULE_CONSTANT * float(np.std(values, ddof=1)) * values.size ** (-0.2)


def select_bandwidth(resid: np.ndarray, cfg: DensityConfig) -> float:
    """
    Resolve the bandwidth h_n for the configured rule.

    Raises:
        DegenerateDesign: fewer than 4 residuals or zero residual variance.
    """
    if cfg.bandwidth == "fixed":
        return float(cfg.h)

    values = np.asarray(resid, dtype=float)
    if values.size < 4:
        raise DegenerateDesign(f"bandwidth selection needs at least 4 residuals, got {values.size}")
    if not np.var(values) > 0:
        raise DegenerateDesign("residuals have zero variance")

    if cfg.bandwidth == "scale":
        return scale_rule_bandwidth(values)
    try:
        return plugin_bandwidth(values)
    except DegenerateDesign as e:
        h = scale_rule_bandwidth(values)
        logger.warning(f"[PDF] Plug-in selector failed ({e}); using scale rule h={h:.4g}")
        return h


def _check_pi(fit: EuclideanFit) -> None:
    if fit.params.pi == 0:
        raise OutsideDomain("pi_n = 0: density estimator undefined")


def f_n_values(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    t: np.ndarray,
    h: float,
    row_chunk: int = settings.INFLUENCE_ROW_CHUNK,
) -> np.ndarray:
    """Raw f_n at every point of t."""
    _check_pi(fit)
    alpha, beta = fit.eta
    pi = fit.params.pi
    resid = residuals(data, fit)
    shift = alpha + beta * data.x
    t = np.atleast_1d(np.asarray(t, dtype=float))

    out = np.empty(t.size)
    for start in range(0, t.size, row_chunk):
        block = t[start : start + row_chunk, None]
        kernel = norm.pdf((block - resid[None, :]) / h).mean(axis=1) / h
        correction = known.f_star.pdf(block + shift[None, :]).mean(axis=1)
        out[start : start + row_chunk] = (kernel - (1.0 - pi) * correction) / pi
    return out


def f_n_pdf(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    t: float,
    cfg: DensityConfig,
    h: Optional[float] = None,
) -> float:
    """f_n(t); clamped at 0 when cfg.clamp."""
    if h is None:
        h = select_bandwidth(residuals(data, fit), cfg)
    value = float(f_n_values(data, known, fit, np.array([t]), h)[0])
    return max(value, 0.0) if cfg.clamp else value


def f_n_pdf_grid(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    grid: np.ndarray,
    cfg: DensityConfig,
) -> DensityFit:
    h = select_bandwidth(residuals(data, fit), cfg)
    raw = f_n_values(data, known, fit, grid, h)
    fitted = DensityFit(grid=np.asarray(grid, dtype=float), f_raw=raw, f_clamped=np.maximum(raw, 0.0), bandwidth=h)
    logger.debug(f"[PDF] h={h:.4g} ({cfg.bandwidth}), integral of clamped f_n={fitted.integral:.4f}")
    return fitted
