"""
Error laws for the known component (ε*) and the simulated unknown component (ε).

Every law is centred (mean 0) and exposes vectorized cdf/pdf/ppf plus sample(rng, size).
The gamma and exponential families are parameterized by a target variance and
rescaled analytically.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from scipy import special
from scipy.optimize import brentq
from scipy.stats import norm

from errors import ConfigurationError

logger = logging.getLogger(__name__)

PPF_TOLERANCE = 1e-10
TABLE_MEAN_TOLERANCE = 1e-3


@dataclass(frozen=True)
class Normal:
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigurationError(f"normal sigma must be positive, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma**2

    def cdf(self, t):
        return norm.cdf(t, scale=self.sigma)

    def pdf(self, t):
        return norm.pdf(t, scale=self.sigma)

    def ppf(self, p):
        return norm.ppf(p, scale=self.sigma)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(0.0, self.sigma, size)

    def describe(self) -> str:
        return f"normal:{self.sigma:g}"


@dataclass(frozen=True)
class ShiftedGamma:
    """
    Gamma(shape, rate) shifted to mean zero and rescaled to the target variance.

    ε = s·(G − shape/rate) with s = sqrt(variance / (shape/rate²)).
    """

    shape: float = 2.0
    rate: float = 0.5
    target_variance: float = 1.0

    def __post_init__(self):
        if min(self.shape, self.rate, self.target_variance) <= 0:
            raise ConfigurationError(
                f"gamma shape, rate and variance must be positive, got "
                f"{self.shape}, {self.rate}, {self.target_variance}"
            )

    @property
    def scale_factor(self) -> float:
        return math.sqrt(self.target_variance / (self.shape / self.rate**2))

    @property
    def variance(self) -> float:
        return self.scale_factor**2 * self.shape / self.rate**2

    def _to_gamma(self, t):
        # ε value -> underlying rate·G argument of the regularized incomplete gamma
        g = np.asarray(t, dtype=float) / self.scale_factor + self.shape / self.rate
        return np.maximum(g, 0.0) * self.rate

    def cdf(self, t):
        return special.gammainc(self.shape, self._to_gamma(t))

    def pdf(self, t):
        u = np.asarray(t, dtype=float) / self.scale_factor + self.shape / self.rate
        safe = np.where(u > 0, u, 1.0)
        log_dens = (
            self.shape * math.log(self.rate)
            + (self.shape - 1) * np.log(safe)
            - self.rate * safe
            - special.gammaln(self.shape)
        )
        return np.where(u > 0, np.exp(log_dens), 0.0) / self.scale_factor

    def ppf(self, p):
        """Bisection inverse of the regularized incomplete gamma, to PPF_TOLERANCE."""
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        out = np.empty_like(p_arr)
        lo = -self.scale_factor * self.shape / self.rate
        for i, level in enumerate(p_arr):
            if level <= 0:
                out[i] = lo
                continue
            if level >= 1:
                out[i] = np.inf
                continue
            hi = self.scale_factor
            while self.cdf(hi) < level:
                hi *= 2.0
            out[i] = brentq(lambda t: self.cdf(t) - level, lo, hi, xtol=PPF_TOLERANCE)
        return out if np.ndim(p) else float(out[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        draws = rng.gamma(self.shape, 1.0 / self.rate, size)
        return self.scale_factor * (draws - self.shape / self.rate)

    def describe(self) -> str:
        return f"gamma:{self.shape:g}:{self.rate:g}:{self.target_variance:g}"


@dataclass(frozen=True)
class ShiftedExponential:
    """Standard exponential minus one, scaled to the target variance."""

    target_variance: float = 1.0

    def __post_init__(self):
        if self.target_variance <= 0:
            raise ConfigurationError(f"exponential variance must be positive, got {self.target_variance}")

    @property
    def scale_factor(self) -> float:
        return math.sqrt(self.target_variance)

    @property
    def variance(self) -> float:
        return self.scale_factor**2

    def cdf(self, t):
        u = np.asarray(t, dtype=float) / self.scale_factor + 1.0
        return np.where(u > 0, -np.expm1(-np.maximum(u, 0.0)), 0.0)

    def pdf(self, t):
        u = np.asarray(t, dtype=float) / self.scale_factor + 1.0
        return np.where(u >= 0, np.exp(-np.maximum(u, 0.0)), 0.0) / self.scale_factor

    def ppf(self, p):
        return self.scale_factor * (-np.log1p(-np.asarray(p, dtype=float)) - 1.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale_factor * (rng.standard_exponential(size) - 1.0)

    def describe(self) -> str:
        return f"exp:{self.target_variance:g}"


@dataclass(frozen=True, eq=False)
class TabulatedCdf:
    """
    User-supplied known law given as (t, F(t)) pairs.

    The cdf is linearly interpolated (0 below the grid, 1 above); the pdf is the
    centred finite difference of the table, interpolated the same way.
    """

    grid: np.ndarray
    values: np.ndarray
    source: str = "table"
    _density: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 3:
            raise ConfigurationError("tabulated cdf needs at least 3 matching (t, F) pairs")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(values))):
            raise ConfigurationError("tabulated cdf holds non-finite values")
        if np.any(np.diff(grid) <= 0):
            raise ConfigurationError("tabulated cdf grid must be strictly increasing")
        if np.any(np.diff(values) < 0) or values[0] < 0 or values[-1] > 1:
            raise ConfigurationError("tabulated cdf values must be nondecreasing within [0, 1]")

        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_density", np.gradient(values, grid))

        if abs(self.mean) > TABLE_MEAN_TOLERANCE:
            logger.warning(f"[INGEST] Tabulated known law has mean {self.mean:.4g}, expected 0")

    @property
    def mean(self) -> float:
        mids = 0.5 * (self.grid[1:] + self.grid[:-1])
        return float(np.sum(mids * np.diff(self.values)))

    @property
    def variance(self) -> float:
        mids = 0.5 * (self.grid[1:] + self.grid[:-1])
        return float(np.sum((mids - self.mean) ** 2 * np.diff(self.values)))

    def cdf(self, t):
        return np.interp(t, self.grid, self.values, left=0.0, right=1.0)

    def pdf(self, t):
        return np.interp(t, self.grid, self._density, left=0.0, right=0.0)

    def ppf(self, p):
        return np.interp(p, self.values, self.grid)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.ppf(rng.uniform(self.values[0], self.values[-1], size))

    def describe(self) -> str:
        return f"table:{self.source}"

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "TabulatedCdf":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"tabulated cdf file not found: {path}")
        frame = pd.read_csv(path, header=None, comment="#")
        if frame.shape[1] != 2:
            raise ConfigurationError(f"{path}: expected two columns (t, F), got {frame.shape[1]}")
        # header row is detected the same way as for datasets
        if pd.to_numeric(frame.iloc[0], errors="coerce").isna().any():
            frame = frame.iloc[1:]
        frame = frame.apply(pd.to_numeric, errors="coerce")
        if frame.isna().any().any():
            raise ConfigurationError(f"{path}: non-numeric entries in tabulated cdf")
        return cls(frame.iloc[:, 0].to_numpy(), frame.iloc[:, 1].to_numpy(), source=str(path))


ErrorDistribution = Union[Normal, ShiftedGamma, ShiftedExponential, TabulatedCdf]


def parse_known_spec(spec: str) -> ErrorDistribution:
    """
    Parse the known-law grammar used on the command line.

    Args:
        spec: ``normal:<sigma>``, ``gamma:<shape>:<rate>:<var>``, ``exp:<var>``
            or ``table:<path>``. A space may replace the first colon ("normal 1").

    Returns:
        The corresponding ErrorDistribution.
    """
    text = spec.strip()
    if " " in text and ":" not in text.split(" ", 1)[0]:
        text = text.replace(" ", ":", 1)
    kind, _, rest = text.partition(":")
    kind = kind.lower()

    if kind == "table":
        if not rest:
            raise ConfigurationError("table known-spec needs a path: table:<path>")
        return TabulatedCdf.from_csv(rest)

    try:
        args = [float(a) for a in rest.split(":")] if rest else []
    except ValueError:
        raise ConfigurationError(f"invalid numeric argument in known-spec '{spec}'")

    if kind == "normal" and len(args) == 1:
        return Normal(args[0])
    if kind == "gamma" and len(args) == 3:
        return ShiftedGamma(*args)
    if kind in ("exp", "exponential") and len(args) == 1:
        return ShiftedExponential(args[0])
    raise ConfigurationError(
        f"unrecognized known-spec '{spec}' "
        "(expected normal:<sigma> | gamma:<shape>:<rate>:<var> | exp:<var> | table:<path>)"
    )
