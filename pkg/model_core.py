"""
Domain types for the known-component mixture of linear regressions.

    Ỹ = α* + β*X + ε*          with probability 1 − π
    Ỹ = α** + β**X + ε         with probability π

Subtracting the known line gives the canonical model Y = Ỹ − α* − β*X, where the
first component reduces to Y = ε* and the second to Y = α + βX + ε.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np
import pandas as pd

from distributions import ErrorDistribution, Normal, parse_known_spec
from errors import ConfigurationError, IngestionError

logger = logging.getLogger(__name__)


class Observation(NamedTuple):
    x: float
    y: float


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered (x, y) sample in canonical coordinates. Order is the ingestion order."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.x)
        y = _frozen_array(self.y)
        if x.shape != y.shape:
            raise IngestionError(f"x and y lengths differ ({x.size} vs {y.size})")
        if x.size < 1:
            raise IngestionError("dataset is empty")
        bad = np.flatnonzero(~(np.isfinite(x) & np.isfinite(y)))
        if bad.size:
            raise IngestionError("non-finite value", row=int(bad[0]))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Observation:
        return Observation(float(self.x[i]), float(self.y[i]))

    def __iter__(self):
        return (Observation(float(a), float(b)) for a, b in zip(self.x, self.y))

    @classmethod
    def from_observations(cls, observations: Sequence[Sequence[float]]) -> "Dataset":
        arr = np.asarray(observations, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


@dataclass(frozen=True, eq=False)
class SimulatedDataset(Dataset):
    """Dataset carrying the latent component labels; estimation code only reads x and y."""

    z: np.ndarray

    def __post_init__(self):
        super().__post_init__()
        z = np.array(self.z, dtype=np.int8).reshape(-1)
        if z.shape != self.x.shape:
            raise IngestionError("latent labels do not match the sample length")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class KnownComponent:
    alpha_star: float = 0.0
    beta_star: float = 0.0
    f_star: ErrorDistribution = field(default_factory=Normal)

    @property
    def sigma_star(self) -> float:
        return math.sqrt(self.f_star.variance)

    @classmethod
    def from_spec(cls, spec: str, transform: Sequence[float] = (0.0, 0.0)) -> "KnownComponent":
        if len(transform) != 2:
            raise ConfigurationError(f"transform needs two values a,b, got {transform}")
        return cls(float(transform[0]), float(transform[1]), parse_known_spec(spec))


@dataclass(frozen=True)
class EuclideanParams:
    alpha: float
    beta: float
    pi: float

    @property
    def pi_valid(self) -> bool:
        return 0.0 < self.pi <= 1.0

    def validate(self) -> "EuclideanParams":
        """Raise ConfigurationError unless the parameters are identifiable (π ∈ (0,1], β ≠ 0)."""
        if not self.pi_valid:
            raise ConfigurationError(f"pi must lie in (0, 1], got {self.pi}")
        if self.beta == 0:
            raise ConfigurationError("beta must be non-zero")
        return self

    def as_tuple(self) -> tuple:
        return (self.alpha, self.beta, self.pi)


def transform_to_canonical(raw: Union[np.ndarray, Sequence[Sequence[float]]], known: KnownComponent) -> Dataset:
    """
    Subtract the known regression line from raw (x, ỹ) pairs.

    Args:
        raw: n×2 array-like of (x, ỹ) pairs.
        known: Known component supplying α* and β*.

    Returns:
        Dataset with y_i = ỹ_i − α* − β*·x_i and x unchanged.
    """
    arr = np.asarray(raw, dtype=float).reshape(-1, 2)
    bad = np.flatnonzero(~np.isfinite(arr).all(axis=1))
    if bad.size:
        raise IngestionError("non-finite value", row=int(bad[0]))
    x = arr[:, 0]
    y = arr[:, 1] - known.alpha_star - known.beta_star * x
    return Dataset(x, y)


def transform_to_raw(data: Dataset, known: KnownComponent) -> np.ndarray:
    """Inverse of transform_to_canonical: returns the n×2 array of (x, ỹ)."""
    return np.column_stack([data.x, data.y + known.alpha_star + known.beta_star * data.x])


def _is_numeric_literal(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _is_header(row: pd.Series) -> bool:
    """A header has at least one non-empty cell that is not a numeric literal (nan and inf count as numeric)."""
    cells = [str(c).strip() for c in row if not pd.isna(c)]
    return any(c and not _is_numeric_literal(c) for c in cells)


def load_csv(path: Union[str, Path]) -> np.ndarray:
    """
    Read a two-column numeric CSV. A non-numeric first row is treated as a header.

    Row numbers in errors count data rows from 0, after any header.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"input file not found: {path}")

    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise IngestionError(f"{path} contains no rows")
    except pd.errors.ParserError as e:
        raise IngestionError(f"{path}: malformed CSV ({e})")
    if frame.empty:
        raise IngestionError(f"{path} contains no rows")
    if frame.shape[1] < 2:
        raise IngestionError(f"{path}: expected 2 columns (x, y), got {frame.shape[1]}")
    if frame.shape[1] > 2:
        logger.info(f"[INGEST] Ignoring {frame.shape[1] - 2} extra column(s) in {path}")
        frame = frame.iloc[:, :2]

    if _is_header(frame.iloc[0]):
        logger.info(f"[INGEST] Header detected: {list(frame.iloc[0])}")
        frame = frame.iloc[1:].reset_index(drop=True)
    if frame.empty:
        raise IngestionError(f"{path} has a header but no data rows")

    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    values = numeric.to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad.size:
        row = int(bad[0])
        raise IngestionError(f"unparsable or non-finite value {list(frame.iloc[row])}", row=row)

    logger.info(f"[INGEST] Loaded {len(values)} rows from {path}")
    return values


def load_dataset(path: Union[str, Path], known: KnownComponent) -> Dataset:
    return transform_to_canonical(load_csv(path), known)
