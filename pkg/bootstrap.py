"""
Multiplier bootstrap for F_n.

Each replicate j draws standard normal multipliers ξ^(j), forms the process
t -> n^{-1/2} Σ (ξ_i − ξ̄) ψ̂^F_{t,i} and records its sup over the grid. The band
half-width is the ⌈N(1−p)⌉-th order statistic of the sups divided by √n.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

import settings
from errors import OutsideDomain
from euclidean import EuclideanFit
from functional import EvaluationGrid, FunctionalFit, estimate_functional
from model_core import Dataset, KnownComponent
from moments import GammaEstimate
from schemas import BootstrapConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BandResult:
    halfwidth: float
    sup_stats: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    band_lo_clamped: np.ndarray
    band_hi_clamped: np.ndarray
    level: float
    replicates: int

    def contains(self, values: np.ndarray) -> bool:
        """True if every value lies inside the unclamped band."""
        values = np.asarray(values, dtype=float)
        return bool(np.all((values >= self.band_lo) & (values <= self.band_hi)))


def multiplier_process(influence_matrix: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """n^{-1/2} Σ_i (ξ_i − ξ̄) ψ̂_{t,i} for every row t (xi may also be n×B)."""
    xi = np.asarray(xi, dtype=float)
    n = influence_matrix.shape[1]
    if xi.shape[0] != n:
        raise ValueError(f"multipliers have length {xi.shape[0]}, expected {n}")
    centred = xi - xi.mean(axis=0)
    return influence_matrix @ centred / math.sqrt(n)


def replicate_generators(seed: int, replicates: int) -> List[np.random.Generator]:
    """One counter-based generator per replicate, derived from the master seed."""
    children = np.random.SeedSequence(seed).spawn(replicates)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def sup_statistics(
    influence: np.ndarray,
    replicates: int,
    seed: int,
    threads: int = settings.DEFAULT_THREADS,
    batch: int = settings.BOOTSTRAP_BATCH,
) -> np.ndarray:
    """sup_t |G'^(j) ψ̂_t| for j = 1..replicates; identical for any thread count."""
    n = influence.shape[1]
    generators = replicate_generators(seed, replicates)
    sups = np.empty(replicates)

    def run_batch(start: int) -> int:
        stop = min(start + batch, replicates)
        xi = np.column_stack([generators[j].standard_normal(n) for j in range(start, stop)])
        process = multiplier_process(influence, xi)
        sups[start:stop] = np.abs(process).max(axis=0)
        return stop - start

    starts = range(0, replicates, batch)
    if threads <= 1:
        for start in starts:
            run_batch(start)
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(run_batch, start) for start in starts]
            for future in as_completed(futures):
                future.result()
    return sups


def quantile_rank(replicates: int, level: float) -> int:
    """1-based rank ⌈N(1−p)⌉ of the generalized-inverse quantile."""
    return max(1, math.ceil(round(replicates * (1.0 - level), 9)))


def band(
    data: Dataset,
    known: KnownComponent,
    fit: EuclideanFit,
    g: GammaEstimate,
    grid: EvaluationGrid,
    functional: FunctionalFit,
    cfg: BootstrapConfig,
    influence: Optional[np.ndarray] = None,
) -> BandResult:
    """
    Level 1−p confidence band F_n ± G⁻¹_{n,N}(1−p)/√n.

    The influence matrix is recomputed from default density settings when not supplied.
    """
    if fit.params.pi == 0:
        raise OutsideDomain("pi_n = 0: no band for F_n")
    if cfg.replicates < math.ceil(1.0 / cfg.level):
        logger.warning(
            f"[BAND] N={cfg.replicates} replicates is below 1/p={1.0 / cfg.level:.0f}; "
            "the quantile is the sample maximum"
        )
    if g is not fit.gamma:
        fit = replace(fit, gamma=g)
    if influence is None:
        _, _, influence = estimate_functional(data, known, fit, grid)

    sups = sup_statistics(influence, cfg.replicates, cfg.seed, cfg.threads)
    rank = quantile_rank(cfg.replicates, cfg.level)
    halfwidth = float(np.sort(sups)[rank - 1] / math.sqrt(data.n))

    lo = functional.f_raw - halfwidth
    hi = functional.f_raw + halfwidth
    logger.debug(
        f"[BAND] N={cfg.replicates} p={cfg.level} halfwidth={halfwidth:.5f} "
        f"(rank {rank}, sup range [{sups.min():.3f}, {sups.max():.3f}])"
    )
    return BandResult(
        halfwidth=halfwidth,
        sup_stats=sups,
        band_lo=lo,
        band_hi=hi,
        band_lo_clamped=np.clip(lo, 0.0, 1.0),
        band_hi_clamped=np.clip(hi, 0.0, 1.0),
        level=cfg.level,
        replicates=cfg.replicates,
    )
