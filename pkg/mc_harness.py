"""
Monte Carlo studies over the built-in scenarios.

Three studies share one replicate loop:
- bias: bias and sd of α_n, β_n, π_n and F_n at the true 0.1/0.5/0.9 quantiles
- se: √n·sd next to √n·mean(estimated se) for the same six estimators
- coverage: proportion of valid replicates whose F_n leaves its bootstrap band

Replicates with π_n ∉ (0, 1], or whose fit fails, are counted in m and excluded.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from tabulate import tabulate

import settings
from bootstrap import band
from errors import ConfigurationError, DegenerateDesign, OutsideDomain
from euclidean import fit_euclidean
from functional import EvaluationGrid, default_grid, estimate_functional, f_n_cdf
from schemas import BootstrapConfig, EstimatorStats, McReport
from simulator import builtin_scenario, derive_seed, simulate

logger = logging.getLogger(__name__)

ESTIMATORS = ("alpha", "beta", "pi") + tuple(f"F_n(q{p:g})" for p in settings.QUANTILE_LEVELS)
MIN_COVERAGE_REPLICATES = 20


@dataclass
class ReplicateOutcome:
    index: int
    valid: bool
    estimates: Optional[np.ndarray] = None
    std_errors: Optional[np.ndarray] = None
    missed: Optional[bool] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class StudyPlan:
    study: str
    scenario: str
    pi0: float
    n: int
    M: int
    seed: int
    N: Optional[int] = None
    level: float = settings.DEFAULT_LEVEL
    grid_points: int = settings.DEFAULT_GRID_POINTS
    identical_replicates: bool = False


def true_quantiles(scenario: str, pi0: float) -> np.ndarray:
    law = builtin_scenario(scenario, pi0, 1, 0).eps_law
    return np.array([float(law.ppf(p)) for p in settings.QUANTILE_LEVELS])


def run_replicate(plan: StudyPlan, index: int, quantiles: np.ndarray) -> ReplicateOutcome:
    seed = plan.seed if plan.identical_replicates else derive_seed(plan.seed, index)
    cfg = builtin_scenario(plan.scenario, plan.pi0, plan.n, seed)
    data = simulate(cfg)

    try:
        fit = fit_euclidean(data)
    except (DegenerateDesign, OutsideDomain) as e:
        logger.debug(f"[MC] replicate {index}: no fit ({e})")
        return ReplicateOutcome(index, valid=False, error=str(e))
    if not fit.pi_valid:
        return ReplicateOutcome(index, valid=False, error=f"pi_n={fit.params.pi:.4f}")

    params = np.array(fit.params.as_tuple())
    try:
        if plan.study == "bias":
            functional = f_n_cdf(data, cfg.known, fit, EvaluationGrid(quantiles))
            return ReplicateOutcome(index, True, np.concatenate([params, functional.f_raw]))

        if plan.study == "se":
            functional, _, _ = estimate_functional(data, cfg.known, fit, EvaluationGrid(quantiles))
            return ReplicateOutcome(
                index,
                True,
                np.concatenate([params, functional.f_raw]),
                np.concatenate([fit.std_errors, functional.se]),
            )

        grid = default_grid(data, fit, plan.grid_points)
        functional, _, influence = estimate_functional(data, cfg.known, fit, grid)
        boot_cfg = BootstrapConfig(replicates=plan.N, level=plan.level, seed=derive_seed(seed, 0), threads=1)
        result = band(data, cfg.known, fit, fit.gamma, grid, functional, boot_cfg, influence=influence)
        truth = cfg.eps_law.cdf(grid.points)
        missed = bool(np.max(np.abs(functional.f_raw - truth)) > result.halfwidth)
        at_quantiles = f_n_cdf(data, cfg.known, fit, EvaluationGrid(quantiles)).f_raw
        return ReplicateOutcome(index, True, np.concatenate([params, at_quantiles]), missed=missed)
    except (DegenerateDesign, OutsideDomain) as e:
        logger.debug(f"[MC] replicate {index}: functional stage failed ({e})")
        return ReplicateOutcome(index, valid=False, error=str(e))


def _two_pass(values: np.ndarray):
    """Mean and sd (ddof=1) per column, computed in two passes."""
    mean = values.sum(axis=0) / values.shape[0]
    if values.shape[0] < 2:
        return mean, None
    centred = values - mean
    sd = np.sqrt((centred**2).sum(axis=0) / (values.shape[0] - 1))
    return mean, sd


def summarize(plan: StudyPlan, outcomes: Sequence[ReplicateOutcome]) -> McReport:
    params = builtin_scenario(plan.scenario, plan.pi0, 1, 0).params
    truths = np.array([params.alpha, params.beta, params.pi, *settings.QUANTILE_LEVELS])
    valid = [o for o in sorted(outcomes, key=lambda o: o.index) if o.valid]
    m = plan.M - len(valid)
    sqrt_n = math.sqrt(plan.n)

    stats: List[EstimatorStats] = []
    if valid:
        estimates = np.vstack([o.estimates for o in valid])
        mean, sd = _two_pass(estimates)
        se_mean = None
        if plan.study == "se":
            se_mean, _ = _two_pass(np.vstack([o.std_errors for o in valid]))
        for k, name in enumerate(ESTIMATORS):
            stats.append(
                EstimatorStats(
                    estimator=name,
                    truth=float(truths[k]),
                    bias=float(mean[k] - truths[k]),
                    sd=None if sd is None else float(sd[k]),
                    sd_sqrt_n=None if sd is None or plan.study != "se" else float(sd[k] * sqrt_n),
                    mean_se_sqrt_n=None if se_mean is None else float(se_mean[k] * sqrt_n),
                )
            )

    miss_rate = None
    if plan.study == "coverage" and valid:
        miss_rate = sum(o.missed for o in valid) / len(valid)

    return McReport(
        study=plan.study,
        scenario=plan.scenario,
        pi0=plan.pi0,
        n=plan.n,
        M=plan.M,
        m=m,
        seed=plan.seed,
        replicates_N=plan.N,
        stats=stats,
        miss_rate=miss_rate,
    )


def run_study(plan: StudyPlan, threads: int = settings.DEFAULT_THREADS) -> McReport:
    if plan.M < 2:
        raise ConfigurationError(f"M must be at least 2, got {plan.M}")
    quantiles = true_quantiles(plan.scenario, plan.pi0)
    logger.info(f"[MC] {plan.study} study: {plan.scenario} pi0={plan.pi0} n={plan.n} M={plan.M} seed={plan.seed}")

    results = {"valid": 0, "invalid": 0, "errors": []}
    outcomes: Dict[int, ReplicateOutcome] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_to_index = {executor.submit(run_replicate, plan, j, quantiles): j for j in range(plan.M)}
        for future in as_completed(future_to_index):
            j = future_to_index[future]
            outcome = future.result()
            outcomes[j] = outcome
            if outcome.valid:
                results["valid"] += 1
            else:
                results["invalid"] += 1
                if outcome.error:
                    results["errors"].append(f"{j}: {outcome.error}")

    report = summarize(plan, list(outcomes.values()))
    if report.m == plan.M:
        logger.warning(f"[MC] all {plan.M} replicates invalid for {plan.scenario} pi0={plan.pi0} n={plan.n}")
    logger.info(f"[MC] Done: {results['valid']} valid, {results['invalid']} invalid (m={report.m})")
    return report


def run_bias_study(
    scenario: str,
    pi0: float,
    n: int,
    M: int,
    seed: int,
    threads: int = settings.DEFAULT_THREADS,
    identical_replicates: bool = False,
) -> McReport:
    plan = StudyPlan("bias", scenario, pi0, n, M, seed, identical_replicates=identical_replicates)
    return run_study(plan, threads)


def run_se_study(scenario: str, pi0: float, n: int, M: int, seed: int, threads: int = settings.DEFAULT_THREADS) -> McReport:
    return run_study(StudyPlan("se", scenario, pi0, n, M, seed), threads)


def run_coverage_study(
    scenario: str,
    pi0: float,
    n: int,
    M: int,
    N: int,
    seed: int,
    threads: int = settings.DEFAULT_THREADS,
    level: float = settings.DEFAULT_LEVEL,
    grid_points: int = settings.DEFAULT_GRID_POINTS,
) -> McReport:
    if N < MIN_COVERAGE_REPLICATES:
        raise ConfigurationError(f"coverage study needs N >= {MIN_COVERAGE_REPLICATES}, got {N}")
    plan = StudyPlan("coverage", scenario, pi0, n, M, seed, N=N, level=level, grid_points=grid_points)
    return run_study(plan, threads)


def run_grid(
    study: str,
    scenario: str,
    pi0s: Iterable[float],
    ns: Iterable[int],
    M: int,
    seed: int,
    N: Optional[int] = None,
    threads: int = settings.DEFAULT_THREADS,
) -> List[McReport]:
    """One report per (π₀, n) cell, in row-major order."""
    reports = []
    for pi0 in pi0s:
        for n in ns:
            if study == "bias":
                reports.append(run_bias_study(scenario, pi0, n, M, seed, threads))
            elif study == "se":
                reports.append(run_se_study(scenario, pi0, n, M, seed, threads))
            elif study == "coverage":
                reports.append(run_coverage_study(scenario, pi0, n, M, N, seed, threads))
            else:
                raise ConfigurationError(f"unknown study '{study}'")
    return reports


def reports_to_frame(reports: Sequence[McReport]) -> pd.DataFrame:
    """Flatten reports into a study table: one row per (scenario, π₀, n)."""
    rows = []
    for report in reports:
        row = {"scenario": report.scenario, "pi0": report.pi0, "n": report.n, "M": report.M, "m": report.m}
        for stat in report.stats:
            if report.study == "se":
                row[f"{stat.estimator} sd*sqrt(n)"] = stat.sd_sqrt_n
                row[f"{stat.estimator} se*sqrt(n)"] = stat.mean_se_sqrt_n
            else:
                row[f"{stat.estimator} bias"] = stat.bias
                row[f"{stat.estimator} sd"] = stat.sd
        if report.study == "coverage":
            row["miss_rate"] = report.miss_rate
        rows.append(row)
    return pd.DataFrame(rows)


def format_reports(reports: Sequence[McReport]) -> str:
    frame = reports_to_frame(reports)
    return tabulate(frame, headers="keys", tablefmt="github", showindex=False, floatfmt=".3f", missingval="-")


def write_reports(reports: Sequence[McReport], out_dir: Path, stem: str) -> List[Path]:
    """TSV in table layout plus a JSON sidecar holding the full reports."""
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = out_dir / f"{stem}.tsv"
    json_path = out_dir / f"{stem}.json"
    reports_to_frame(reports).to_csv(tsv_path, sep="\t", index=False, float_format="%.6f")
    json_path.write_text(json.dumps([r.model_dump() for r in reports], indent=2))
    logger.info(f"[MC] Wrote {tsv_path} and {json_path}")
    return [tsv_path, json_path]
