import json

import numpy as np
import pytest
from scipy.stats import norm

from errors import ConfigurationError
from export_tables import collect_reports
from mc_harness import (
    ESTIMATORS,
    ReplicateOutcome,
    StudyPlan,
    format_reports,
    reports_to_frame,
    run_bias_study,
    run_coverage_study,
    run_se_study,
    summarize,
    true_quantiles,
    write_reports,
)
from simulator import builtin_scenario


def test_true_quantiles():
    np.testing.assert_allclose(true_quantiles("WOn", 0.7), norm.ppf([0.1, 0.5, 0.9]))
    law_cdf = builtin_scenario("MOg", 0.7, 1, 0).eps_law.cdf
    np.testing.assert_allclose(law_cdf(true_quantiles("MOg", 0.7)), [0.1, 0.5, 0.9], atol=1e-9)


def test_identical_replicates_have_zero_spread():
    report = run_bias_study("WOn", 0.4, 2000, 2, seed=17, threads=1, identical_replicates=True)
    assert report.m == 0
    assert [s.estimator for s in report.stats] == list(ESTIMATORS)
    for stat in report.stats:
        assert stat.sd == pytest.approx(0.0, abs=1e-12)


def test_study_is_deterministic_across_threads():
    one = run_bias_study("MOn", 0.7, 300, 6, seed=5, threads=1)
    three = run_bias_study("MOn", 0.7, 300, 6, seed=5, threads=3)
    assert one.model_dump() == three.model_dump()


def test_invalid_replicates_are_counted():
    report = run_bias_study("SOe", 0.7, 100, 50, seed=2, threads=2)
    assert 0 < report.m <= report.M


def test_se_study_reports_both_columns():
    report = run_se_study("WOn", 0.7, 500, 5, seed=3, threads=2)
    valid = report.M - report.m
    if valid >= 2:
        for stat in report.stats:
            assert stat.sd_sqrt_n >= 0
            assert stat.mean_se_sqrt_n > 0


def test_coverage_study_miss_rate():
    report = run_coverage_study("WOn", 0.7, 300, 4, N=20, seed=1, threads=2)
    assert report.replicates_N == 20
    if report.m < report.M:
        assert 0.0 <= report.miss_rate <= 1.0


def test_coverage_needs_enough_replicates():
    with pytest.raises(ConfigurationError):
        run_coverage_study("WOn", 0.7, 300, 4, N=10, seed=1)


def test_study_needs_two_replicates():
    with pytest.raises(ConfigurationError):
        run_bias_study("WOn", 0.7, 300, 1, seed=1)


def _outcome(index, valid, values=None):
    return ReplicateOutcome(index, valid, None if values is None else np.asarray(values, dtype=float))


def test_summary_excludes_invalid_replicates():
    plan = StudyPlan("bias", "WOn", 0.7, 100, 4, 0)
    good = [np.arange(6.0), np.arange(6.0) + 2.0, np.arange(6.0) * 3.0]
    outcomes = [_outcome(0, True, good[0]), _outcome(1, False), _outcome(2, True, good[1]), _outcome(3, True, good[2])]
    report = summarize(plan, outcomes)

    stacked = np.vstack(good)
    mean = stacked.sum(axis=0) / 3
    sd = np.sqrt(((stacked - mean) ** 2).sum(axis=0) / 2)
    truths = [2.0, 1.0, 0.7, 0.1, 0.5, 0.9]
    assert report.m == 1
    assert [s.bias for s in report.stats] == [float(mean[k] - truths[k]) for k in range(6)]
    assert [s.sd for s in report.stats] == [float(v) for v in sd]


def test_summary_with_all_replicates_invalid():
    plan = StudyPlan("bias", "WOn", 0.7, 100, 3, 0)
    report = summarize(plan, [_outcome(j, False) for j in range(3)])
    assert report.m == 3
    assert report.stats == []


def test_reports_round_trip_through_files(tmp_path):
    reports = [run_bias_study("WOn", 0.7, 300, 3, seed=9, threads=1)]
    tsv, sidecar = write_reports(reports, tmp_path, "bias_WOn")
    assert tsv.exists()
    assert json.loads(sidecar.read_text())[0]["study"] == "bias"
    assert collect_reports([tmp_path]) == reports
    frame = reports_to_frame(reports)
    assert {"scenario", "pi0", "n", "M", "m"} <= set(frame.columns)
    assert "alpha bias" in format_reports(reports)
