import json

import pandas as pd
import pytest

from errors import ConfigurationError
from export_tables import collect_reports, export_to_csv, export_to_excel
from schemas import EstimatorStats, McReport
from stage_metrics import StageTimer


def _report(study: str, n: int, miss_rate=None) -> McReport:
    stats = [EstimatorStats(estimator="alpha", truth=2.0, bias=0.01, sd=0.2, sd_sqrt_n=None, mean_se_sqrt_n=None)]
    if study == "se":
        stats = [EstimatorStats(estimator="alpha", truth=2.0, bias=0.01, sd=0.2, sd_sqrt_n=4.5, mean_se_sqrt_n=4.4)]
    return McReport(study=study, scenario="WOn", pi0=0.7, n=n, M=10, m=1, seed=0, stats=stats, miss_rate=miss_rate)


def test_collect_skips_manifests_in_directories(tmp_path):
    (tmp_path / "mc_bias_WOn.json").write_text(json.dumps([_report("bias", 100).model_dump()]))
    (tmp_path / "manifest.json").write_text(json.dumps({"command": "mc"}))
    reports = collect_reports([tmp_path])
    assert len(reports) == 1 and reports[0].n == 100


def test_collect_rejects_explicit_non_report(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"command": "mc"}))
    with pytest.raises(ConfigurationError):
        collect_reports([path])


def test_collect_rejects_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        collect_reports([tmp_path / "absent.json"])


def test_csv_export_one_file_per_study(tmp_path):
    reports = [_report("bias", 100), _report("bias", 300), _report("coverage", 100, miss_rate=0.05)]
    written = export_to_csv(reports, tmp_path)
    assert sorted(p.name for p in written) == ["bias.csv", "coverage.csv"]
    bias = pd.read_csv(tmp_path / "bias.csv")
    assert list(bias["n"]) == [100, 300]
    assert pd.read_csv(tmp_path / "coverage.csv")["miss_rate"].iloc[0] == 0.05


def test_excel_export_sheets(tmp_path):
    openpyxl = pytest.importorskip("openpyxl")
    path = export_to_excel([_report("bias", 100), _report("se", 5000)], tmp_path / "tables.xlsx")
    workbook = openpyxl.load_workbook(path)
    assert workbook.sheetnames == ["bias", "se"]
    header = [cell.value for cell in workbook["se"][1]]
    assert "alpha sd*sqrt(n)" in header and "alpha se*sqrt(n)" in header


def test_stage_timer_records_stages():
    timer = StageTimer()
    with timer.stage("fit"):
        pass
    with pytest.raises(RuntimeError):
        with timer.stage("band"):
            raise RuntimeError("boom")
    assert [t.stage for t in timer.timings] == ["fit", "band"]
    assert timer.total_seconds >= 0
    assert timer.peak_rss_mb > 0
    assert timer.summary_rows()[0][0] == "fit"
