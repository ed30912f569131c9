import json
from dataclasses import replace

import pandas as pd
import pytest

import cli
from euclidean import fit_euclidean
from model_core import EuclideanParams
from tests.conftest import D0


@pytest.fixture
def d0_csv(tmp_path):
    path = tmp_path / "d0.csv"
    path.write_text("x,y\n" + "\n".join(f"{x},{y}" for x, y in D0) + "\n")
    return path


def _run(tmp_path, *argv):
    out = tmp_path / "out"
    return cli.main([*argv, "--out-dir", str(out), "--threads", "1"]), out


def test_fit_d0(tmp_path, d0_csv):
    code, out = _run(tmp_path, "fit", "--input", str(d0_csv), "--known", "normal 1")
    assert code == 0
    report = json.loads((out / "fit.json").read_text())
    assert report["alpha"] == pytest.approx(2.0, abs=1e-10)
    assert report["beta"] == pytest.approx(1.0, abs=1e-10)
    assert report["pi"] == pytest.approx(1.0, abs=1e-10)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "fit"
    assert str(out / "fit.json") in manifest["outputs"]


def test_fit_reports_lambda_family_and_sigma_star(tmp_path):
    code, out = _run(tmp_path, "fit", "--scenario", "WOn", "--n", "2000", "--lambda-family", "--sigma-star")
    assert code == 0
    report = json.loads((out / "fit.json").read_text())
    assert len(report["lambda_family"]) == 9
    assert report["sigma_star_sq"] is not None or report["sigma_star_reason"]


def test_simulate_is_reproducible(tmp_path):
    code_a, out_a = _run(tmp_path / "a", "simulate", "--scenario", "MOg", "--pi0", "0.4", "--n", "200", "--seed", "3")
    code_b, out_b = _run(tmp_path / "b", "simulate", "--scenario", "MOg", "--pi0", "0.4", "--n", "200", "--seed", "3")
    assert code_a == code_b == 0
    name = "MOg_pi0.4_n200_seed3.csv"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_cdf_with_truth(tmp_path):
    code, out = _run(tmp_path, "cdf", "--scenario", "WOn", "--n", "1000", "--grid-points", "30", "--with-truth", "--force")
    assert code == 0
    frame = pd.read_csv(out / "cdf.tsv", sep="\t")
    assert list(frame.columns) == ["t", "F_n", "clamped", "se", "F"]
    assert len(frame) == 30


def test_pdf_output(tmp_path):
    code, out = _run(tmp_path, "pdf", "--scenario", "WOn", "--n", "1000", "--bandwidth", "scale", "--force")
    assert code == 0
    frame = pd.read_csv(out / "pdf.tsv", sep="\t")
    assert (frame["clamped"] >= 0).all()


def test_band_contains_estimate(tmp_path):
    code, out = _run(tmp_path, "band", "--scenario", "WOn", "--n", "500", "--N", "50", "--dump-sup-stats", "--force")
    assert code == 0
    frame = pd.read_csv(out / "band.tsv", sep="\t")
    assert (frame["band_lo_raw"] <= frame["F_n"]).all() and (frame["F_n"] <= frame["band_hi_raw"]).all()
    assert (frame["band_lo"] <= frame["clamped"]).all() and (frame["clamped"] <= frame["band_hi"]).all()
    assert len(pd.read_csv(out / "sup_stats.tsv", sep="\t")) == 50


def _invalid_pi_fit(data):
    fit = fit_euclidean(data)
    return replace(fit, params=EuclideanParams(fit.params.alpha, fit.params.beta, 1.3), pi_valid=False)


def test_guard_blocks_functional_estimates(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "fit_euclidean", _invalid_pi_fit)
    code, out = _run(tmp_path, "cdf", "--scenario", "WOn", "--n", "500")
    assert code == 6
    assert not (out / "cdf.tsv").exists()


def test_force_overrides_guard(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "fit_euclidean", _invalid_pi_fit)
    code, out = _run(tmp_path, "cdf", "--scenario", "WOn", "--n", "500", "--force")
    assert code == 0
    assert (out / "cdf.tsv").exists()


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["fit", "--scenario", "XYz"], 2),
        (["fit"], 2),
        (["mc", "--scenario", "WOn", "--M", "1"], 2),
        (["simulate", "--scenario", "WOn", "--pi0", "0.4,0.7"], 2),
    ],
)
def test_configuration_exit_codes(tmp_path, argv, expected):
    code, _ = _run(tmp_path, *argv)
    assert code == expected


def test_bad_known_spec_with_input(tmp_path, d0_csv):
    code, _ = _run(tmp_path, "fit", "--input", str(d0_csv), "--known", "cauchy:1")
    assert code == 2


def test_missing_input_file(tmp_path):
    code, _ = _run(tmp_path, "fit", "--input", str(tmp_path / "missing.csv"))
    assert code == 3


def test_non_finite_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n2,nan\n3,4\n")
    code, _ = _run(tmp_path, "fit", "--input", str(path))
    assert code == 3


def test_constant_x_is_degenerate(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("x,y\n" + "\n".join(f"1,{y}" for y in range(10)) + "\n")
    code, _ = _run(tmp_path, "fit", "--input", str(path))
    assert code == 4


def test_mc_then_export(tmp_path):
    code, out = _run(tmp_path, "mc", "--scenario", "WOn", "--pi0", "0.7", "--n", "300", "--M", "3")
    assert code == 0
    sidecar = out / "mc_bias_WOn.json"
    assert json.loads(sidecar.read_text())[0]["M"] == 3

    pytest.importorskip("openpyxl")
    workbook = tmp_path / "tables.xlsx"
    code, _ = _run(tmp_path, "export", "--reports", str(out), "--out", str(workbook))
    assert code == 0
    assert workbook.exists()
