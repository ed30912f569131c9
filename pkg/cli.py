"""
knownmix command line.

    python cli.py fit --input tone.csv --known normal:0.079 --transform 0,1
    python cli.py band --scenario WOn --pi0 0.7 --n 500 --N 1000 --with-truth
    python cli.py mc --scenario SOe --pi0 0.4,0.7 --n 100,300,1000 --M 1000
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tabulate import tabulate

import settings
from bootstrap import BandResult, band
from density import DensityFit, f_n_pdf_grid
from errors import ConfigurationError, GuardTripped, KnownMixError
from euclidean import EuclideanFit, fit_euclidean, lambda_param_family, sigma_star_diagnostic
from export_tables import collect_reports, export_to_excel
from functional import FunctionalFit, default_grid, estimate_functional
from mc_harness import format_reports, run_grid, write_reports
from model_core import Dataset, KnownComponent, load_dataset
from moments import accumulate_moments, fit_lambda
from schemas import BootstrapConfig, DensityConfig, EstimationSettings, FitReport, RunManifest
from simulator import ScenarioConfig, builtin_scenario, simulate, write_csv
from stage_metrics import StageTimer

logger = logging.getLogger(__name__)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_argument_group("data source")
    source.add_argument("--input", type=Path, help="CSV of (x, y) or (x, raw y) pairs")
    source.add_argument("--scenario", help="built-in scenario: WOn, WOg, WOe, MOn, ..., SOe")
    source.add_argument("--pi0", type=_floats, default=[0.7], help="mixing proportion(s), comma-separated")
    source.add_argument("--n", type=_ints, default=[1000], help="sample size(s), comma-separated")
    source.add_argument("--seed", type=int, default=0)
    source.add_argument("--known", default="normal:1", help="known error law (normal:<sd> | gamma:<shape>:<rate>:<var> | exp:<var> | table:<path>)")
    source.add_argument("--transform", type=_floats, default=[0.0, 0.0], help="alpha*,beta* of the known line")

    est = common.add_argument_group("estimation")
    est.add_argument("--grid-points", type=int, default=settings.DEFAULT_GRID_POINTS)
    est.add_argument("--bandwidth", choices=("plugin", "scale", "fixed"), default="plugin")
    est.add_argument("--h", type=float, help="bandwidth for --bandwidth fixed")
    est.add_argument("--no-density", action="store_true", help="differentiate F_n instead of using f_n in the influence function")
    est.add_argument("--N", type=int, default=settings.DEFAULT_REPLICATES, help="bootstrap replicates")
    est.add_argument("--level", type=float, default=settings.DEFAULT_LEVEL, help="p; the band has level 1-p")
    est.add_argument("--force", action="store_true", help="estimate F_n/f_n even when pi_n is outside (0, 1]")

    out = common.add_argument_group("output")
    out.add_argument("--out-dir", type=Path, default=Path("knownmix_out"))
    out.add_argument("--threads", type=int, default=settings.DEFAULT_THREADS)
    out.add_argument("--with-truth", action="store_true", help="add the true F/f columns (scenario runs)")
    out.add_argument("--with-latent", action="store_true", help="simulate: include the latent z column")
    out.add_argument("--lambda-family", action="store_true", help="fit: report the 27 lambda-based estimators")
    out.add_argument("--sigma-star", action="store_true", help="fit: report the sigma* moment diagnostic")
    out.add_argument("--dump-sup-stats", action="store_true", help="band: write the bootstrap sup statistics")
    out.add_argument("--log-level", default=settings.LOG_LEVEL)

    parser = argparse.ArgumentParser(prog="knownmix", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fit", "cdf", "pdf", "band", "simulate"):
        sub.add_parser(name, parents=[common])

    mc = sub.add_parser("mc", parents=[common])
    mc.add_argument("--M", type=int, default=1000, help="Monte Carlo replicates")
    study = mc.add_mutually_exclusive_group()
    study.add_argument("--se", action="store_true", help="standard-error study")
    study.add_argument("--coverage", action="store_true", help="band coverage study")

    export = sub.add_parser("export", parents=[common])
    export.add_argument("--reports", type=Path, nargs="+", required=True, help="JSON sidecars or directories")
    export.add_argument("--out", type=Path, default=Path("knownmix_tables.xlsx"))
    return parser


class Run:
    """State shared by the subcommands of one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.timer = StageTimer()
        self.outputs: List[Path] = []
        self.scenario: Optional[ScenarioConfig] = None
        self.known: Optional[KnownComponent] = None

    def single(self, values: list, flag: str):
        if len(values) != 1:
            raise ConfigurationError(f"{self.args.command} takes a single {flag} value, got {values}")
        return values[0]

    def load(self) -> Dataset:
        args = self.args
        with self.timer.stage("ingest"):
            if args.input is not None:
                self.known = KnownComponent.from_spec(args.known, args.transform)
                return load_dataset(args.input, self.known)
            if args.scenario is not None:
                self.scenario = builtin_scenario(
                    args.scenario, self.single(args.pi0, "--pi0"), self.single(args.n, "--n"), args.seed
                )
                self.known = self.scenario.known
                return simulate(self.scenario)
        raise ConfigurationError("give --input <csv> or --scenario <name>")

    def fit(self, data: Dataset) -> EuclideanFit:
        with self.timer.stage("fit"):
            fit = fit_euclidean(data)
        p, se = fit.params, fit.std_errors
        logger.info(
            f"[FIT] alpha={p.alpha:.4f} ({se[0]:.4f}) beta={p.beta:.4f} ({se[1]:.4f}) pi={p.pi:.4f} ({se[2]:.4f})"
        )
        if not fit.pi_valid:
            logger.warning(f"[FIT] pi_n = {p.pi:.4f} is outside (0, 1]")
        return fit

    def guard(self, fit: EuclideanFit) -> None:
        if not fit.pi_valid and not self.args.force:
            raise GuardTripped(f"pi_n = {fit.params.pi:.4f} is outside (0, 1]; rerun with --force to estimate F_n anyway")

    def density_config(self) -> DensityConfig:
        return DensityConfig(bandwidth=self.args.bandwidth, h=self.args.h)

    def functional(self, data: Dataset, fit: EuclideanFit) -> Tuple[FunctionalFit, Optional[DensityFit], np.ndarray]:
        grid = default_grid(data, fit, self.args.grid_points)
        options = EstimationSettings(use_density=not self.args.no_density)
        with self.timer.stage("cdf"):
            return estimate_functional(data, self.known, fit, grid, self.density_config(), options)

    def truth_columns(self, frame: pd.DataFrame, column: str, kind: str) -> None:
        if not self.args.with_truth:
            return
        if self.scenario is None:
            logger.warning("[EXPORT] --with-truth needs --scenario; no truth columns written")
            return
        law = self.scenario.eps_law
        frame[column] = law.cdf(frame["t"].to_numpy()) if kind == "cdf" else law.pdf(frame["t"].to_numpy())

    def write_tsv(self, frame: pd.DataFrame, name: str) -> Path:
        path = self.args.out_dir / name
        frame.to_csv(path, sep="\t", index=False, float_format="%.10g")
        self.outputs.append(path)
        logger.info(f"[EXPORT] ✓ {name}: {len(frame)} rows")
        return path

    def manifest(self) -> Path:
        args = self.args
        boot = None
        if args.command == "band":
            boot = BootstrapConfig(replicates=args.N, level=args.level, seed=args.seed, threads=args.threads)
        path = args.out_dir / "manifest.json"
        self.outputs.append(path)
        manifest = RunManifest(
            command=args.command,
            input_path=str(args.input) if args.input else None,
            scenario=args.scenario,
            known_spec=self.known.f_star.describe() if self.known else args.known,
            transform=list(args.transform),
            grid_points=args.grid_points if args.command in ("cdf", "pdf", "band") else None,
            bootstrap=boot,
            seed=args.seed,
            outputs=[str(p) for p in self.outputs],
            timings=self.timer.timings,
        )
        path.write_text(manifest.model_dump_json(indent=2))
        return path


def cmd_fit(run: Run) -> None:
    args = run.args
    data = run.load()
    fit = run.fit(data)
    report = FitReport(
        n=data.n,
        alpha=fit.params.alpha,
        beta=fit.params.beta,
        pi=fit.params.pi,
        std_errors=fit.std_errors.tolist(),
        pi_valid=fit.pi_valid,
        gamma=fit.gamma.gamma.tolist(),
        sigma=fit.sigma.tolist(),
    )

    moments = None
    if args.lambda_family or args.sigma_star:
        moments = accumulate_moments(data)
    if args.lambda_family:
        family = lambda_param_family(fit_lambda(moments))
        report.lambda_family = family.as_dict()
    if args.sigma_star:
        estimate = sigma_star_diagnostic(moments)
        report.sigma_star_sq = estimate.value
        report.sigma_star_reason = estimate.reason

    path = args.out_dir / "fit.json"
    path.write_text(report.model_dump_json(indent=2))
    run.outputs.append(path)

    rows = [[name, value, se] for name, value, se in zip(("alpha", "beta", "pi"), fit.params.as_tuple(), fit.std_errors)]
    print("\n" + "=" * 60)
    print(f"FIT (n={data.n}, pi_valid={fit.pi_valid})")
    print("=" * 60)
    print(tabulate(rows, headers=["param", "estimate", "std. error"], tablefmt="github", floatfmt=".4f"))
    print(f"\ngamma_n = {np.array2string(fit.gamma.gamma, precision=5)}")
    if report.lambda_family is not None:
        family_rows = []
        for idx, params in family.combinations():
            cells = ["undefined"] * 3 if params is None else [f"{v:.4f}" for v in params.as_tuple()]
            family_rows.append(["".join(map(str, idx)), *cells])
        print(tabulate(family_rows, headers=["(i,j,k)", "alpha", "beta", "pi"], tablefmt="github"))
    if args.sigma_star:
        shown = "undefined" if report.sigma_star_sq is None else f"{report.sigma_star_sq:.4f}"
        print(f"\nsigma*^2 diagnostic (unstable): {shown}" + (f" [{report.sigma_star_reason}]" if report.sigma_star_reason else ""))


def _cdf_frame(functional: FunctionalFit) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": functional.grid.points,
            "F_n": functional.f_raw,
            "clamped": functional.f_clamped,
            "se": functional.se,
        }
    )


def cmd_cdf(run: Run) -> None:
    data = run.load()
    fit = run.fit(data)
    run.guard(fit)
    functional, _, _ = run.functional(data, fit)
    frame = _cdf_frame(functional)
    run.truth_columns(frame, "F", "cdf")
    run.write_tsv(frame, "cdf.tsv")


def cmd_pdf(run: Run) -> None:
    data = run.load()
    fit = run.fit(data)
    run.guard(fit)
    grid = default_grid(data, fit, run.args.grid_points)
    with run.timer.stage("pdf"):
        density = f_n_pdf_grid(data, run.known, fit, grid.points, run.density_config())
    logger.info(f"[PDF] h={density.bandwidth:.4g}, integral of max(f_n, 0) = {density.integral:.3f}")
    frame = pd.DataFrame({"t": density.grid, "f_n": density.f_raw, "clamped": density.f_clamped})
    run.truth_columns(frame, "f", "pdf")
    run.write_tsv(frame, "pdf.tsv")


def cmd_band(run: Run) -> None:
    args = run.args
    data = run.load()
    fit = run.fit(data)
    run.guard(fit)
    functional, _, influence = run.functional(data, fit)
    cfg = BootstrapConfig(replicates=args.N, level=args.level, seed=args.seed, threads=args.threads)
    with run.timer.stage("band"):
        result: BandResult = band(data, run.known, fit, fit.gamma, functional.grid, functional, cfg, influence=influence)
    logger.info(f"[BAND] level {1 - args.level:.2f} band, N={args.N}, halfwidth={result.halfwidth:.5f}")

    frame = _cdf_frame(functional)
    frame["band_lo"] = result.band_lo_clamped
    frame["band_hi"] = result.band_hi_clamped
    frame["band_lo_raw"] = result.band_lo
    frame["band_hi_raw"] = result.band_hi
    run.truth_columns(frame, "F", "cdf")
    run.write_tsv(frame, "band.tsv")
    if args.dump_sup_stats:
        run.write_tsv(pd.DataFrame({"replicate": np.arange(1, args.N + 1), "sup_stat": result.sup_stats}), "sup_stats.tsv")


def cmd_simulate(run: Run) -> None:
    args = run.args
    if args.scenario is None:
        raise ConfigurationError("simulate needs --scenario")
    data = run.load()
    name = f"{args.scenario}_pi{run.scenario.params.pi:g}_n{data.n}_seed{args.seed}.csv"
    with run.timer.stage("write"):
        run.outputs.append(write_csv(data, args.out_dir / name, with_latent=args.with_latent))


def cmd_mc(run: Run) -> None:
    args = run.args
    if args.scenario is None:
        raise ConfigurationError("mc needs --scenario")
    study = "coverage" if args.coverage else "se" if args.se else "bias"
    with run.timer.stage(f"mc-{study}"):
        reports = run_grid(study, args.scenario, args.pi0, args.n, args.M, args.seed, N=args.N, threads=args.threads)
    run.outputs.extend(write_reports(reports, args.out_dir, f"mc_{study}_{args.scenario}"))
    print("\n" + "=" * 60)
    print(f"MONTE CARLO {study.upper()} STUDY: {args.scenario}")
    print("=" * 60)
    print(format_reports(reports))


def cmd_export(run: Run) -> None:
    reports = collect_reports(run.args.reports)
    with run.timer.stage("export"):
        written = export_to_excel(reports, run.args.out)
    run.outputs.extend(written if isinstance(written, list) else [written])


HANDLERS = {
    "fit": cmd_fit,
    "cdf": cmd_cdf,
    "pdf": cmd_pdf,
    "band": cmd_band,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "export": cmd_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    settings.configure_logging(args.out_dir / "knownmix.log", args.log_level.upper())

    run = Run(args)
    try:
        HANDLERS[args.command](run)
        run.manifest()
    except KnownMixError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"ConfigurationError: {e}")
        return ConfigurationError.exit_code

    if run.timer.timings:
        print("\n" + tabulate(run.timer.summary_rows(), headers=["stage", "seconds", "rss MB"], tablefmt="github"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
