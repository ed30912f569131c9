"""Collect Monte Carlo JSON sidecars into one workbook, one sheet per study kind."""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

from pydantic import ValidationError

from errors import ConfigurationError
from mc_harness import reports_to_frame
from schemas import McReport

try:
    from openpyxl import Workbook

    HAS_OPENPYXL = True
except ImportError:
    HAS_OPENPYXL = False

logger = logging.getLogger(__name__)

STUDY_SHEETS = ("bias", "se", "coverage")


def collect_reports(paths: Iterable[Union[str, Path]]) -> List[McReport]:
    """
    Load McReports from JSON sidecars. Directories are searched for *.json; files found
    there that are not report lists (run manifests) are skipped.

    Raises:
        ConfigurationError: a file is not a list of valid reports.
    """
    files: List[Tuple[Path, bool]] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend((f, True) for f in sorted(p.glob("*.json")))
        else:
            files.append((p, False))

    reports = []
    for path, scanned in files:
        try:
            payload = json.loads(path.read_text())
            if scanned and not isinstance(payload, list):
                logger.debug(f"[EXPORT] Skipping {path.name}: not a report list")
                continue
            if isinstance(payload, dict):
                payload = [payload]
            reports.extend(McReport.model_validate(item) for item in payload)
        except (OSError, json.JSONDecodeError, ValidationError, TypeError) as e:
            raise ConfigurationError(f"{path} is not a Monte Carlo report: {e}")
    logger.info(f"[EXPORT] Collected {len(reports)} reports from {len(files)} file(s)")
    return reports


def _by_study(reports: Iterable[McReport]) -> Dict[str, List[McReport]]:
    grouped: Dict[str, List[McReport]] = {study: [] for study in STUDY_SHEETS}
    for report in reports:
        grouped[report.study].append(report)
    return {study: items for study, items in grouped.items() if items}


def export_to_csv(reports: Iterable[McReport], output_dir: Union[str, Path]) -> List[Path]:
    """CSV fallback: one file per study kind."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for study, items in _by_study(reports).items():
        path = output_dir / f"{study}.csv"
        reports_to_frame(items).to_csv(path, index=False)
        logger.info(f"[EXPORT] ✓ {study}.csv: {len(items)} rows")
        written.append(path)
    return written


def export_to_excel(reports: Iterable[McReport], output: Union[str, Path]) -> Union[Path, List[Path]]:
    """Write one sheet per study kind; falls back to CSV beside `output` without openpyxl."""
    output = Path(output)
    reports = list(reports)
    if not HAS_OPENPYXL:
        logger.warning("[EXPORT] openpyxl not installed, falling back to CSV export")
        return export_to_csv(reports, output.parent)

    output.parent.mkdir(parents=True, exist_ok=True)
    wb = Workbook()
    wb.remove(wb.active)

    total = 0
    for study, items in _by_study(reports).items():
        frame = reports_to_frame(items)
        ws = wb.create_sheet(title=study)
        ws.append(list(frame.columns))
        for row in frame.itertuples(index=False):
            ws.append([None if v != v else v for v in row])  # NaN -> empty cell
        logger.info(f"[EXPORT] ✓ {study}: {len(frame)} rows")
        total += len(frame)

    if not wb.sheetnames:
        wb.create_sheet(title="empty")
    wb.save(output.as_posix())
    logger.info(f"[EXPORT] ✓ {output.name}: {total} rows -> {output}")
    return output
