"""
Report Files Module.

Writes an evaluation report as a CSV table (one row per cell) and as a JSON
document (cells plus aggregates), and reads either back. Output is
byte-identical for identical reports.
"""
import csv
import json
import logging
from pathlib import Path

from lsrpca.reduction.modules.comparison import ENTRY_FIELDS
from lsrpca.reduction.modules.comparison import EvalEntry
from lsrpca.reduction.modules.comparison import EvalReport
from lsrpca.reduction.modules.exceptions import StorageError
from lsrpca.reduction.modules.pipeline_config import ReportFormat

from .workbook import generate_report_workbook

logger = logging.getLogger(__name__)

REPORT_STEM = "report"


def write_report_csv(report: EvalReport, path: Path | str) -> Path:
    """
    Write one CSV row per evaluated cell.

    Args:
        report: The evaluation report
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=ENTRY_FIELDS, lineterminator="\n")
            writer.writeheader()
            for entry in report.entries:
                writer.writerow(entry.to_row())
    except OSError as e:
        raise StorageError(f"Failed to write report {path}: {e}") from e
    return path


def write_report_json(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Failed to write report {path}: {e}") from e
    return path


def _read_csv_report(path: Path) -> EvalReport:
    with path.open(newline="", encoding="utf-8") as handle:
        entries = [EvalEntry.from_row(row) for row in csv.DictReader(handle)]
    folds = max((e.fold for e in entries), default=0) + 1
    return EvalReport(entries=entries, n_folds=folds)


def read_report(path: Path | str) -> EvalReport:
    """
    Load a report written by ``write_report_csv`` or ``write_report_json``.

    Raises:
        StorageError: If the file is missing or not a report
    """
    path = Path(path)
    try:
        if path.suffix == ".json":
            return EvalReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
        return _read_csv_report(path)
    except OSError as e:
        raise StorageError(f"Cannot read report {path}: {e}") from e
    except (KeyError, ValueError, TypeError) as e:
        raise StorageError(f"{path} is not an evaluation report: {e}") from e


def write_reports(report: EvalReport, output_dir: Path | str, formats) -> list[Path]:
    """Write the report in every requested format under ``output_dir``."""
    output_dir = Path(output_dir)
    written = []
    for fmt in formats:
        fmt = ReportFormat(fmt)
        target = output_dir / f"{REPORT_STEM}.{fmt.value}"
        if fmt is ReportFormat.CSV:
            written.append(write_report_csv(report, target))
        elif fmt is ReportFormat.JSON:
            written.append(write_report_json(report, target))
        else:
            written.append(generate_report_workbook(report, target))
    logger.info(f"Wrote {len(report.entries)} report cells to {', '.join(str(p) for p in written)}")
    return written
