"""
Curve Table Module.

Per-K summary of a report for plotting metric-versus-K curves: mean and sd
of both metrics for every method and oversampling mode, and the relative
reduction against random projection at the same K in percent.
"""
import csv
from pathlib import Path

from lsrpca.reduction.modules.comparison import EvalReport
from lsrpca.reduction.modules.exceptions import StorageError

CURVE_FIELDS = [
    "k",
    "method",
    "oversampling",
    "n",
    "mean_log_loss",
    "sd_log_loss",
    "mean_error_rate",
    "sd_error_rate",
    "error_reduction_pct",
    "log_loss_reduction_pct",
]


def _percent(value: float | None) -> float | None:
    return None if value is None else 100.0 * value


def curve_rows(report: EvalReport) -> list[dict]:
    """
    Rows of the curve table, ordered by K, then method, then mode.

    Reductions are blank for RP itself and for K values without an RP cell.
    """
    return [
        {
            "k": a.k,
            "method": a.method,
            "oversampling": a.oversampling,
            "n": a.n,
            "mean_log_loss": a.mean_log_loss,
            "sd_log_loss": a.sd_log_loss,
            "mean_error_rate": a.mean_error_rate,
            "sd_error_rate": a.sd_error_rate,
            "error_reduction_pct": _percent(a.error_reduction),
            "log_loss_reduction_pct": _percent(a.log_loss_reduction),
        }
        for a in report.aggregates()
    ]


def write_curve_csv(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=CURVE_FIELDS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(curve_rows(report))
    except OSError as e:
        raise StorageError(f"Failed to write curve table {path}: {e}") from e
    return path
