"""
Report Workbook Module.

This module exports an evaluation report to Excel format: a "Curve" sheet
with the per-K summary and an "Entries" sheet with every evaluated cell.
"""
from pathlib import Path

from openpyxl import Workbook
from openpyxl.styles import Alignment
from openpyxl.styles import Font
from openpyxl.styles import PatternFill
from openpyxl.utils import get_column_letter

from lsrpca.reduction.modules.comparison import ENTRY_FIELDS
from lsrpca.reduction.modules.comparison import EvalReport
from lsrpca.reduction.modules.exceptions import StorageError

from .curve_table import CURVE_FIELDS
from .curve_table import curve_rows

HEADER_FILL = "E6F3E6"
FAILED_FILL = "F8D7DA"


def generate_report_workbook(report: EvalReport, path: Path | str) -> Path:
    """
    Write the report workbook.

    Args:
        report: The evaluation report
        path: Destination ``.xlsx`` file

    Returns:
        The written path
    """
    path = Path(path)
    workbook = Workbook()

    # Remove default sheet
    workbook.remove(workbook.active)

    create_sheet(workbook, "Curve", CURVE_FIELDS, curve_rows(report))
    sheet = create_sheet(workbook, "Entries", ENTRY_FIELDS, [e.to_row() for e in report.entries])

    # Highlight failed cells
    status_column = ENTRY_FIELDS.index("status") + 1
    for row in sheet.iter_rows(min_row=2):
        if row[status_column - 1].value != "ok":
            for cell in row:
                cell.fill = PatternFill(start_color=FAILED_FILL, end_color=FAILED_FILL, fill_type="solid")

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        workbook.save(path)
    except OSError as e:
        raise StorageError(f"Failed to write workbook {path}: {e}") from e
    return path


def create_sheet(workbook: Workbook, title: str, headers: list[str], rows: list[dict]):
    """Add a sheet with a styled header row, one row per dict and fitted widths."""
    sheet = workbook.create_sheet(title)

    for col_num, header in enumerate(headers, 1):
        cell = sheet.cell(row=1, column=col_num)
        cell.value = header
        cell.font = Font(bold=True)
        cell.fill = PatternFill(start_color=HEADER_FILL, end_color=HEADER_FILL, fill_type="solid")
        cell.alignment = Alignment(horizontal="center")

    for row_num, row in enumerate(rows, 2):
        for col_num, header in enumerate(headers, 1):
            sheet.cell(row=row_num, column=col_num).value = row.get(header)

    sheet.freeze_panes = "A2"

    # Auto-adjust column widths
    for column_cells in sheet.columns:
        length = max(len(str(cell.value or "")) for cell in column_cells)
        sheet.column_dimensions[get_column_letter(column_cells[0].column)].width = min(length + 2, 50)
    return sheet
