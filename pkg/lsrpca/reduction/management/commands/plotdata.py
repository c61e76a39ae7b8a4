from pathlib import Path

from django.core.management.base import CommandError

from lsrpca.exports.curve_table import write_curve_csv
from lsrpca.exports.report_files import read_report
from lsrpca.exports.workbook import generate_report_workbook
from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.models import Experiment
from lsrpca.reduction.modules.pipeline_config import ReportFormat

CURVE_FORMATS = [ReportFormat.CSV.value, ReportFormat.XLSX.value]


class Command(LsrpcaCommand):
    help = "Summarize a report per K: mean/sd of each metric and the error reduction versus random projection."

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--report", type=Path, help="report.csv or report.json written by compare")
        source.add_argument("--experiment", type=int, help="Id of a recorded experiment")
        parser.add_argument("--format", choices=CURVE_FORMATS, default=ReportFormat.CSV.value)
        parser.add_argument("--output", type=Path, help="Destination (default: curve.<format> next to the report)")

    def handle(self, *args, **options):
        if options["report"] is not None:
            report = read_report(options["report"])
            default_dir = options["report"].parent
        else:
            try:
                experiment = Experiment.objects.get(pk=options["experiment"])
            except Experiment.DoesNotExist as e:
                raise CommandError(f"No experiment with id {options['experiment']}", returncode=2) from e
            report = experiment.report()
            default_dir = Path(experiment.output_dir or ".")

        fmt = ReportFormat(options["format"])
        output = options["output"] or default_dir / f"curve.{fmt.value}"
        if fmt is ReportFormat.CSV:
            path = write_curve_csv(report, output)
        else:
            path = generate_report_workbook(report, output)
        self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
