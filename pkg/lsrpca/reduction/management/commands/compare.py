from dataclasses import replace
from pathlib import Path

from lsrpca.exports.curve_table import curve_rows
from lsrpca.exports.report_files import write_reports
from lsrpca.reduction.forms import load_pipeline_config
from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.models import Experiment
from lsrpca.reduction.models import ExperimentStatus
from lsrpca.reduction.modules.pipeline import run_pipeline
from lsrpca.reduction.tasks import run_experiment


class Command(LsrpcaCommand):
    help = "Run a comparison sweep described by a pipeline config file and write its report."

    def add_arguments(self, parser):
        parser.add_argument("--config", type=Path, required=True, help="Pipeline config (INI) file")
        parser.add_argument("--output", type=Path, help="Report directory (overrides [output] dir)")
        parser.add_argument("--record", action="store_true", help="Also store the sweep in the experiment database")
        parser.add_argument("--name", help="Experiment name when recording (default: config file stem)")
        self.add_seed_argument(parser, "Root seed (overrides [evaluation] seed)")

    def handle(self, *args, **options):
        config = load_pipeline_config(options["config"])
        if options["seed"] is not None:
            config = config.with_seed(options["seed"])
        if options["output"] is not None:
            config = replace(config, output_dir=options["output"])

        if options["record"]:
            self._record(config, options)
            return

        report = run_pipeline(config)
        for path in write_reports(report, config.output_dir, config.formats):
            self.stdout.write(f"Wrote {path}")
        for row in curve_rows(report):
            reduction = row["error_reduction_pct"]
            note = "" if reduction is None else f" ({reduction:+.1f}% vs rp)"
            self.stdout.write(
                f"K={row['k']:<4} {row['method']:<14} {row['oversampling']:<10} "
                f"error {row['mean_error_rate']:.4f} log-loss {row['mean_log_loss']:.4f}{note}",
            )
        if report.failed:
            self.stderr.write(self.style.WARNING(f"{len(report.failed)} of {len(report.entries)} cells failed"))

    def _record(self, config, options) -> None:
        experiment = Experiment.objects.create(
            name=options["name"] or options["config"].stem,
            config_text=options["config"].read_text(),
            config_dir=str(options["config"].resolve().parent),
            root_seed=config.root_seed,
            output_dir=str(config.output_dir),
        )
        result = run_experiment.delay(experiment.pk)
        if not result.ready():
            self.stdout.write(f"Queued experiment {experiment.pk} as task {result.id}")
            return
        experiment.refresh_from_db()
        if experiment.status == ExperimentStatus.FAILED.value:
            self.stderr.write(self.style.ERROR(f"Experiment {experiment.pk} failed: {experiment.error_message}"))
            return
        summary = result.get()
        self.stdout.write(
            self.style.SUCCESS(
                f"Experiment {experiment.pk} completed: {summary['cells']} cells, {summary['failed']} failed, "
                f"reports in {experiment.output_dir}",
            ),
        )
