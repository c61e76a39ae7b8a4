import logging
from dataclasses import replace
from pathlib import Path

from celery import shared_task
from django.db import transaction
from django.utils import timezone

from lsrpca.exports.report_files import write_reports

from .forms import parse_pipeline_config
from .models import Experiment
from .models import ExperimentCell
from .models import ExperimentStatus
from .modules.exceptions import LsrpcaError
from .modules.pipeline import run_pipeline

logger = logging.getLogger(__name__)


@shared_task()
def run_experiment(experiment_id: int) -> dict:
    """
    Run a recorded experiment and store one cell per evaluated combination.

    Toolkit errors mark the experiment FAILED instead of failing the task;
    cell failures inside the sweep are recorded on the cells themselves.
    """
    experiment = Experiment.objects.get(pk=experiment_id)
    experiment.status = ExperimentStatus.RUNNING.value
    experiment.started_at = timezone.now()
    experiment.save(update_fields=["status", "started_at"])

    try:
        config = parse_pipeline_config(experiment.config_text, experiment.base_dir).with_seed(experiment.root_seed)
        if experiment.output_dir:
            config = replace(config, output_dir=Path(experiment.output_dir))
        report = run_pipeline(config)
        write_reports(report, config.output_dir, config.formats)
    except LsrpcaError as e:
        logger.error(f"Experiment {experiment.pk} ({experiment.name}) failed: {e}")
        experiment.status = ExperimentStatus.FAILED.value
        experiment.error_message = str(e)
        experiment.finished_at = timezone.now()
        experiment.save(update_fields=["status", "error_message", "finished_at"])
        return {"experiment": experiment.pk, "status": experiment.status, "cells": 0, "failed": 0}

    with transaction.atomic():
        experiment.cells.all().delete()
        ExperimentCell.objects.bulk_create(ExperimentCell.from_entry(experiment, e) for e in report.entries)
        experiment.status = ExperimentStatus.COMPLETED.value
        experiment.output_dir = str(config.output_dir)
        experiment.finished_at = timezone.now()
        experiment.save(update_fields=["status", "output_dir", "finished_at"])

    logger.info(f"Experiment {experiment.pk} completed with {len(report.entries)} cells")
    return {
        "experiment": experiment.pk,
        "status": experiment.status,
        "cells": len(report.entries),
        "failed": len(report.failed),
    }
