"""
Reduction app models.

An ``Experiment`` is one recorded comparison sweep: the pipeline config text it
ran with and one ``ExperimentCell`` per evaluated (method, K, mode, seed, fold).
"""
from enum import Enum
from pathlib import Path

from django.db import models
from django.utils.translation import gettext_lazy as _

from .modules.comparison import CellStatus
from .modules.comparison import EvalEntry
from .modules.comparison import EvalReport


class ExperimentStatus(Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"


# Convert enums to choices for Django models
EXPERIMENT_STATUS_CHOICES = [(status.value, status.value) for status in ExperimentStatus]
CELL_STATUS_CHOICES = [(status.value, status.value) for status in CellStatus]


class Experiment(models.Model):
    """
    A comparison sweep recorded in the database.
    """
    name = models.CharField(
        _("Name"),
        max_length=255,
        help_text=_("Label of the experiment"),
    )
    config_text = models.TextField(
        _("Config"),
        help_text=_("Pipeline config file the sweep runs with"),
    )
    config_dir = models.CharField(
        _("Config directory"),
        max_length=1024,
        blank=True,
        default="",
        help_text=_("Directory relative paths in the config resolve against"),
    )
    root_seed = models.BigIntegerField(
        _("Root seed"),
        help_text=_("Seed every sub-seed of the sweep derives from"),
    )
    status = models.CharField(
        _("Status"),
        max_length=30,
        choices=EXPERIMENT_STATUS_CHOICES,
        default=ExperimentStatus.PENDING.value,
    )
    output_dir = models.CharField(
        _("Output directory"),
        max_length=1024,
        blank=True,
        default="",
    )
    error_message = models.TextField(
        _("Error Message"),
        null=True,
        blank=True,
    )
    created_at = models.DateTimeField(
        _("Created at"),
        auto_now_add=True,
    )
    started_at = models.DateTimeField(
        _("Started at"),
        null=True,
        blank=True,
    )
    finished_at = models.DateTimeField(
        _("Finished at"),
        null=True,
        blank=True,
    )

    class Meta:
        verbose_name = _("Experiment")
        verbose_name_plural = _("Experiments")
        ordering = ["-created_at"]

    def __str__(self) -> str:
        return f"{self.name} ({self.status})"

    @property
    def base_dir(self) -> Path | None:
        return Path(self.config_dir) if self.config_dir else None

    def report(self) -> EvalReport:
        """Rebuild the evaluation report from the stored cells."""
        folds = self.cells.aggregate(models.Max("fold"))["fold__max"]
        return EvalReport(
            entries=[cell.to_entry() for cell in self.cells.order_by("id")],
            n_folds=(folds + 1) if folds is not None else 1,
        )


class ExperimentCell(models.Model):
    """
    One evaluated cell of a sweep.
    """
    experiment = models.ForeignKey(
        Experiment,
        on_delete=models.CASCADE,
        related_name="cells",
        help_text=_("The experiment this cell belongs to"),
    )
    method = models.CharField(_("Method"), max_length=30)
    k = models.PositiveIntegerField(_("K"))
    kbar = models.PositiveIntegerField(_("Oversampled K"), null=True, blank=True)
    oversampling = models.CharField(_("Oversampling"), max_length=30)
    seed = models.BigIntegerField(_("Seed"))
    fold = models.PositiveIntegerField(_("Fold"))
    fit_rows = models.PositiveBigIntegerField(_("Fit rows"), default=0)
    log_loss = models.FloatField(_("Log loss"), null=True, blank=True)
    error_rate = models.FloatField(_("Error rate"), null=True, blank=True)
    status = models.CharField(
        _("Status"),
        max_length=30,
        choices=CELL_STATUS_CHOICES,
        default=CellStatus.OK.value,
    )
    error_message = models.TextField(_("Error Message"), blank=True, default="")

    class Meta:
        verbose_name = _("Experiment Cell")
        verbose_name_plural = _("Experiment Cells")
        ordering = ["experiment", "k", "method", "oversampling", "seed", "fold"]

    def __str__(self) -> str:
        return f"{self.method} K={self.k} {self.oversampling} fold {self.fold}"

    @classmethod
    def from_entry(cls, experiment: Experiment, entry: EvalEntry) -> "ExperimentCell":
        """Unsaved cell holding a report entry."""
        return cls(
            experiment=experiment,
            method=entry.method,
            k=entry.k,
            kbar=entry.kbar,
            oversampling=entry.oversampling,
            seed=entry.seed,
            fold=entry.fold,
            fit_rows=entry.fit_rows,
            log_loss=entry.log_loss,
            error_rate=entry.error_rate,
            status=entry.status.value,
            error_message=entry.error,
        )

    def to_entry(self) -> EvalEntry:
        return EvalEntry(
            method=self.method,
            k=self.k,
            oversampling=self.oversampling,
            seed=self.seed,
            fold=self.fold,
            kbar=self.kbar,
            fit_rows=self.fit_rows,
            log_loss=self.log_loss,
            error_rate=self.error_rate,
            status=CellStatus(self.status),
            error=self.error_message,
        )
