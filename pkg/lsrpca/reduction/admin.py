"""
Reduction app admin configuration.
"""
from django.contrib import admin

from .models import Experiment
from .models import ExperimentCell


class ExperimentCellInline(admin.TabularInline):
    model = ExperimentCell
    extra = 0
    can_delete = False
    fields = ("method", "k", "kbar", "oversampling", "fold", "fit_rows", "log_loss", "error_rate", "status")
    readonly_fields = fields


@admin.register(Experiment)
class ExperimentAdmin(admin.ModelAdmin):
    """
    Admin configuration for Experiment model.
    """
    list_display = ("name", "status", "root_seed", "created_at", "finished_at")
    list_filter = ("status", "created_at")
    search_fields = ("name",)
    readonly_fields = ("created_at", "started_at", "finished_at")
    inlines = [ExperimentCellInline]


@admin.register(ExperimentCell)
class ExperimentCellAdmin(admin.ModelAdmin):
    list_display = ("experiment", "method", "k", "oversampling", "seed", "fold", "error_rate", "log_loss", "status")
    list_filter = ("method", "status", "oversampling")
    search_fields = ("experiment__name", "method")
