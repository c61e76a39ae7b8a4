from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class ReductionConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "lsrpca.reduction"
    verbose_name = _("Dimensionality reduction")
