"""
Shared plumbing of the ``lsrpca`` management commands.
"""
from django.conf import settings
from django.core.management.base import BaseCommand
from django.core.management.base import CommandError

from lsrpca.reduction.modules.exceptions import LsrpcaError


class LsrpcaCommand(BaseCommand):
    """
    Base command that turns toolkit errors into structured exit codes.

    Any ``LsrpcaError`` escaping ``handle`` becomes a ``CommandError`` whose
    ``returncode`` is the error's ``exit_code``. Other exceptions propagate.
    """

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except LsrpcaError as e:
            raise CommandError(str(e), returncode=e.exit_code) from e

    def add_seed_argument(self, parser, help_text: str = "Root seed (default: LSRPCA_ROOT_SEED)"):
        parser.add_argument("--seed", type=int, default=None, help=help_text)

    def seed(self, options) -> int:
        return settings.LSRPCA_ROOT_SEED if options["seed"] is None else options["seed"]
