import shutil
import tempfile
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.modules.oracle import run_oracles


class Command(LsrpcaCommand):
    help = "Run the small-scale oracle suite comparing streaming routines with in-core references."

    def add_arguments(self, parser):
        parser.add_argument("--workdir", type=Path, help="Keep the oracle stores here (default: a scratch temp dir)")
        self.add_seed_argument(parser)

    def handle(self, *args, **options):
        workdir = options["workdir"]
        scratch = None
        if workdir is None:
            Path(settings.LSRPCA_SCRATCH_DIR).mkdir(parents=True, exist_ok=True)
            scratch = workdir = Path(tempfile.mkdtemp(prefix="lsrpca-oracle-", dir=settings.LSRPCA_SCRATCH_DIR))
        try:
            results = run_oracles(workdir, self.seed(options))
        finally:
            if scratch is not None:
                shutil.rmtree(scratch, ignore_errors=True)

        for result in results:
            mark = self.style.SUCCESS("PASS") if result.passed else self.style.ERROR("FAIL")
            self.stdout.write(f"{mark} {result.name}: error {result.error:.3g} (tolerance {result.tolerance:.3g})")
        failed = [r for r in results if not r.passed]
        if failed:
            raise CommandError(f"{len(failed)} of {len(results)} oracle checks failed", returncode=1)
