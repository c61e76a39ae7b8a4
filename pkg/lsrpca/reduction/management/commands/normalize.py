from pathlib import Path

from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.modules.normalization import INFER
from lsrpca.reduction.modules.normalization import NormMode
from lsrpca.reduction.modules.normalization import apply_norm
from lsrpca.reduction.modules.normalization import fit_norm
from lsrpca.reduction.modules.normalization import load_norm
from lsrpca.reduction.modules.normalization import save_norm
from lsrpca.reduction.modules.slice_store import open_store


class Command(LsrpcaCommand):
    help = (
        "Standardize the columns of a store: fit statistics in one pass (or reuse a norm.json) "
        "and write the normalized store with its norm.json."
    )

    def add_arguments(self, parser):
        parser.add_argument("--input", type=Path, required=True, help="Source slice store")
        parser.add_argument("--output", type=Path, required=True, help="Directory of the normalized store")
        parser.add_argument("--mode", choices=[m.value for m in NormMode], default=NormMode.SPARSE.value)
        parser.add_argument(
            "--column-kinds",
            choices=[INFER],
            default=None,
            help="Mark columns whose nonzeros all equal 1 as binary pass-through",
        )
        parser.add_argument("--stats", type=Path, help="Apply existing statistics instead of fitting (e.g. test data)")

    def handle(self, *args, **options):
        store = open_store(options["input"])
        if options["stats"] is not None:
            stats = load_norm(options["stats"])
        else:
            stats = fit_norm(store, NormMode(options["mode"]), options["column_kinds"])
        out = apply_norm(store, stats, options["output"])
        norm_path = save_norm(stats, out.path)
        self.stdout.write(
            self.style.SUCCESS(f"Wrote {stats.mode.value}-normalized store {out.path} ({norm_path.name})"),
        )
