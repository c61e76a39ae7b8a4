from pathlib import Path

from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.modules.rpca import load_model
from lsrpca.reduction.modules.rpca import project
from lsrpca.reduction.modules.slice_store import open_store


class Command(LsrpcaCommand):
    help = "Project every slice of a store with a fitted model into a dense N x K store."

    def add_arguments(self, parser):
        parser.add_argument("--model", type=Path, required=True, help="Model file written by fit")
        parser.add_argument("--input", type=Path, required=True, help="Slice store to project")
        parser.add_argument("--output", type=Path, required=True, help="Directory of the projected store")

    def handle(self, *args, **options):
        model = load_model(options["model"])
        store = open_store(options["input"])
        out = project(store, model, options["output"])
        self.stdout.write(self.style.SUCCESS(f"Wrote projected store {out.path}: {out.n_total}x{out.cols}"))
