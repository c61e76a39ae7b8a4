from dataclasses import replace
from pathlib import Path

from django.conf import settings

from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.modules.normalization import NORM_FILE_NAME
from lsrpca.reduction.modules.rpca import Oversampling
from lsrpca.reduction.modules.rpca import ProjectionMethod
from lsrpca.reduction.modules.rpca import captured_energy
from lsrpca.reduction.modules.rpca import fit_projection
from lsrpca.reduction.modules.rpca import save_model
from lsrpca.reduction.modules.seeds import derive_seed
from lsrpca.reduction.modules.slice_store import open_store


class Command(LsrpcaCommand):
    help = "Fit a projection model (random projection, LS-RPCA, baseline RPCA or exact PCA) on a store."

    def add_arguments(self, parser):
        parser.add_argument("--method", default=ProjectionMethod.LS_RPCA.value, help="rp, lsrpca, rpca_baseline or exact_pca")
        parser.add_argument("--k", type=int, required=True, help="Target dimensionality")
        parser.add_argument("--oversample", default="minimal", help="minimal, double or fixed:N")
        parser.add_argument("--input", type=Path, required=True, help="Training slice store")
        parser.add_argument("--output", type=Path, required=True, help="Model file to write")
        parser.add_argument("--dump-r", type=Path, help="Write the final triangular factor here (LS-RPCA only)")
        parser.add_argument("--diagnostics", action="store_true", help="Report captured energy with a second pass")
        parser.add_argument(
            "--rank-tolerance",
            type=float,
            default=None,
            help="Relative diagonal tolerance of the rank check (default: LSRPCA_RANK_TOLERANCE)",
        )
        self.add_seed_argument(parser)

    def handle(self, *args, **options):
        method = ProjectionMethod.parse(options["method"])
        oversampling = Oversampling.parse(options["oversample"])
        tolerance = options["rank_tolerance"]
        store = open_store(options["input"])
        model = fit_projection(
            store,
            method,
            options["k"],
            oversampling,
            derive_seed(self.seed(options), "sketch"),
            tolerance=settings.LSRPCA_RANK_TOLERANCE if tolerance is None else tolerance,
            dump_r=options["dump_r"],
        )
        norm_path = store.path / NORM_FILE_NAME
        if norm_path.exists():
            model = replace(model, norm_stats=str(norm_path))
        save_model(model, options["output"])
        reads = store.read_log.reads_per_slice(store.n_slices)
        self.stdout.write(
            self.style.SUCCESS(
                f"Fitted {model.method.value} K={model.k} K̄={model.kbar} on {store.n_total} rows; "
                f"slice reads per slice: {min(reads, default=0)}..{max(reads, default=0)}",
            ),
        )
        if options["diagnostics"]:
            energy = captured_energy(store, model)
            self.stdout.write(f"Captured energy ‖XV‖²/‖X‖²: {energy:.6f}")
