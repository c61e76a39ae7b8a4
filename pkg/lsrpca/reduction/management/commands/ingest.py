from pathlib import Path

from django.conf import settings

from lsrpca.reduction.management.base import LsrpcaCommand
from lsrpca.reduction.modules.exceptions import ConfigError
from lsrpca.reduction.modules.ingest import ingest
from lsrpca.reduction.modules.pipeline_config import InputKind
from lsrpca.reduction.modules.pipeline_config import InputSpec
from lsrpca.reduction.modules.seeds import derive_seed
from lsrpca.reduction.modules.synthetic import DEFAULT_CENTER_DECAY
from lsrpca.reduction.modules.synthetic import DEFAULT_SEPARATION
from lsrpca.reduction.modules.synthetic import SyntheticSpec

SUFFIX_KINDS = {".mtx": InputKind.MATRIX_MARKET, ".csv": InputKind.CSV}


class Command(LsrpcaCommand):
    help = "Parse a Matrix Market or CSV file, or generate a synthetic dataset, into a slice store."

    def add_arguments(self, parser):
        parser.add_argument("--input", type=Path, help="Matrix Market (.mtx) or CSV file")
        parser.add_argument("--output", type=Path, required=True, help="Directory of the new slice store")
        parser.add_argument(
            "--format",
            choices=[InputKind.MATRIX_MARKET.value, InputKind.CSV.value, InputKind.SYNTHETIC.value],
            help="Input format (default: inferred from the file suffix)",
        )
        parser.add_argument("--labels", type=Path, help="One integer class label per line")
        parser.add_argument("--binarize", action="store_true", help="Replace every nonzero with 1")
        parser.add_argument("--delimiter", default=",", help="CSV delimiter")
        parser.add_argument("--skip-header", action="store_true", help="Skip the first CSV line")
        parser.add_argument("--slice-rows", type=int, default=None, help="Rows per slice (default: LSRPCA_SLICE_ROWS)")
        parser.add_argument("--n", type=int, help="Synthetic rows")
        parser.add_argument("--p", type=int, help="Synthetic columns")
        parser.add_argument("--rank", type=int, help="Synthetic latent rank")
        parser.add_argument("--n-classes", type=int, default=2)
        parser.add_argument("--noise-sd", type=float, default=0.1)
        parser.add_argument("--separation", type=float, default=DEFAULT_SEPARATION)
        parser.add_argument("--center-decay", type=float, default=DEFAULT_CENTER_DECAY)
        self.add_seed_argument(parser)

    def _kind(self, options) -> InputKind:
        if options["format"]:
            return InputKind(options["format"])
        if options["input"] is None:
            raise ConfigError("Give --input, or --format synthetic with --n, --p and --rank")
        kind = SUFFIX_KINDS.get(options["input"].suffix.lower())
        if kind is None:
            raise ConfigError(f"Cannot infer the format of {options['input']}; pass --format")
        return kind

    def handle(self, *args, **options):
        kind = self._kind(options)
        synthetic = None
        if kind is InputKind.SYNTHETIC:
            if None in (options["n"], options["p"], options["rank"]):
                raise ConfigError("A synthetic dataset needs --n, --p and --rank")
            synthetic = SyntheticSpec(
                n=options["n"],
                p=options["p"],
                rank=options["rank"],
                n_classes=options["n_classes"],
                noise_sd=options["noise_sd"],
                separation=options["separation"],
                center_decay=options["center_decay"],
            )
        elif options["input"] is None:
            raise ConfigError(f"A {kind.value} input needs --input")
        spec = InputSpec(
            kind=kind,
            path=options["input"],
            labels=options["labels"],
            binarize=options["binarize"],
            delimiter=options["delimiter"],
            skip_header=options["skip_header"],
            synthetic=synthetic,
        )
        slice_rows = options["slice_rows"] or settings.LSRPCA_SLICE_ROWS
        if slice_rows < 1:
            raise ConfigError(f"--slice-rows must be >= 1, got {slice_rows}")
        store = ingest(spec, options["output"], slice_rows, derive_seed(self.seed(options), "synthesis"))
        self.stdout.write(
            self.style.SUCCESS(
                f"Wrote {store.storage_kind.value} store {store.path}: "
                f"{store.n_total}x{store.cols} in {store.n_slices} slices",
            ),
        )
