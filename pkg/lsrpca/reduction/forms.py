"""
Pipeline config file parsing.

The file is INI-style: flat ``key = value`` pairs under the sections
``[input]``, ``[normalize]``, ``[projection]``, ``[evaluation]`` and
``[output]``. Each section is validated by its own form; unknown sections and
keys are rejected, and everything is validated before any file is touched.
"""
import configparser
from pathlib import Path

from django import forms
from django.conf import settings

from .modules.comparison import Protocol
from .modules.comparison import SeedMode
from .modules.exceptions import ConfigError
from .modules.normalization import INFER
from .modules.normalization import NormMode
from .modules.pipeline_config import InputKind
from .modules.pipeline_config import InputSpec
from .modules.pipeline_config import PipelineConfig
from .modules.pipeline_config import ReportFormat
from .modules.rpca import Oversampling
from .modules.rpca import ProjectionMethod
from .modules.synthetic import DEFAULT_CENTER_DECAY
from .modules.synthetic import DEFAULT_SEPARATION
from .modules.synthetic import SyntheticSpec

DEFAULT_OUTPUT_DIR = "lsrpca-output"


def _choices(enum) -> list[tuple[str, str]]:
    return [(member.value, member.value) for member in enum]


class FlagField(forms.Field):
    """Boolean spelled the configparser way (yes/no, true/false, on/off, 1/0)."""

    def __init__(self, *, default: bool = False, **kwargs):
        self.default = default
        kwargs.setdefault("required", False)
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return self.default
        if isinstance(value, bool):
            return value
        state = configparser.ConfigParser.BOOLEAN_STATES.get(str(value).strip().lower())
        if state is None:
            raise forms.ValidationError(f"{value!r} is not a boolean")
        return state


class ListField(forms.Field):
    """Comma-separated list whose items are cleaned by ``item_field``."""

    def __init__(self, item_field: forms.Field, **kwargs):
        self.item_field = item_field
        kwargs.setdefault("required", False)
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return []
        return [self.item_field.clean(item.strip()) for item in str(value).split(",") if item.strip()]


class InputSectionForm(forms.Form):
    kind = forms.ChoiceField(choices=_choices(InputKind))
    path = forms.CharField(required=False)
    labels = forms.CharField(required=False)
    binarize = FlagField()
    delimiter = forms.CharField(required=False, strip=False)
    skip_header = FlagField()
    slice_rows = forms.IntegerField(required=False, min_value=1)
    n = forms.IntegerField(required=False, min_value=1)
    p = forms.IntegerField(required=False, min_value=1)
    rank = forms.IntegerField(required=False, min_value=1)
    n_classes = forms.IntegerField(required=False, min_value=2)
    noise_sd = forms.FloatField(required=False, min_value=0)
    separation = forms.FloatField(required=False, min_value=0)
    center_decay = forms.FloatField(required=False, min_value=0)

    SYNTHETIC_KEYS = ("n", "p", "rank")

    def clean_delimiter(self):
        delimiter = self.cleaned_data.get("delimiter") or ","
        if delimiter in ("tab", "\\t"):
            return "\t"
        if len(delimiter) != 1:
            raise forms.ValidationError("delimiter must be a single character or 'tab'")
        return delimiter

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get("kind")
        if kind == InputKind.SYNTHETIC.value:
            missing = [key for key in self.SYNTHETIC_KEYS if cleaned.get(key) is None]
            if missing:
                raise forms.ValidationError(f"a synthetic input needs {', '.join(missing)}")
            rank, n, p = cleaned["rank"], cleaned["n"], cleaned["p"]
            if rank > min(n, p):
                raise forms.ValidationError(f"rank={rank} exceeds min(n, p)={min(n, p)}")
        elif kind and not cleaned.get("path"):
            self.add_error("path", f"a {kind} input needs a path")
        return cleaned


class NormalizeSectionForm(forms.Form):
    mode = forms.ChoiceField(choices=_choices(NormMode), required=False)
    column_kinds = forms.ChoiceField(choices=[("", "continuous"), (INFER, INFER)], required=False)
    renormalize = FlagField(default=True)


class ProjectionSectionForm(forms.Form):
    methods = ListField(forms.CharField())
    ks = ListField(forms.IntegerField(min_value=1))
    oversampling = ListField(forms.CharField())
    seed_mode = forms.ChoiceField(choices=_choices(SeedMode), required=False)
    rank_tolerance = forms.FloatField(required=False, min_value=0)
    fit_sample_size = forms.IntegerField(required=False, min_value=1)

    def _parse_each(self, key: str, parser):
        try:
            return [parser(item) for item in self.cleaned_data.get(key, [])]
        except ConfigError as e:
            raise forms.ValidationError(str(e)) from e

    def clean_methods(self):
        return self._parse_each("methods", ProjectionMethod.parse)

    def clean_oversampling(self):
        return self._parse_each("oversampling", Oversampling.parse)


class EvaluationSectionForm(forms.Form):
    protocol = forms.ChoiceField(choices=_choices(Protocol), required=False)
    folds = forms.IntegerField(required=False, min_value=2)
    train_fraction = forms.FloatField(required=False, min_value=0, max_value=1)
    seed = forms.IntegerField(required=False, min_value=0)
    replicates = forms.IntegerField(required=False, min_value=1)
    reg = forms.FloatField(required=False)
    max_iter = forms.IntegerField(required=False, min_value=1)
    tol = forms.FloatField(required=False, min_value=0)

    def clean_reg(self):
        reg = self.cleaned_data.get("reg")
        if reg is not None and reg <= 0:
            raise forms.ValidationError("reg must be positive")
        return reg

    def clean_train_fraction(self):
        fraction = self.cleaned_data.get("train_fraction")
        if fraction is not None and not 0 < fraction < 1:
            raise forms.ValidationError("train_fraction must lie strictly between 0 and 1")
        return fraction


class OutputSectionForm(forms.Form):
    dir = forms.CharField(required=False)
    formats = ListField(forms.ChoiceField(choices=_choices(ReportFormat)))
    scratch_dir = forms.CharField(required=False)


SECTION_FORMS: dict[str, type[forms.Form]] = {
    "input": InputSectionForm,
    "normalize": NormalizeSectionForm,
    "projection": ProjectionSectionForm,
    "evaluation": EvaluationSectionForm,
    "output": OutputSectionForm,
}


def _section_error(section: str, form: forms.Form) -> ConfigError:
    key, messages = next(iter(form.errors.items()))
    where = f"[{section}]" if key == "__all__" else f"[{section}] {key}"
    return ConfigError(f"{where}: {' '.join(messages)}")


def _validate_sections(parser: configparser.ConfigParser) -> dict[str, dict]:
    if parser.defaults():
        raise ConfigError("Unknown section [DEFAULT]; put every key in its own section")
    unknown = [name for name in parser.sections() if name not in SECTION_FORMS]
    if unknown:
        raise ConfigError(f"Unknown section [{unknown[0]}]; expected one of {', '.join(SECTION_FORMS)}")
    if not parser.has_section("input"):
        raise ConfigError("Missing required section [input]")
    cleaned = {}
    for section, form_class in SECTION_FORMS.items():
        data = dict(parser.items(section)) if parser.has_section(section) else {}
        form = form_class(data=data)
        typos = sorted(set(data) - set(form.fields))
        if typos:
            raise ConfigError(f"Unknown key {typos[0]!r} in [{section}]")
        if not form.is_valid():
            raise _section_error(section, form)
        cleaned[section] = form.cleaned_data
    return cleaned


def _path(value: str | None, base_dir: Path | None) -> Path | None:
    if not value:
        return None
    path = Path(value).expanduser()
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return path


def _pick(value, default):
    return default if value in (None, "", []) else value


def parse_pipeline_config(text: str, base_dir: Path | str | None = None) -> PipelineConfig:
    """
    Parse and validate a pipeline config.

    Args:
        text: The INI document
        base_dir: Directory relative paths resolve against (the config
            file's directory when loaded from disk)

    Returns:
        PipelineConfig with settings defaults filled in

    Raises:
        ConfigError: Naming the first offending section or key
    """
    base_dir = Path(base_dir) if base_dir is not None else None
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed config: {e}") from e
    sections = _validate_sections(parser)
    source, norm, projection = sections["input"], sections["normalize"], sections["projection"]
    evaluation, output = sections["evaluation"], sections["output"]

    synthetic = None
    kind = InputKind(source["kind"])
    if kind is InputKind.SYNTHETIC:
        synthetic = SyntheticSpec(
            n=source["n"],
            p=source["p"],
            rank=source["rank"],
            n_classes=_pick(source["n_classes"], 2),
            noise_sd=_pick(source["noise_sd"], 0.1),
            separation=_pick(source["separation"], DEFAULT_SEPARATION),
            center_decay=_pick(source["center_decay"], DEFAULT_CENTER_DECAY),
        )
    input_spec = InputSpec(
        kind=kind,
        path=_path(source["path"], base_dir),
        labels=_path(source["labels"], base_dir),
        binarize=source["binarize"],
        delimiter=source["delimiter"] or ",",
        skip_header=source["skip_header"],
        synthetic=synthetic,
    )
    defaults = PipelineConfig(input=input_spec, output_dir=Path(DEFAULT_OUTPUT_DIR))
    config = PipelineConfig(
        input=input_spec,
        output_dir=_path(_pick(output["dir"], DEFAULT_OUTPUT_DIR), base_dir),
        norm_mode=NormMode(_pick(norm["mode"], defaults.norm_mode.value)),
        column_kinds=norm["column_kinds"] or None,
        methods=tuple(_pick(projection["methods"], defaults.methods)),
        ks=tuple(_pick(projection["ks"], defaults.ks)),
        oversampling=tuple(_pick(projection["oversampling"], defaults.oversampling)),
        seed_mode=SeedMode(_pick(projection["seed_mode"], defaults.seed_mode.value)),
        rank_tolerance=_pick(projection["rank_tolerance"], settings.LSRPCA_RANK_TOLERANCE),
        protocol=Protocol(_pick(evaluation["protocol"], defaults.protocol.value)),
        folds=_pick(evaluation["folds"], defaults.folds),
        train_fraction=_pick(evaluation["train_fraction"], defaults.train_fraction),
        root_seed=_pick(evaluation["seed"], settings.LSRPCA_ROOT_SEED),
        replicates=_pick(evaluation["replicates"], defaults.replicates),
        fit_sample_size=projection["fit_sample_size"],
        renormalize=norm["renormalize"],
        reg=_pick(evaluation["reg"], settings.LSRPCA_LOGREG_REG),
        max_iter=_pick(evaluation["max_iter"], settings.LSRPCA_LOGREG_MAX_ITER),
        tol=_pick(evaluation["tol"], settings.LSRPCA_LOGREG_TOL),
        slice_rows=_pick(source["slice_rows"], settings.LSRPCA_SLICE_ROWS),
        scratch_dir=_path(_pick(output["scratch_dir"], settings.LSRPCA_SCRATCH_DIR), base_dir),
        formats=tuple(ReportFormat(f) for f in _pick(output["formats"], [f.value for f in defaults.formats])),
    )
    if synthetic is not None and max(config.ks) > synthetic.p:
        raise ConfigError(f"[projection] ks: every K must be at most p={synthetic.p}")
    return config


def load_pipeline_config(path: Path | str) -> PipelineConfig:
    """Read a config file; relative paths inside it resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        return parse_pipeline_config(text, base_dir=path.resolve().parent)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e
