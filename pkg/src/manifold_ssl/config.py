"""Strict ``key = value`` pipeline configuration with one section per stage.

Example::

    [data]
    clinical = clinical.csv
    survival_threshold_years = 5

    [modalities]
    gene = gene.csv
    isoform = isoform.csv

Relative paths resolve against the config file's directory. Unknown sections
or keys are errors.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import years_to_days
from .errors import ConfigError
from .evaluation import ALL_METHODS, ExperimentSettings, HyperGrid, MethodId, PipelineSettings
from .graph import AFFINITY_FORMS
from .kernels import KERNEL_KINDS, KernelSpec


@dataclass(frozen=True)
class PipelineConfig:
    clinical: Path
    modalities: dict
    survival_threshold_years: float
    validation_fraction: float = 0.15
    n_folds: int = 5
    relevance_weight: float = 0.5
    discretize_cutoff: float = 1.5
    k_neighbors: int = 5
    affinity: str = "squared"
    bandwidth: float | None = None
    kernel: KernelSpec = KernelSpec()
    grid: HyperGrid = HyperGrid()
    methods: tuple = ALL_METHODS
    repetitions: int = 100
    base_seed: int = 0
    output_dir: Path = field(default=Path("results"))

    @property
    def threshold_days(self) -> int:
        return years_to_days(self.survival_threshold_years)

    def experiment_settings(self) -> ExperimentSettings:
        pipeline = PipelineSettings(self.kernel, self.k_neighbors, self.affinity, self.bandwidth,
                                    self.relevance_weight, self.discretize_cutoff)
        return ExperimentSettings(self.methods, self.repetitions, self.base_seed, self.validation_fraction,
                                  self.n_folds, self.grid, pipeline)

    def check_paths(self) -> None:
        for p in (self.clinical, *self.modalities.values()):
            if not Path(p).is_file():
                raise ConfigError(f"referenced file does not exist: {p}")


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _opt_float(s):
    return None if s == "" else float(s)


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _opt_floats(s):
    return _floats(s) or None


def _methods(s):
    try:
        return tuple(MethodId(x.strip()) for x in s.split(",") if x.strip())
    except ValueError as exc:
        raise ValueError(f"{exc}; choose from {', '.join(m.value for m in ALL_METHODS)}") from None


_TYPE_NAMES = {_float: "a real number", _int: "an integer", _opt_float: "a real number or empty",
               _floats: "a comma-separated list of reals", _ints: "a comma-separated list of integers",
               _opt_floats: "a comma-separated list of reals or empty", _methods: "a comma-separated list of methods",
               str: "text"}

# section -> key -> (field, parser)
SCHEMA = {
    "data": {"clinical": ("clinical", str), "survival_threshold_years": ("survival_threshold_years", _float)},
    "split": {"validation_fraction": ("validation_fraction", _float), "n_folds": ("n_folds", _int)},
    "preprocess": {"discretize_cutoff": ("discretize_cutoff", _float)},
    "mrmr": {"relevance_weight": ("relevance_weight", _float)},
    "graph": {"k_neighbors": ("k_neighbors", _int), "affinity": ("affinity", str), "bandwidth": ("bandwidth", _opt_float)},
    "kernel": {"kind": ("kind", str), "degree": ("degree", _int), "offset": ("offset", _float), "gamma": ("gamma", _float)},
    "grid": {"gamma_ambient": ("gamma_ambient", _floats), "gamma_intrinsic": ("gamma_intrinsic", _floats),
             "feature_counts": ("feature_counts", _ints), "bandwidths": ("bandwidths", _opt_floats)},
    "experiment": {"methods": ("methods", _methods), "repetitions": ("repetitions", _int),
                   "base_seed": ("base_seed", _int)},
    "output": {"directory": ("output_dir", str)},
}
REQUIRED = (("data", "clinical"), ("data", "survival_threshold_years"))


def _reader() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    return cp


def parse_config_text(text: str, base_dir=".") -> PipelineConfig:
    cp = _reader()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    base = Path(base_dir)
    raw = {}
    for section in cp.sections():
        if section == "modalities":
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            name, parse = SCHEMA[section][key]
            try:
                raw[section, name] = parse(value.strip())
            except ValueError:
                raise ConfigError(f"[{section}] {key}: expected {_TYPE_NAMES[parse]}, got {value!r}") from None
    for section, key in REQUIRED:
        if (section, key) not in raw:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
    if not cp.has_section("modalities") or not cp.items("modalities"):
        raise ConfigError("missing required section [modalities] with at least one modality")

    def resolve(p):
        p = Path(p).expanduser()
        return (p if p.is_absolute() else base / p).resolve()

    modalities = {}
    for name, path in cp.items("modalities"):
        if not path.strip():
            raise ConfigError(f"[modalities] {name}: empty path")
        modalities[name] = resolve(path.strip())

    def get(section, name, default):
        return raw.get((section, name), default)

    defaults = PipelineConfig(Path("."), {}, 1.0)
    kd = defaults.kernel
    kind = get("kernel", "kind", kd.kind)
    if kind not in KERNEL_KINDS:
        raise ConfigError(f"[kernel] kind: expected one of {KERNEL_KINDS}, got {kind!r}")
    kernel = KernelSpec(kind, get("kernel", "degree", kd.degree), get("kernel", "offset", kd.offset),
                        get("kernel", "gamma", kd.gamma))
    gd = defaults.grid
    grid = HyperGrid(get("grid", "gamma_ambient", gd.gamma_ambient), get("grid", "gamma_intrinsic", gd.gamma_intrinsic),
                     get("grid", "feature_counts", gd.feature_counts), get("grid", "bandwidths", gd.bandwidths))
    cfg = PipelineConfig(
        clinical=resolve(raw["data", "clinical"]),
        modalities=modalities,
        survival_threshold_years=raw["data", "survival_threshold_years"],
        validation_fraction=get("split", "validation_fraction", defaults.validation_fraction),
        n_folds=get("split", "n_folds", defaults.n_folds),
        relevance_weight=get("mrmr", "relevance_weight", defaults.relevance_weight),
        discretize_cutoff=get("preprocess", "discretize_cutoff", defaults.discretize_cutoff),
        k_neighbors=get("graph", "k_neighbors", defaults.k_neighbors),
        affinity=get("graph", "affinity", defaults.affinity),
        bandwidth=get("graph", "bandwidth", defaults.bandwidth),
        kernel=kernel,
        grid=grid,
        methods=get("experiment", "methods", defaults.methods),
        repetitions=get("experiment", "repetitions", defaults.repetitions),
        base_seed=get("experiment", "base_seed", defaults.base_seed),
        output_dir=resolve(get("output", "output_dir", str(defaults.output_dir))),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    checks = [
        (cfg.survival_threshold_years > 0, "[data] survival_threshold_years must be positive"),
        (0 <= cfg.validation_fraction < 1, "[split] validation_fraction must be in [0, 1)"),
        (cfg.n_folds >= 2, "[split] n_folds must be at least 2"),
        (0 < cfg.relevance_weight <= 1, "[mrmr] relevance_weight must be in (0, 1]"),
        (cfg.discretize_cutoff > 0, "[preprocess] discretize_cutoff must be positive"),
        (cfg.k_neighbors >= 1, "[graph] k_neighbors must be at least 1"),
        (cfg.affinity in AFFINITY_FORMS, f"[graph] affinity must be one of {AFFINITY_FORMS}"),
        (cfg.bandwidth is None or cfg.bandwidth > 0, "[graph] bandwidth must be positive"),
        (cfg.repetitions >= 1, "[experiment] repetitions must be at least 1"),
        (len(cfg.methods) > 0, "[experiment] methods must be nonempty"),
        (len(set(cfg.methods)) == len(cfg.methods), "[experiment] methods must not repeat"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)


def parse_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), path.parent)


def _join(values) -> str:
    return ", ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def to_ini(cfg: PipelineConfig) -> str:
    """Effective configuration with every default spelled out (absolute paths)."""
    k = cfg.kernel
    g = cfg.grid
    lines = [
        "[data]",
        f"clinical = {cfg.clinical}",
        f"survival_threshold_years = {cfg.survival_threshold_years!r}",
        "",
        "[modalities]",
        *(f"{name} = {path}" for name, path in cfg.modalities.items()),
        "",
        "[split]",
        f"validation_fraction = {cfg.validation_fraction!r}",
        f"n_folds = {cfg.n_folds}",
        "",
        "[preprocess]",
        f"discretize_cutoff = {cfg.discretize_cutoff!r}",
        "",
        "[mrmr]",
        f"relevance_weight = {cfg.relevance_weight!r}",
        "",
        "[graph]",
        f"k_neighbors = {cfg.k_neighbors}",
        f"affinity = {cfg.affinity}",
        f"bandwidth = {'' if cfg.bandwidth is None else repr(cfg.bandwidth)}",
        "",
        "[kernel]",
        f"kind = {k.kind}",
        f"degree = {k.degree}",
        f"offset = {float(k.offset)!r}",
        f"gamma = {float(k.gamma)!r}",
        "",
        "[grid]",
        f"gamma_ambient = {_join(g.gamma_ambient)}",
        f"gamma_intrinsic = {_join(g.gamma_intrinsic)}",
        f"feature_counts = {_join(g.feature_counts)}",
        f"bandwidths = {'' if g.bandwidths is None else _join(g.bandwidths)}",
        "",
        "[experiment]",
        f"methods = {', '.join(MethodId(m).value for m in cfg.methods)}",
        f"repetitions = {cfg.repetitions}",
        f"base_seed = {cfg.base_seed}",
        "",
        "[output]",
        f"directory = {cfg.output_dir}",
        "",
    ]
    return "\n".join(lines)

