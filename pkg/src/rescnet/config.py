"""Training configuration and its INI-style file format.

Every ``TrainConfig`` / ``DataConfig`` field is one ``key = value`` line in
the section named by the field's metadata. Unknown keys and out-of-range
values raise :class:`ConfigError` carrying the offending key.
"""
import configparser
import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError

FILTER_TYPES = ("pca", "stacked_lda", "mixed")


def _section(name, default, **kw):
    return field(default=default, metadata={"section": name, **kw})


def _parse_pair(text):
    parts = text.replace("x", ",").split(",")
    if len(parts) != 2:
        raise ValueError(f"expected RxC, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_levels(text):
    """``"4x4 2x2 1x1"``; commas or semicolons also separate, ``"4"`` means 4x4."""
    tokens = text.replace(",", " ").replace(";", " ").split()
    return tuple(_parse_pair(t) if "x" in t else (int(t), int(t)) for t in tokens)


def _format_pair(pair):
    return f"{pair[0]}x{pair[1]}"


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_decay(text):
    text = text.strip().lower()
    if text in ("none", "", "0"):
        return None
    if text.endswith("%"):
        return float(text[:-1]) / 100.0
    return float(text)


@dataclass(frozen=True)
class TrainConfig:
    lam: float = _section("residual", 0.8, key="lambda")
    alpha0: float = _section("residual", 1.0)
    lr_decay: float | None = _section("residual", None)
    lr_period: int = _section("residual", 10)
    lr_floor: float = _section("residual", 0.0)
    stop_at_zero_train_error: bool = _section("residual", True)
    patience: int = _section("residual", 0)

    max_layers: int = _section("network", 10)
    filters_per_layer: int = _section("network", 8)
    filter_size_first: int = _section("network", 7)
    filter_size_rest: int = _section("network", 3)
    filter_type_first: str = _section("network", "pca")
    filter_type_rest: str = _section("network", "mixed")
    mix_ratio: float = _section("network", 0.5)
    max_patches: int = _section("network", 100_000)

    sop_block: tuple = _section("pooling", (7, 7))
    sop_stride: int = _section("pooling", 4)
    pyramid_levels: tuple = _section("pooling", ((4, 4), (2, 2), (1, 1)))
    pyramid_reduction: str = _section("pooling", "max")

    transform: str = _section("classifier", "softmax")
    sigmoid_scale: float = _section("classifier", 16.0)
    softmax_beta: float = _section("classifier", 0.001)
    ridge: float = _section("classifier", 1e-4)

    lda_positives: int = _section("stacked_lda", 2, key="n_positives")
    lda_negatives: int = _section("stacked_lda", 32, key="n_negatives")
    lda_tol: float = _section("stacked_lda", 0.0, key="tol")
    lda_max_attempts: int = _section("stacked_lda", 1000, key="max_attempts")
    lda_ridge: float = _section("stacked_lda", 1e-4, key="ridge")

    seed: int = _section("run", 0)

    def __post_init__(self):
        validate(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DataConfig:
    dataset: str = _section("data", "mnist")
    root: str = _section("data", "")
    train: tuple = _section("data", ())
    test: tuple = _section("data", ())
    train_manifest: str = _section("data", "")
    test_manifest: str = _section("data", "")
    n_train: int = _section("data", 0)
    n_test: int = _section("data", 0)
    n_val: int = _section("data", 0)
    subset_seed: int = _section("data", 0)
    hflip: bool = _section("data", False)

    def __post_init__(self):
        if self.dataset not in ("mnist", "cifar10", "cifar100", "folder"):
            raise ConfigError("dataset", f"unknown dataset {self.dataset!r}")
        for key in ("n_train", "n_test", "n_val"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be >= 0")


def _check(cond, key, reason):
    if not cond:
        raise ConfigError(key, reason)


def validate(cfg):
    _check(0.0 <= cfg.lam <= 1.0, "lambda", "must lie in [0, 1]")
    _check(cfg.alpha0 > 0, "alpha0", "must be positive")
    _check(cfg.lr_decay is None or 0.0 < cfg.lr_decay < 1.0, "lr_decay",
           "must be none or a fraction in (0, 1)")
    _check(cfg.lr_period >= 1, "lr_period", "must be >= 1")
    _check(0.0 <= cfg.lr_floor <= cfg.alpha0, "lr_floor", "must lie in [0, alpha0]")
    _check(cfg.patience >= 0, "patience", "must be >= 0")
    _check(cfg.max_layers >= 1, "max_layers", "must be >= 1")
    _check(cfg.filters_per_layer >= 1, "filters_per_layer", "must be >= 1")
    _check(cfg.filter_size_first >= 1, "filter_size_first", "must be >= 1")
    _check(cfg.filter_size_rest >= 1, "filter_size_rest", "must be >= 1")
    _check(cfg.filter_type_first in FILTER_TYPES, "filter_type_first", f"one of {FILTER_TYPES}")
    _check(cfg.filter_type_rest in FILTER_TYPES, "filter_type_rest", f"one of {FILTER_TYPES}")
    _check(0.0 <= cfg.mix_ratio <= 1.0, "mix_ratio", "must lie in [0, 1]")
    _check(cfg.max_patches >= 1, "max_patches", "must be >= 1")
    _check(len(cfg.sop_block) == 2 and min(cfg.sop_block) >= 1, "sop_block", "must be RxC")
    _check(cfg.sop_stride >= 1, "sop_stride", "must be >= 1")
    _check(len(cfg.pyramid_levels) >= 1 and all(min(lv) >= 1 for lv in cfg.pyramid_levels),
           "pyramid_levels", "need at least one RxC level")
    _check(cfg.pyramid_reduction in ("max", "sum"), "pyramid_reduction", "max or sum")
    _check(cfg.transform in ("sigmoid", "softmax"), "transform", "sigmoid or softmax")
    _check(cfg.sigmoid_scale > 0, "sigmoid_scale", "must be positive")
    _check(cfg.softmax_beta > 0, "softmax_beta", "must be positive")
    _check(cfg.ridge >= 0, "ridge", "must be >= 0")
    _check(cfg.lda_positives >= 1, "n_positives", "must be >= 1")
    _check(cfg.lda_negatives >= 1, "n_negatives", "must be >= 1")
    _check(0.0 <= cfg.lda_tol <= 1.0, "tol", "must lie in [0, 1]")
    _check(cfg.lda_max_attempts >= 1, "max_attempts", "must be >= 1")
    _check(cfg.lda_ridge >= 0, "stacked_lda.ridge", "must be >= 0")


def _key(f):
    return f.metadata.get("key", f.name)


def _parser_for(f):
    if f.name in ("sop_block",):
        return _parse_pair
    if f.name == "pyramid_levels":
        return _parse_levels
    if f.name in ("train", "test"):
        return lambda t: tuple(p.strip() for p in t.split(",") if p.strip())
    if f.name == "lr_decay":
        return _parse_decay
    default = f.default
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def _format(f, value):
    if value is None:
        return "none"
    if f.name == "sop_block":
        return _format_pair(value)
    if f.name == "pyramid_levels":
        return " ".join(_format_pair(v) for v in value)
    if f.name in ("train", "test"):
        return ", ".join(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _fields_by_location(cls):
    return {(f.metadata["section"], _key(f)): f for f in dataclasses.fields(cls)}


def parse_config_text(text, overrides=None):
    """Parse INI text into ``(TrainConfig, DataConfig)``."""
    ini = configparser.ConfigParser(interpolation=None)
    try:
        ini.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from exc
    known = {**_fields_by_location(TrainConfig), **_fields_by_location(DataConfig)}
    values = {TrainConfig: {}, DataConfig: {}}
    for section in ini.sections():
        for key, raw in ini.items(section):
            f = known.get((section, key))
            if f is None:
                raise ConfigError(f"{section}.{key}", "unknown key")
            try:
                value = _parser_for(f)(raw)
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from exc
            owner = TrainConfig if f in dataclasses.fields(TrainConfig) else DataConfig
            values[owner][f.name] = value
    values[TrainConfig].update(overrides or {})
    return TrainConfig(**values[TrainConfig]), DataConfig(**values[DataConfig])


def load_config(path, overrides=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), overrides)


def format_config(train_cfg, data_cfg=None):
    """Render configs back to INI text (round-trips through parse_config_text)."""
    sections = {}
    for obj in (data_cfg, train_cfg):
        if obj is None:
            continue
        for f in dataclasses.fields(obj):
            sections.setdefault(f.metadata["section"], []).append(
                f"{_key(f)} = {_format(f, getattr(obj, f.name))}")
    return "\n".join(f"[{name}]\n" + "\n".join(lines) + "\n"
                     for name, lines in sections.items())


def to_dict(cfg):
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}


def from_dict(cls, data):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name == "sop_block":
            value = tuple(value)
        elif f.name == "pyramid_levels":
            value = tuple(tuple(v) for v in value)
        elif f.name in ("train", "test"):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)
