"""Run configuration: ``key = value`` files plus command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .model import VARIANTS, ConfigError


def _pair(text: str) -> tuple:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"expected a size like 3x3, got {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _opt(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none") else conv(text)
    return parse


@dataclass
class RunConfig:
    """Defaults are the published final hyper-parameters."""

    variant: str = "blstm-2dcnn"
    d_w: int = 300
    hidden: int = 300
    n_filters: int = 100
    filter: tuple = (3, 3)
    pool: tuple = (2, 2)
    dropout_embed: float = 0.5
    dropout_blstm: float = 0.2
    dropout_penult: float = 0.4
    lam: float = 1e-5
    batch_size: int = 10
    epochs: int = 25
    seed: int = 1
    metric: str = "accuracy"
    lr: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6
    activation: str = "tanh"
    lowercase: bool = False
    max_len: int | None = None
    seq_len: int | None = None
    dev_fraction: float = 0.1
    cv: int = 0
    workers: int = 0
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    embeddings: str | None = None
    checkpoint: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.metric not in ("accuracy", "macro-f1"):
            raise ConfigError(f"metric must be accuracy or macro-f1, got {self.metric!r}")
        if self.activation not in ("tanh", "identity"):
            raise ConfigError(f"activation must be tanh or identity, got {self.activation!r}")
        for name in ("d_w", "hidden", "n_filters", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0 or self.workers < 0:
            raise ConfigError("epochs and workers must be >= 0")
        if min(self.filter) < 1 or min(self.pool) < 1:
            raise ConfigError("filter and pool sizes must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        for r in self.dropout:
            if not 0.0 <= r < 1.0:
                raise ConfigError(f"dropout rate {r} outside [0, 1)")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ConfigError("dev_fraction must be in (0, 1)")
        if self.cv == 1 or self.cv < 0:
            raise ConfigError("cv must be 0 (off) or a fold count >= 2")

    @property
    def dropout(self) -> tuple:
        return (self.dropout_embed, self.dropout_blstm, self.dropout_penult)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = "x".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key_name(f.name)} = {'none' if v is None else v}")
        return "\n".join(lines) + "\n"


# file keys use the spelling people write; "lambda" is a Python keyword
_ALIASES = {"lambda": "lam"}

_PARSERS = {
    "filter": _pair,
    "pool": _pair,
    "lowercase": _bool,
    "max_len": _opt(int),
    "seq_len": _opt(int),
}
for _f in fields(RunConfig):
    if _f.name in _PARSERS:
        continue
    default = _f.default
    if isinstance(default, bool):
        _PARSERS[_f.name] = _bool
    elif isinstance(default, int):
        _PARSERS[_f.name] = int
    elif isinstance(default, float):
        _PARSERS[_f.name] = float
    elif default is None:
        _PARSERS[_f.name] = _opt(str)
    else:
        _PARSERS[_f.name] = str


def key_name(field_name: str) -> str:
    return "lambda" if field_name == "lam" else field_name


def field_name(key: str) -> str:
    key = key.strip().replace("-", "_")
    return _ALIASES.get(key, key)


def parse_value(key: str, text: str):
    name = field_name(key)
    if name not in _PARSERS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return name, _PARSERS[name](text.strip())
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}") from None


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        try:
            name, v = parse_value(key, value)
        except ConfigError as e:
            raise ConfigError(f"{source}:{lineno}: {e}") from None
        values[name] = v
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file, then ``overrides`` (already-parsed values)."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        values.update(parse_text(p.read_text(encoding="utf-8"), str(p)))
    values.update(overrides or {})
    return RunConfig(**values)


def config_from_text(text: str) -> RunConfig:
    return RunConfig(**parse_text(text))


CONFIG_KEYS = [key_name(f.name) for f in fields(RunConfig)]
