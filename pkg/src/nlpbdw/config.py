"""Experiment configuration: flat ``key = value`` files with JSON values."""
import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError


@dataclass
class ExperimentConfig:
    d: int = 16
    c_rule: float = 0.9
    fine_level: int = 7
    coarse_levels: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    m: int = 8
    meas_width: float = 2.0 ** -6
    n_train: int = 1000
    n_test: int = 100
    seed: int = 0
    n_splits: int = 7
    rb_max_dim: int = None  # m - 1 when unset
    rb_target_eps: float = 0.0
    solver_tol: float = 1e-10
    output_dir: str = "results"

    def __post_init__(self):
        if self.rb_max_dim is None:
            self.rb_max_dim = self.m - 1

    @property
    def levels(self):
        """Coarse levels followed by the fine level."""
        return sorted(set(self.coarse_levels) | {self.fine_level})

    def validate(self):
        if self.d != 16:
            raise ConfigError("only the 16-parameter diffusion problem exists")
        if self.c_rule not in (0.9, 0.99):
            raise ConfigError("c_rule must be 0.9 or 0.99")
        if self.fine_level < 2:
            raise ConfigError("fine_level must be at least 2")
        if any(s < 2 or s >= self.fine_level for s in self.coarse_levels):
            raise ConfigError("coarse levels must lie in [2, fine_level)")
        if self.m < 1:
            raise ConfigError("m must be positive")
        if not 0 <= self.rb_max_dim < self.m:
            raise ConfigError("rb_max_dim must satisfy 0 <= rb_max_dim < m")
        if not 0.0 < self.meas_width < 1.0:
            raise ConfigError("meas_width must lie in (0, 1)")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be positive")
        if self.n_splits < 0:
            raise ConfigError("n_splits must be non-negative")
        return self

    def to_dict(self):
        return asdict(self)


KEYS = tuple(f.name for f in fields(ExperimentConfig))
_TYPES = {"d": int, "fine_level": int, "m": int, "n_train": int, "n_test": int,
          "seed": int, "n_splits": int, "rb_max_dim": int, "c_rule": float,
          "meas_width": float, "rb_target_eps": float, "solver_tol": float,
          "output_dir": str, "coarse_levels": list}


def parse_value(key, text):
    if key not in KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        if _TYPES[key] is not str:
            raise ConfigError(f"cannot parse value of {key!r}: {text!r}")
        value = text
    want = _TYPES[key]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if want is list:
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigError(f"{key!r} must be a list of integers")
    elif not isinstance(value, want) or isinstance(value, bool):
        raise ConfigError(f"{key!r} must be of type {want.__name__}")
    return value


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, text = (part.strip() for part in line.split("=", 1))
            values[key] = parse_value(key, text)
    return values


def load_config(path=None, overrides=None):
    values = read_config_file(path) if path else {}
    for key, text in (overrides or {}).items():
        values[key] = parse_value(key, text)
    return ExperimentConfig(**values).validate()
