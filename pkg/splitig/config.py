"""
Run configuration.

Resolution order: built-in defaults < environment (.env) < config file
(flat KEY=value text read with dotenv_values) < command-line flags.
List values are comma-separated.
"""

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from dotenv import dotenv_values, load_dotenv

from splitig.errors import ConfigError
from splitig.model_zoo import ACTIVATIONS
from splitig.path_integrator import DEFAULT_N_STEPS, DEFAULT_RULE, RULES

load_dotenv()

BASELINES = ('zero', 'mean')
TARGET_MODES = ('label', 'predicted')

# Execution settings: they change where and how fast, never what is computed
RUNTIME_FIELDS = ('output_dir', 'workers')


@dataclass
class RunConfig:
    model: str = 'blob-mlp-6d'
    dataset: str = ''
    seed: int = 7
    n_samples: int = 300
    n_features: int = 6
    n_classes: int = 3
    psi: tuple = (0.9, 0.95, 0.99)
    n_steps: int = DEFAULT_N_STEPS
    rule: str = DEFAULT_RULE
    baseline: str = 'zero'
    target: str = 'label'
    exclude_misclassified: bool = False
    abpc: bool = True
    sensitivity: bool = True
    n_increments: int = 10
    r: float = 0.05
    n_perturbations: int = 10
    quality_psi: float = 0.9
    max_samples: int = 0
    sample_index: int = 0
    layer_sizes: tuple = (6, 16, 3)
    activation: str = 'tanh'
    epochs: int = 500
    learning_rate: float = 0.1
    fd_step: float = 1e-5
    output_dir: str = os.getenv('SPLITIG_OUTPUT_DIR', 'data/output')
    workers: int = int(os.getenv('SPLITIG_WORKERS', '1'))

    def validate(self):
        """Raise ConfigError on the first invalid value."""
        if not self.psi:
            raise ConfigError("psi needs at least one value")
        for psi in self.psi:
            if not 0.0 < psi < 1.0:
                raise ConfigError(f"psi values must lie in (0, 1), got {psi}")
        if not 0.0 < self.quality_psi < 1.0:
            raise ConfigError(f"quality_psi must lie in (0, 1), got {self.quality_psi}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {', '.join(RULES)}, got '{self.rule}'")
        if self.baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {', '.join(BASELINES)}, got '{self.baseline}'")
        if self.target not in TARGET_MODES:
            try:
                if int(self.target) < 0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"target must be 'label', 'predicted' or a class index, got '{self.target}'")
        if self.n_increments < 1:
            raise ConfigError(f"n_increments must be at least 1, got {self.n_increments}")
        if not self.r > 0:
            raise ConfigError(f"r must be positive, got {self.r}")
        if self.n_perturbations < 1:
            raise ConfigError(f"n_perturbations must be at least 1, got {self.n_perturbations}")
        if self.max_samples < 0 or self.sample_index < 0:
            raise ConfigError("max_samples and sample_index must be non-negative")
        if self.n_samples < 0 or self.n_features < 1 or self.n_classes < 1:
            raise ConfigError("generator needs n_samples >= 0, n_features >= 1, n_classes >= 1")
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ConfigError(f"layer_sizes needs at least two positive widths, got {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {', '.join(ACTIVATIONS)}, got '{self.activation}'")
        if self.epochs < 1 or not self.learning_rate > 0:
            raise ConfigError("epochs must be >= 1 and learning_rate > 0")
        if not self.fd_step > 0:
            raise ConfigError(f"fd_step must be positive, got {self.fd_step}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        return self

    def to_dict(self, include_runtime=False):
        """Plain dict for embedding in output files."""
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        if not include_runtime:
            for key in RUNTIME_FIELDS:
                data.pop(key)
        return data


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: '{text}'")


def _parse_list(text, item_type):
    if isinstance(text, (list, tuple)):
        return tuple(item_type(item) for item in text)
    items = [item.strip() for item in str(text).split(',') if item.strip()]
    return tuple(item_type(item) for item in items)


PARSERS = {
    'psi': lambda text: _parse_list(text, float),
    'layer_sizes': lambda text: _parse_list(text, int),
}


def parse_value(name, raw):
    """Convert a raw config value to the type of the RunConfig field."""
    if name in PARSERS:
        return PARSERS[name](raw)
    default = RunConfig.__dataclass_fields__[name].default
    if isinstance(raw, type(default)) and not isinstance(raw, str):
        return raw
    text = str(raw).strip()
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def read_config_file(path):
    """KEY=value pairs from a config file, keys lowercased."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return {key.strip().lower(): value for key, value in dotenv_values(path).items()}


def resolve_config(config_path=None, overrides=None):
    """
    Build a validated RunConfig.

    Args:
        config_path: Config file (falls back to SPLITIG_CONFIG, then none)
        overrides: Mapping of field name to raw value; None values are ignored

    Returns:
        RunConfig
    """
    names = {f.name for f in fields(RunConfig)}
    raw = {}

    config_path = config_path or os.getenv('SPLITIG_CONFIG')
    if config_path:
        raw.update(read_config_file(config_path))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    values = {}
    for name, value in raw.items():
        if value is None:
            continue
        try:
            values[name] = parse_value(name, value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value for {name}: {value!r} ({e})")

    return RunConfig(**values).validate()
