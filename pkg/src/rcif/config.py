"""Experiment configuration: defaults, YAML parsing, strict validation.

Config files are flat YAML mappings; every key matches one
:class:`ScenarioConfig` field ("lambda" is accepted as an alias for
``lam``, which cannot be a Python identifier). Unknown keys are rejected
with a suggestion, values are type-checked and range-checked, and an
empty file yields the defaults. The flat string form produced by
:func:`to_flat` round-trips through ``repr`` and is embedded in output
headers and episode files so any result can be traced back to its exact
configuration.
"""

import difflib
import hashlib
from dataclasses import dataclass, fields, replace

import yaml

from .errors import ConfigError

_ALIASES = {"lambda": "lam"}


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs of one tracking experiment, with the defaults used
    throughout: a 50 step coordinated-turn flight over an 80 node network
    of 5 range-bearing sensors, 10 bearing-only sensors and 65 relays."""

    dt: float = 1.0
    steps: int = 50
    q1: float = 0.1
    q2: float = 1.75e-4
    init_state: tuple = (1000.0, 50.0, 2000.0, -50.0, 0.053)
    init_cov_diag: tuple = (10000.0, 100.0, 10000.0, 100.0, 3.04e-6)
    active_count: int = 5
    passive_count: int = 10
    comm_count: int = 65
    region: tuple = (0.0, 4000.0, 1000.0, 5000.0)
    active_range_var: float = 100.0
    active_bearing_var: float = 1.22e-5
    passive_bearing_var: float = 1.22e-5
    lam: float = 0.4
    alpha: float = 100.0
    sweeps: int = 3
    consensus_rounds: int = 5
    prior_success: float = 0.9
    prior_failure: float = 0.1
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init_state",
                           tuple(float(v) for v in self.init_state))
        object.__setattr__(self, "init_cov_diag",
                           tuple(float(v) for v in self.init_cov_diag))
        object.__setattr__(self, "region",
                           tuple(float(v) for v in self.region))
        _validate(self)

    @property
    def node_count(self):
        return self.active_count + self.passive_count + self.comm_count

    @property
    def sensor_count(self):
        return self.active_count + self.passive_count


def _positive(cfg, name):
    if not getattr(cfg, name) > 0:
        raise ConfigError(f"{name} must be positive, got "
                          f"{getattr(cfg, name)}")


def _validate(cfg):
    for name in ("dt", "q1", "q2", "active_range_var", "active_bearing_var",
                 "passive_bearing_var", "prior_success", "prior_failure"):
        _positive(cfg, name)
    if not cfg.alpha >= 1.0:
        raise ConfigError(f"alpha must be at least 1, got {cfg.alpha}")
    for name in ("steps", "sweeps", "runs"):
        _positive(cfg, name)
    if cfg.consensus_rounds < 0:
        raise ConfigError(f"consensus_rounds must be nonnegative, got "
                          f"{cfg.consensus_rounds}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {cfg.seed}")
    if not 0.0 <= cfg.lam <= 1.0:
        raise ConfigError(f"lambda out of [0, 1]: {cfg.lam}")
    if len(cfg.init_state) != 5:
        raise ConfigError("init_state must have 5 entries")
    if len(cfg.init_cov_diag) != 5 or any(v <= 0 for v in
                                          cfg.init_cov_diag):
        raise ConfigError("init_cov_diag must be 5 positive entries")
    if len(cfg.region) != 4:
        raise ConfigError("region must be (xmin, xmax, ymin, ymax)")
    xmin, xmax, ymin, ymax = cfg.region
    if not (xmax > xmin and ymax > ymin):
        raise ConfigError(f"region is empty: {cfg.region}")
    if cfg.active_count < 0 or cfg.passive_count < 0 or cfg.comm_count < 0:
        raise ConfigError("node counts must be nonnegative")
    if cfg.sensor_count < 1:
        raise ConfigError("need at least one sensor node")


def _cast_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _cast_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _cast_tuple(key, value):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{key} must be a list of numbers, got {value!r}")
    return tuple(_cast_float(key, v) for v in value)


_CASTERS = {}
for _f in fields(ScenarioConfig):
    if _f.type is int:
        _CASTERS[_f.name] = _cast_int
    elif _f.type is float:
        _CASTERS[_f.name] = _cast_float
    else:
        _CASTERS[_f.name] = _cast_tuple


def _canonical_items(mapping):
    """Resolve aliases and reject unknown or duplicate keys."""
    out = {}
    for key, value in mapping.items():
        name = _ALIASES.get(key, key)
        if name not in _CASTERS:
            hint = difflib.get_close_matches(str(key), list(_CASTERS), n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"unknown config key {key!r}{extra}")
        if name in out:
            raise ConfigError(f"config key {name!r} given twice")
        out[name] = _CASTERS[name](name, value)
    return out


def _load_mapping(text, source):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = (f"{source} line {mark.line + 1} column {mark.column + 1}"
                 if mark is not None else source)
        raise ConfigError(f"invalid YAML in {where}: {err}") from err
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source} must contain a mapping at top level")
    return data


def parse_scenario(text, source="<config>"):
    """Parse YAML text into a validated :class:`ScenarioConfig`."""
    return ScenarioConfig(**_canonical_items(_load_mapping(text, source)))


def load_scenario(path):
    """Read and parse a YAML config file."""
    with open(path) as fh:
        return parse_scenario(fh.read(), source=str(path))


def parse_sweep(text, source="<config>"):
    """Parse a sweep config: a scenario plus sweep_param / sweep_values.

    ``sweep_param`` names any scalar config field (the "lambda" alias
    works here too); ``sweep_values`` lists the settings to run. Returns
    (base_config, param_name, tuple_of_values).
    """
    data = _load_mapping(text, source)
    try:
        raw_param = data.pop("sweep_param")
        raw_values = data.pop("sweep_values")
    except KeyError as err:
        raise ConfigError(
            f"sweep config needs sweep_param and sweep_values, missing "
            f"{err.args[0]!r}") from None
    param = _ALIASES.get(raw_param, raw_param)
    if param not in _CASTERS or _CASTERS[param] is _cast_tuple:
        raise ConfigError(f"sweep_param must name a scalar config field, "
                          f"got {raw_param!r}")
    if not isinstance(raw_values, (list, tuple)) or not raw_values:
        raise ConfigError("sweep_values must be a nonempty list")
    base = ScenarioConfig(**_canonical_items(data))
    values = tuple(_CASTERS[param](param, v) for v in raw_values)
    for v in values:  # validate each setting eagerly, not at run time
        replace(base, **{param: v})
    return base, param, values


def load_sweep(path):
    """Read and parse a YAML sweep config file."""
    with open(path) as fh:
        return parse_sweep(fh.read(), source=str(path))


def to_flat(cfg):
    """Flatten a config to an ordered str-to-str mapping.

    Floats use ``repr`` and tuples are comma-joined, so
    :func:`from_flat` reproduces the config exactly.
    """
    out = {}
    for f in fields(ScenarioConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            out[f.name] = ",".join(repr(v) for v in value)
        elif isinstance(value, float):
            out[f.name] = repr(value)
        else:
            out[f.name] = str(value)
    return out


def from_flat(mapping):
    """Rebuild a config from its flat string form; extra keys are
    ignored so episode metadata can carry more than the config."""
    kwargs = {}
    for f in fields(ScenarioConfig):
        if f.name not in mapping:
            continue
        raw = mapping[f.name]
        if _CASTERS[f.name] is _cast_int:
            kwargs[f.name] = int(raw)
        elif _CASTERS[f.name] is _cast_float:
            kwargs[f.name] = float(raw)
        else:
            kwargs[f.name] = tuple(float(v) for v in raw.split(","))
    return ScenarioConfig(**kwargs)


def config_digest(cfg):
    """Short stable hash of a config, for output provenance headers."""
    flat = to_flat(cfg)
    blob = "\n".join(f"{k}={flat[k]}" for k in flat).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
