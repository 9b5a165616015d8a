# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

"""Experiment configuration.

A configuration is a YAML file with the sections ``grid``, ``policies``,
``simulation``, ``optimization``, ``validation`` and ``output``; every section
and key is optional and falls back to :data:`DEFAULT_CONFIG`. Parsing is
strict: unknown keys, duplicate keys, wrong types and out-of-range values are
:class:`ConfigError` carrying the dotted path and line of the culprit.

Example::

    grid:
      p: {min: 0.1, max: 0.5, step: 0.1}
      q: [0.1, 0.3, 0.5]
      p_s: [0.3, 0.7]
    policies:
      - {kind: rs, p_sample: 0.5}
      - {kind: change_aware}
    simulation:
      horizon: 1000000
      seed: 42
"""

import logging
import os
from typing import Any, Callable, Dict, List, Optional, Tuple

import attr
import numpy as np
import yaml

from semcom.via import get_policy
from semcom.via.exc import ConfigError, InvalidParameterError
from semcom.via.policies import PolicyKind, PolicySpec

logger = logging.getLogger(__name__)

CONFIG_ENVVAR = "SEMCOM_VIA_CONFIG"
OUTPUT_FORMATS = ("csv", "json", "both")
GRID_DECIMALS = 12
MAX_AXIS_POINTS = 10_000

POLICY_ALIASES: Dict[str, PolicyKind] = {
    **{kind.value: kind for kind in PolicyKind},
    **{kind.short_name: kind for kind in PolicyKind},
}


class _Mapping(dict):
    """dict remembering the line of its own start and of each of its keys"""

    line: Optional[int] = None
    lines: Dict[str, int] = {}


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader: _LineLoader, node: yaml.MappingNode) -> _Mapping:
    loader.flatten_mapping(node)
    lines: Dict[str, int] = {}
    for key_node, _ in node.value:
        key = str(key_node.value)
        if key in lines:
            raise ConfigError(
                f"duplicate key `{key}`", path=key, line=key_node.start_mark.line + 1
            )
        lines[key] = key_node.start_mark.line + 1
    mapping = _Mapping(loader.construct_mapping(node, deep=True))
    mapping.line = node.start_mark.line + 1
    mapping.lines = lines
    return mapping


_LineLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping
)


class _Section:
    """Strict reader over one mapping of the configuration tree."""

    def __init__(self, data: Any, path: str, line: Optional[int] = None):
        if data is None:
            data = _Mapping()
        if not isinstance(data, dict):
            raise ConfigError("expected a mapping", path=path, line=line)
        self.data = data
        self.path = path
        self.line = getattr(data, "line", None) or line
        self.seen: List[str] = []

    def where(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def line_of(self, key: str) -> Optional[int]:
        return getattr(self.data, "lines", {}).get(key, self.line)

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, path=self.where(key), line=self.line_of(key))

    def get(self, key: str, default: Any, convert: Callable[[Any], Any]) -> Any:
        self.seen.append(key)
        if key not in self.data:
            return default
        try:
            return convert(self.data[key])
        except (TypeError, ValueError) as e:
            raise self.error(key, str(e)) from None

    def sub(self, key: str) -> "_Section":
        self.seen.append(key)
        return _Section(self.data.get(key), self.where(key), self.line_of(key))

    def finish(self) -> None:
        for key in self.data:
            if key not in self.seen:
                raise self.error(str(key), f"unknown key `{key}`")


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"expected a number, got {value!r}")
    return float(value)


def _probability(value: Any) -> float:
    number = _number(value)
    if not 0.0 <= number <= 1.0:
        raise ValueError(f"must lie in [0, 1], got {number}")
    return number


def _integer(minimum: int) -> Callable[[Any], int]:
    def convert(value: Any) -> int:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected an integer, got {value!r}")
        if value < minimum:
            raise ValueError(f"must be at least {minimum}, got {value}")
        return value

    return convert


def _positive_number(value: Any) -> float:
    number = _number(value)
    if not number > 0:
        raise ValueError(f"must be positive, got {number}")
    return number


def _boolean(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError(f"expected true or false, got {value!r}")
    return value


def _string(value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError(f"expected a string, got {value!r}")
    return value


def _axis(data: Any, path: str, line: Optional[int]) -> Tuple[float, ...]:
    """Grid axis given either as an explicit list or as ``{min, max, step}``."""
    if isinstance(data, list):
        values = []
        for value in data:
            try:
                values.append(_probability(value))
            except (TypeError, ValueError) as e:
                raise ConfigError(str(e), path=path, line=line) from None
        return tuple(sorted(set(values)))
    section = _Section(data, path, line)
    lower = section.get("min", None, _probability)
    upper = section.get("max", None, _probability)
    step = section.get("step", None, _positive_number)
    section.finish()
    for key, value in (("min", lower), ("max", upper), ("step", step)):
        if value is None:
            raise section.error(key, "missing required key")
    if upper < lower:
        return ()
    count = int(np.floor((upper - lower) / step + 1e-9)) + 1
    if count > MAX_AXIS_POINTS:
        raise section.error("step", f"range yields {count} points")
    values = np.round(lower + step * np.arange(count), GRID_DECIMALS)
    return tuple(float(v) for v in values if v <= 1.0)


@attr.s(frozen=True)
class GridConfig:
    p = attr.ib(type=Tuple[float, ...])
    q = attr.ib(type=Tuple[float, ...])
    p_s = attr.ib(type=Tuple[float, ...])

    @property
    def size(self) -> int:
        return len(self.p) * len(self.q) * len(self.p_s)


@attr.s(frozen=True)
class PolicyConfig:
    kind = attr.ib(type=PolicyKind)
    p_sample = attr.ib(type=Optional[float], default=None)
    name = attr.ib(type=str, default="")

    def build(self) -> PolicySpec:
        kwargs = {} if self.p_sample is None else {"p_sample": self.p_sample}
        return get_policy(self.kind.value, **kwargs)


@attr.s(frozen=True)
class SimulationSettings:
    enabled = attr.ib(type=bool, default=True)
    horizon = attr.ib(type=int, default=10**7)
    burn_in = attr.ib(type=int, default=10**4)
    seed = attr.ib(type=int, default=0)
    reps = attr.ib(type=int, default=1)
    histogram_cap = attr.ib(type=int, default=64)
    batches = attr.ib(type=int, default=32)


@attr.s(frozen=True)
class OptimizationSettings:
    eta = attr.ib(type=float, default=0.5)
    e_max = attr.ib(type=float, default=0.5)
    delta = attr.ib(type=float, default=0.1)


@attr.s(frozen=True)
class ValidationSettings:
    oracle_tolerance = attr.ib(type=float, default=1e-9)
    finite_chain_tolerance = attr.ib(type=float, default=1e-12)
    mc_relative_tolerance = attr.ib(type=float, default=0.01)
    mc_stderr_factor = attr.ib(type=float, default=3.0)
    truncation = attr.ib(type=int, default=400)
    compare_levels = attr.ib(type=int, default=50)


@attr.s(frozen=True)
class OutputSettings:
    format = attr.ib(type=str, default="both")
    directory = attr.ib(type=str, default=".")

    @property
    def csv(self) -> bool:
        return self.format in ("csv", "both")

    @property
    def json(self) -> bool:
        return self.format in ("json", "both")


DEFAULT_POLICIES = (
    PolicyConfig(PolicyKind.RANDOMIZED_STATIONARY, p_sample=0.5, name="rs"),
    PolicyConfig(PolicyKind.CHANGE_AWARE, name="ca"),
    PolicyConfig(PolicyKind.SEMANTICS_AWARE, name="sa"),
)


@attr.s(frozen=True)
class ExperimentConfig:
    grid = attr.ib(type=GridConfig)
    policies = attr.ib(type=Tuple[PolicyConfig, ...], default=DEFAULT_POLICIES)
    simulation = attr.ib(type=SimulationSettings, factory=SimulationSettings)
    optimization = attr.ib(type=OptimizationSettings, factory=OptimizationSettings)
    validation = attr.ib(type=ValidationSettings, factory=ValidationSettings)
    output = attr.ib(type=OutputSettings, factory=OutputSettings)

    def policy_names(self) -> List[str]:
        return [policy.name for policy in self.policies]

    def as_dict(self) -> Dict[str, Any]:
        """Plain, JSON-serializable view used in output metadata"""

        def serialize(inst, field, value):
            if isinstance(value, PolicyKind):
                return value.value
            return value

        return attr.asdict(self, value_serializer=serialize)


DEFAULT_GRID = GridConfig(
    p=(0.1, 0.2, 0.3, 0.4, 0.5), q=(0.1, 0.2, 0.3, 0.4, 0.5), p_s=(0.3, 0.7)
)
DEFAULT_CONFIG = ExperimentConfig(grid=DEFAULT_GRID)


def _grid(section: _Section) -> GridConfig:
    def axis(key: str, default: Tuple[float, ...]) -> Tuple[float, ...]:
        section.seen.append(key)
        if key not in section.data:
            return default
        return _axis(section.data[key], section.where(key), section.line_of(key))

    grid = GridConfig(
        p=axis("p", DEFAULT_GRID.p),
        q=axis("q", DEFAULT_GRID.q),
        p_s=axis("p_s", DEFAULT_GRID.p_s),
    )
    section.finish()
    return grid


def _policy(section: _Section) -> PolicyConfig:
    kind_name = section.get("kind", None, _string)
    if kind_name is None:
        raise section.error("kind", "missing required key")
    if kind_name not in POLICY_ALIASES:
        raise section.error(
            "kind",
            f"unknown policy kind `{kind_name}`; "
            f"expected one of {', '.join(POLICY_ALIASES)}",
        )
    kind = POLICY_ALIASES[kind_name]
    p_sample = section.get("p_sample", None, _probability)
    name = section.get("name", None, _string)
    section.finish()
    if kind is PolicyKind.RANDOMIZED_STATIONARY and p_sample is None:
        raise section.error("p_sample", "required for the randomized policy")
    if kind is not PolicyKind.RANDOMIZED_STATIONARY and p_sample is not None:
        raise section.error("p_sample", f"not a parameter of {kind.value}")
    policy = PolicyConfig(kind=kind, p_sample=p_sample, name=name or kind.short_name)
    try:
        policy.build()
    except InvalidParameterError as e:
        raise ConfigError(str(e), path=section.path, line=section.line) from None
    return policy


def _policies(data: Any, path: str, line: Optional[int]) -> Tuple[PolicyConfig, ...]:
    if not isinstance(data, list) or not data:
        raise ConfigError("expected a non-empty list of policies", path, line)
    policies = []
    names: Dict[str, int] = {}
    for i, item in enumerate(data):
        section = _Section(item, f"{path}[{i}]", line)
        policy = _policy(section)
        if policy.name in names:
            raise ConfigError(
                f"duplicate policy name `{policy.name}` (also used by "
                f"{path}[{names[policy.name]}]); set `name` to tell them apart",
                path=section.path,
                line=section.line,
            )
        names[policy.name] = i
        policies.append(policy)
    return tuple(policies)


def _simulation(section: _Section) -> SimulationSettings:
    defaults = SimulationSettings()
    settings = SimulationSettings(
        enabled=section.get("enabled", defaults.enabled, _boolean),
        horizon=section.get("horizon", defaults.horizon, _integer(1)),
        burn_in=section.get("burn_in", defaults.burn_in, _integer(0)),
        seed=section.get("seed", defaults.seed, _integer(0)),
        reps=section.get("reps", defaults.reps, _integer(1)),
        histogram_cap=section.get(
            "histogram_cap", defaults.histogram_cap, _integer(1)
        ),
        batches=section.get("batches", defaults.batches, _integer(1)),
    )
    section.finish()
    if settings.burn_in >= settings.horizon:
        raise section.error("burn_in", "must be smaller than horizon")
    if settings.seed >= 2**64:
        raise section.error("seed", "must fit in 64 bits")
    return settings


def _optimization(section: _Section) -> OptimizationSettings:
    defaults = OptimizationSettings()
    settings = OptimizationSettings(
        eta=section.get("eta", defaults.eta, _probability),
        e_max=section.get("e_max", defaults.e_max, _probability),
        delta=section.get("delta", defaults.delta, _positive_number),
    )
    section.finish()
    if settings.e_max == 0.0:
        raise section.error("e_max", "must lie in (0, 1]")
    return settings


def _validation(section: _Section) -> ValidationSettings:
    defaults = ValidationSettings()
    settings = ValidationSettings(
        oracle_tolerance=section.get(
            "oracle_tolerance", defaults.oracle_tolerance, _positive_number
        ),
        finite_chain_tolerance=section.get(
            "finite_chain_tolerance", defaults.finite_chain_tolerance, _positive_number
        ),
        mc_relative_tolerance=section.get(
            "mc_relative_tolerance", defaults.mc_relative_tolerance, _positive_number
        ),
        mc_stderr_factor=section.get(
            "mc_stderr_factor", defaults.mc_stderr_factor, _positive_number
        ),
        truncation=section.get("truncation", defaults.truncation, _integer(2)),
        compare_levels=section.get(
            "compare_levels", defaults.compare_levels, _integer(1)
        ),
    )
    section.finish()
    if settings.compare_levels > settings.truncation:
        raise section.error("compare_levels", "must not exceed truncation")
    return settings


def _output(section: _Section) -> OutputSettings:
    defaults = OutputSettings()
    settings = OutputSettings(
        format=section.get("format", defaults.format, _string),
        directory=section.get("directory", defaults.directory, _string),
    )
    section.finish()
    if settings.format not in OUTPUT_FORMATS:
        raise section.error(
            "format", f"expected one of {', '.join(OUTPUT_FORMATS)}"
        )
    return settings


def parse(data: Any) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from an already loaded tree."""
    root = _Section(data, "")
    grid = _grid(root.sub("grid"))
    policies = DEFAULT_POLICIES
    root.seen.append("policies")
    if "policies" in root.data:
        policies = _policies(
            root.data["policies"], "policies", root.line_of("policies")
        )
    config = ExperimentConfig(
        grid=grid,
        policies=policies,
        simulation=_simulation(root.sub("simulation")),
        optimization=_optimization(root.sub("optimization")),
        validation=_validation(root.sub("validation")),
        output=_output(root.sub("output")),
    )
    root.finish()
    return config


def load(text: str) -> ExperimentConfig:
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else None
        raise ConfigError(f"invalid YAML: {e.problem}", line=line) from None
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from None
    return parse(data)


def read(path: Optional[str] = None) -> ExperimentConfig:
    """Read the configuration at ``path``, or the one named by the
    ``SEMCOM_VIA_CONFIG`` environment variable; defaults when neither is
    set."""
    path = path or os.environ.get(CONFIG_ENVVAR)
    if not path:
        logger.info("No configuration file given, using defaults")
        return DEFAULT_CONFIG
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read configuration: {e.strerror}", path=path)
    logger.debug("Loading configuration from %s", path)
    return load(text)


def with_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> ExperimentConfig:
    """Apply the command-line overrides of the seed and output directory."""
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("must fit in 64 bits", path="--seed")
        config = attr.evolve(
            config, simulation=attr.evolve(config.simulation, seed=seed)
        )
    if out is not None:
        config = attr.evolve(config, output=attr.evolve(config.output, directory=out))
    return config
