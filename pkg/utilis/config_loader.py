import json
import os

import attr
from attr import validators as v
from dotenv import load_dotenv

from spinbus.errors import ConfigError, SpinBusError
from utilis.logger import get_logger

logger = get_logger(__name__)

load_dotenv()

COMMANDS = ("evolve", "fidelity", "optimize", "noise", "twoway")


def _positive(instance, attribute, value):
    if value is not None and not value > 0:
        raise ValueError(f"must be > 0, got {value}")


def _non_negative(instance, attribute, value):
    if value is not None and value < 0:
        raise ValueError(f"must be >= 0, got {value}")


def _number_list(instance, attribute, value):
    if value is None:
        return
    if not isinstance(value, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        raise ValueError(f"must be a list of numbers, got {value!r}")


def _qubit_list(instance, attribute, value):
    for x in value:
        if isinstance(x, str):
            continue
        if isinstance(x, list) and len(x) == 2 and all(isinstance(c, (int, float)) for c in x):
            continue
        raise ValueError(f"qubit states are labels ('0', '1', '+', '-', '+i', '-i') or [a0, a1], got {x!r}")


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _range_pair(instance, attribute, value):
    if value is None:
        return
    if not isinstance(value, list) or len(value) != 2 or not all(_is_number(x) for x in value):
        raise ValueError(f"must be [lo, hi], got {value!r}")
    if value[0] > value[1]:
        raise ValueError(f"lo must not exceed hi, got {value!r}")


def _grid_lists(instance, attribute, value):
    if value is None:
        return
    if not isinstance(value, list) or not value:
        raise ValueError(f"must be one list of field values per pair, got {value!r}")
    for i, grid in enumerate(value, start=1):
        if not isinstance(grid, list) or not grid or not all(_is_number(x) for x in grid):
            raise ValueError(f"grid for pair {i} must be a non-empty list of numbers, got {grid!r}")


def _length_list(instance, attribute, value):
    if value is None:
        return
    if not isinstance(value, list) or not value or not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
        raise ValueError(f"must be a non-empty list of integers, got {value!r}")


_num = v.instance_of((int, float))


# ===========================
# Config sections
# ===========================
@attr.s(frozen=True)
class LayoutConfig:
    pair_count = attr.ib(validator=v.instance_of(int))
    chain_length = attr.ib(default=None, validator=v.optional(v.instance_of(int)))
    # optimize only: one search per chain length
    chain_lengths = attr.ib(default=None, validator=_length_list)


@attr.s(frozen=True)
class ParamsConfig:
    J = attr.ib(default=1.0, validator=[_num, _positive])
    J0 = attr.ib(default=1.0, validator=_num)
    h0 = attr.ib(default=0.0, validator=_num)
    h = attr.ib(factory=list, validator=_number_list)


@attr.s(frozen=True)
class StrategyConfig:
    kind = attr.ib(default="S1", validator=v.in_(("S1", "S2")))
    coupling_range = attr.ib(default=None, validator=_range_pair)
    coupling_step = attr.ib(default=None, validator=[v.optional(_num), _positive])
    coupling_values = attr.ib(default=None, validator=_number_list)
    h_max = attr.ib(default=1.5, validator=[_num, _non_negative])
    h_step = attr.ib(default=0.05, validator=[_num, _positive])
    h_values = attr.ib(default=None, validator=_grid_lists)
    refine = attr.ib(default=False, validator=v.instance_of(bool))


@attr.s(frozen=True)
class TimeConfig:
    tau_min = attr.ib(default=1.0, validator=[_num, _non_negative])
    tau_max = attr.ib(default=500.0, validator=[_num, _non_negative])
    tau_step = attr.ib(default=0.25, validator=[_num, _positive])
    tau = attr.ib(default=None, validator=_number_list)


@attr.s(frozen=True)
class ChannelConfig:
    spectators = attr.ib(default="plus", validator=v.in_(("plus", "zero", "haar-mean")))
    target = attr.ib(default="calibrated", validator=v.in_(("calibrated", "ideal")))
    samples = attr.ib(default=4, validator=[v.instance_of(int), _positive])


@attr.s(frozen=True)
class DynamicsConfig:
    method = attr.ib(default="auto", validator=v.in_(("auto", "spectral", "krylov")))
    spectral_max_dim = attr.ib(default=4000, validator=[v.instance_of(int), _positive])
    chunk = attr.ib(default=64, validator=[v.instance_of(int), _positive])


@attr.s(frozen=True)
class NoiseConfig:
    gammas = attr.ib(factory=lambda: [0.0], validator=_number_list)
    tau = attr.ib(default=None, validator=v.optional(_num))
    dt = attr.ib(default=0.01, validator=[_num, _positive])
    integrator = attr.ib(default="rk4", validator=v.in_(("rk4", "strang")))
    dephase_registers = attr.ib(default=True, validator=v.instance_of(bool))


@attr.s(frozen=True)
class TwowayConfig:
    psi = attr.ib(factory=lambda: ["+", "0"], validator=_qubit_list)
    phi = attr.ib(factory=lambda: ["0", "1"], validator=_qubit_list)


@attr.s(frozen=True)
class OutputConfig:
    landscape = attr.ib(default=True, validator=v.instance_of(bool))
    dir = attr.ib(default=None, validator=v.optional(v.instance_of(str)))


@attr.s(frozen=True)
class ExperimentConfig:
    command = attr.ib(validator=v.in_(COMMANDS))
    layout = attr.ib()
    params = attr.ib(factory=ParamsConfig)
    strategy = attr.ib(factory=StrategyConfig)
    time = attr.ib(factory=TimeConfig)
    channel = attr.ib(factory=ChannelConfig)
    dynamics = attr.ib(factory=DynamicsConfig)
    noise = attr.ib(factory=NoiseConfig)
    twoway = attr.ib(factory=TwowayConfig)
    output = attr.ib(factory=OutputConfig)
    seed = attr.ib(default=0, validator=[v.instance_of(int), _non_negative])
    # echo of a previous run's outcome; carried through, never used for computation
    result = attr.ib(default=None)
    raw = attr.ib(factory=dict, eq=False, repr=False)


SECTIONS = {
    "layout": LayoutConfig,
    "params": ParamsConfig,
    "strategy": StrategyConfig,
    "time": TimeConfig,
    "channel": ChannelConfig,
    "dynamics": DynamicsConfig,
    "noise": NoiseConfig,
    "twoway": TwowayConfig,
    "output": OutputConfig,
}
TOP_LEVEL = {"command", "seed", "result", *SECTIONS}


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    names = {a.name for a in attr.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}", f"unknown key (allowed: {', '.join(sorted(names))})")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(path, str(e)) from None
    except (ValueError, SpinBusError) as e:
        raise ConfigError(path, str(e)) from None


def _check_layout(layout, command):
    if layout.chain_lengths is not None:
        if command != "optimize":
            raise ConfigError("layout.chain_lengths", "only the optimize command sweeps chain lengths")
        if layout.chain_length is not None:
            raise ConfigError("layout.chain_length", "give either chain_length or chain_lengths")
    elif layout.chain_length is None:
        raise ConfigError("layout.chain_length", "missing")


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config dict; unknown keys anywhere are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in data:
        if key not in TOP_LEVEL:
            raise ConfigError(key, f"unknown key (allowed: {', '.join(sorted(TOP_LEVEL))})")
    if "command" not in data:
        raise ConfigError("command", "missing")
    if "layout" not in data:
        raise ConfigError("layout", "missing")

    sections = {name: _build(cls, data[name], name) for name, cls in SECTIONS.items() if name in data}
    _check_layout(sections["layout"], data["command"])
    try:
        return ExperimentConfig(
            command=data["command"], seed=data.get("seed", 0), result=data.get("result"), raw=data, **sections
        )
    except (TypeError, ValueError) as e:
        raise ConfigError("<root>", str(e)) from None


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment config."""
    if not os.path.exists(path):
        logger.error(f"Config not found: {path!r}")
        raise ConfigError(str(path), "file not found")
    try:
        with open(path, mode="r", encoding="utf-8") as file:
            data = json.load(file)
    except json.JSONDecodeError as e:
        logger.error(f"Config {path!r} is not valid JSON: {e}")
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    config = parse_config(data)
    logger.info(f"Loaded config: {path} (command={config.command})")
    return config


def env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(name, f"expected an integer, got {value!r}") from None
