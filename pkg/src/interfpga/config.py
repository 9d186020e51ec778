"""
Experiment configuration files.

A config is a YAML or JSON mapping with optional sections ``cluster``,
``beff``, ``swe``, ``scaling``, ``pipeline``, ``model`` and ``mesh`` plus
``out_dir``. Every section maps onto a dataclass below; unknown keys are
rejected. The cluster section starts from a preset and overrides
individual link, scheduling, memory and transport parameters.
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .beff import DEFAULT_SIZES
from .errors import ConfigurationError
from .netsim import TransportKind
from .perfmodel import ALL_MODES, TransferMode
from .presets import Cluster, get_preset


@dataclass(frozen=True)
class ClusterSection:
    preset: str = "direct-udp-pl"
    mode: str | None = None
    clock_hz: float | None = None
    link: dict = field(default_factory=dict)
    sched: dict = field(default_factory=dict)
    mem: dict = field(default_factory=dict)
    transport: dict = field(default_factory=dict)

    def resolve(self) -> Cluster:
        """The preset with every override applied and validated."""
        c = get_preset(self.preset)
        transport = dict(self.transport)
        if "kind" in transport:
            transport["kind"] = _enum(TransportKind, transport["kind"], "cluster.transport.kind")
        c = replace(
            c,
            link=_override(c.link, self.link, "cluster.link"),
            sched=_override(c.sched, self.sched, "cluster.sched"),
            mem=_override(c.mem, self.mem, "cluster.mem"),
            transport=_override(c.transport, transport, "cluster.transport"),
        )
        if self.mode is not None:
            c = c.with_mode(parse_mode(self.mode))
        if self.clock_hz is not None:
            if not self.clock_hz > 0:
                raise ConfigurationError("cluster.clock_hz must be positive")
            c = replace(c, clock_hz=float(self.clock_hz))
        return c


@dataclass(frozen=True)
class BeffSection:
    nodes: int = 2
    sizes: tuple[int, ...] = DEFAULT_SIZES
    repetitions: int = 10
    mode: str | None = None


@dataclass(frozen=True)
class SweSection:
    nx: int = 40
    ny: int = 40
    sea_side: str | None = "east"
    cell_size: float = 100.0
    k: int = 4
    method: str = "rcb"
    steps: int = 100
    dt: float | None = None          # None: 0.9 of the CFL limit
    g: float = 9.81
    sea_depth: float = 10.0
    tide_amplitude: float = 0.5
    tide_period: float = 3600.0
    initial: str = "bump"            # bump, dam-break or rest
    snapshot_every: int = 0
    check_oracle: bool = False
    streamed_recv: bool = False


@dataclass(frozen=True)
class ScalingSection:
    kind: str = "weak"
    ks: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 48)
    elements_per_partition: int = 6500
    strong_elements: int = 108_000
    method: str = "rcb"
    steps: int = 2
    bytes_per_element: int = 32


@dataclass(frozen=True)
class PipelineSection:
    f: float | None = None           # None: the cluster clock
    l_pipe: float = 100.0
    d_ext: float = 200.0
    flop_per_element: float = 350.0


@dataclass(frozen=True)
class ModelSection:
    sizes: tuple[int, ...] = DEFAULT_SIZES
    modes: tuple[str, ...] = tuple(str(m) for m in ALL_MODES)


@dataclass(frozen=True)
class MeshSection:
    nx: int = 40
    ny: int = 40
    sea_side: str | None = "east"
    cell_size: float = 100.0
    k: int = 4
    method: str = "rcb"
    bytes_per_element: int = 32


@dataclass(frozen=True)
class ExperimentConfig:
    cluster: ClusterSection = field(default_factory=ClusterSection)
    beff: BeffSection = field(default_factory=BeffSection)
    swe: SweSection = field(default_factory=SweSection)
    scaling: ScalingSection = field(default_factory=ScalingSection)
    pipeline: PipelineSection = field(default_factory=PipelineSection)
    model: ModelSection = field(default_factory=ModelSection)
    mesh: MeshSection = field(default_factory=MeshSection)
    out_dir: str = "."


def parse_mode(text: str) -> TransferMode:
    try:
        return TransferMode.parse(text)
    except ValueError:
        known = ", ".join(str(m) for m in ALL_MODES)
        raise ConfigurationError(f"unknown transfer mode {text!r}; expected one of {known}") from None


def _enum(enum_cls, value, where: str):
    try:
        return enum_cls(value)
    except ValueError:
        known = ", ".join(e.value for e in enum_cls)
        raise ConfigurationError(f"{where}: {value!r} is not one of {known}") from None


def _override(obj, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigurationError(f"{where} must be a mapping")
    names = {f.name for f in fields(obj)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}; allowed: {sorted(names)}")
    try:
        return replace(obj, **values)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"{where}: {e}") from None


def _coerce(value: Any, hint: Any, where: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], where)
    if dataclasses.is_dataclass(hint):
        return from_dict(hint, value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{where}: expected a list, got {value!r}")
        return tuple(_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value))
    if hint is dict or origin is dict:
        if not isinstance(value, dict):
            raise ConfigurationError(f"{where}: expected a mapping, got {value!r}")
        return dict(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where}: expected true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def from_dict(cls, data: Any, where: str = "config"):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}; allowed: {names}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}") for k, v in data.items()}
    return cls(**kwargs)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e.strerror}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigurationError(f"cannot parse config {path}: {e}") from None
    return from_dict(ExperimentConfig, data)


def override(section, **values):
    """Replace the fields whose value is not None."""
    return replace(section, **{k: v for k, v in values.items() if v is not None})


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if hasattr(obj, "value") and not isinstance(obj, (int, float)):
        return obj.value
    return obj


def effective_config(cfg: ExperimentConfig) -> dict:
    """The config with the cluster preset expanded into explicit parameters."""
    cluster = cfg.cluster.resolve()
    out = _plain(cfg)
    out["cluster"] = {
        "preset": cfg.cluster.preset,
        "mode": str(cluster.mode),
        "clock_hz": cluster.clock_hz,
        "link": _plain(cluster.link),
        "sched": _plain(cluster.sched),
        "mem": _plain(cluster.mem),
        "transport": _plain(cluster.transport),
    }
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(effective_config(cfg), sort_keys=False)
