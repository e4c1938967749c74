"""YAML experiment files and run manifests.

A config file has an ``experiment`` section (fields of
:class:`~dqarls.simulation.ExperimentConfig`, with ``network``, ``profiles``
and ``quantizer`` subsections) and an optional ``power`` section. A manifest
written by ``dqarls run`` is itself a valid config: its extra ``manifest`` and
``quantizers`` sections are descriptive and ignored on load.
"""
from __future__ import annotations

import dataclasses
import platform
import typing
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .power import DEFAULT_REFERENCE_BITS, PowerModel
from .simulation import ExperimentConfig, Scenario, bits_label

DESCRIPTIVE_SECTIONS = ("manifest", "quantizers")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        where = ""
        if path and line:
            where = f"{path}:{line}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class PowerConfig:
    bandwidth: float = 200e3
    conversion_energy: float = 494e-15
    adcs_per_node: int = 2
    reference_bits: int = DEFAULT_REFERENCE_BITS

    def model(self, node_count: int) -> PowerModel:
        return PowerModel(self.bandwidth, self.conversion_energy, node_count, self.adcs_per_node)


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig = dataclasses.field(default_factory=ExperimentConfig)
    power: PowerConfig = dataclasses.field(default_factory=PowerConfig)


def _line_map(node, prefix=(), out=None) -> dict:
    """Map key paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = prefix + (str(key_node.value),)
            out[path] = key_node.start_mark.line + 1
            _line_map(value_node, path, out)
    return out


def _convert(hint, value, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        if where.endswith("bit_depths[]") and value == "full":
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], v, where + "[]") for v in value)
        if len(value) != len(args):
            raise ConfigError(f"{where}: expected {len(args)} entries, got {len(value)}")
        return tuple(_convert(a, v, where + "[]") for a, v in zip(args, value))
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported config type {hint!r}")


def _build(cls, data, prefix: tuple, lines: dict, source: str | None):
    if data is None:
        data = {}
    name = ".".join(prefix)
    if not isinstance(data, dict):
        raise ConfigError(f"section {name} must be a mapping", lines.get(prefix), source)
    hints = typing.get_type_hints(cls)
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = prefix + (str(key),)
        if key not in fields:
            raise ConfigError(
                f"unknown key {'.'.join(path)!r} (allowed: {', '.join(sorted(fields))})",
                lines.get(path),
                source,
            )
        hint = hints[key]
        try:
            if dataclasses.is_dataclass(hint):
                kwargs[key] = _build(hint, value, path, lines, source)
            else:
                kwargs[key] = _convert(hint, value, ".".join(path))
        except ConfigError as exc:
            if exc.line is None:
                raise ConfigError(str(exc), lines.get(path), source) from None
            raise
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid {name or 'config'}: {exc}", lines.get(prefix), source) from None


def parse_config(text: str, source: str | None = None) -> RunConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line, source) from None
    lines = _line_map(root) if root is not None else {}
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping with an 'experiment' section", 1, source)
    for key in data:
        if key not in ("experiment", "power") + DESCRIPTIVE_SECTIONS:
            raise ConfigError(
                f"unknown section {key!r} (allowed: experiment, power)", lines.get((str(key),)), source
            )
    experiment = _build(ExperimentConfig, data.get("experiment"), ("experiment",), lines, source)
    power = _build(PowerConfig, data.get("power"), ("power",), lines, source)
    return RunConfig(experiment, power)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), str(path))


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_dict(run: RunConfig) -> dict:
    experiment = _plain(run.experiment)
    experiment["bit_depths"] = [b if b is not None else "full" for b in run.experiment.bit_depths]
    return {"experiment": experiment, "power": _plain(run.power)}


def manifest_dict(run: RunConfig, scenario: Scenario, extra: dict | None = None) -> dict:
    """Resolved config plus a description of everything derived from it."""
    topo = scenario.topology
    model = run.power.model(run.experiment.node_count)
    out = config_dict(run)
    out["manifest"] = {
        "tool": "dqarls",
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "master_seed": run.experiment.master_seed,
        "seed_derivation": "SeedSequence(master_seed).spawn(4) -> topology, profiles, system, trials",
        "topology": {"mean_degree": float(topo.degrees.mean()), "edge_count": len(topo.edges())},
        "input_variances": scenario.input_variances.tolist(),
        "noise_variances": scenario.noise_variances.tolist(),
        "system": {"real": scenario.system.real.tolist(), "imag": scenario.system.imag.tolist()},
        "power_model": dataclasses.asdict(model),
    }
    if extra:
        out["manifest"].update(extra)
    out["quantizers"] = {
        bits_label(b): {
            "alpha": float(spec.alpha),
            "thresholds": [float(t) for t in spec.thresholds[1:-1]],
            "labels": spec.labels.tolist(),
        }
        for b, spec in scenario.specs.items()
    }
    return out


def dump_yaml(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)
