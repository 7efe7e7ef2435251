"""Scenario files: JSON documents describing a verification problem.

Example::

    {
      "plant": "acasxu",
      "period": 1.0,
      "horizon": 20,
      "commands": [0, 1.5, -1.5, 3, -3],
      "command_names": ["COC", "WL", "WR", "SL", "SR"],
      "networks": {"COC": "coc.nnet", "WL": "wl.nnet", ...},
      "collision_radius": 500,
      "target_radius": 8000,
      "partition": {"arc_count": 36, "heading_bin_count": 8}
    }

Network paths are resolved against a networks directory, defaulting to the
directory holding the scenario file.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple

from .closedloop import ScenarioSpec
from .controller import CommandSet, ControllerSpec
from .network import load_network
from .odesim import make_plant
from .partition import PartitionParams

__all__ = ["ScenarioError", "Scenario", "load_scenario", "scenario_from_dict"]

_REQUIRED = ("commands", "networks")
_OPTIONAL = {
    "plant": "acasxu",
    "period": 1.0,
    "horizon": 20,
    "command_names": None,
    "pre": "acasxu",
    "transformer": "symbolic",
    "collision_radius": 500.0,
    "target_radius": 8000.0,
    "integration_steps": 10,
    "resize_threshold": 5,
    "taylor_order": 4,
    "max_split_depth": 0,
    "split_dims": [0, 1, 2],
    "partition": None,
    "description": "",
}
_PARTITION_KEYS = {f.name for f in fields(PartitionParams)}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    spec: ScenarioSpec
    partition: PartitionParams
    max_split_depth: int = 0


def load_scenario(path: str, networks_dir: Optional[str] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> Scenario:
    """Read and validate a scenario file.

    ``overrides`` replaces top-level keys after parsing (used for CLI flags).
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
    if networks_dir is None:
        networks_dir = os.path.dirname(os.path.abspath(path))
    return scenario_from_dict(doc, networks_dir, overrides)


def _fail(msg: str):
    raise ScenarioError(msg)


def scenario_from_dict(doc: Mapping[str, Any], networks_dir: str = ".",
                       overrides: Optional[Mapping[str, Any]] = None) -> Scenario:
    if not isinstance(doc, Mapping):
        _fail("scenario must be a JSON object")
    unknown = sorted(set(doc) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        _fail(f"unknown scenario keys: {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        _fail(f"missing scenario keys: {', '.join(missing)}")
    cfg: Dict[str, Any] = dict(_OPTIONAL)
    cfg.update(doc)
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})

    if cfg["plant"] != "acasxu":
        _fail(f"plant: only 'acasxu' scenarios can be loaded from files, got {cfg['plant']!r}")
    try:
        commands = CommandSet(cfg["commands"], tuple(cfg["command_names"] or ()))
    except (TypeError, ValueError) as exc:
        _fail(f"commands: {exc}")

    table = cfg["networks"]
    if not isinstance(table, Mapping):
        _fail("networks: expected an object mapping commands to network files")
    nets: Dict[int, Any] = {}
    bad = []
    for key, fname in table.items():
        try:
            idx = commands.index(key)
        except KeyError:
            bad.append(key)
            continue
        if idx in nets:
            _fail(f"networks: command {key!r} listed twice")
        fpath = fname if os.path.isabs(fname) else os.path.join(networks_dir, fname)
        if not os.path.isfile(fpath):
            _fail(f"networks: file for command {key!r} not found: {fpath}")
        nets[idx] = load_network(fpath)
    if bad:
        _fail(f"networks: unknown command keys {', '.join(map(repr, bad))}")
    absent = [commands.label(i) for i in range(len(commands)) if i not in nets]
    if absent:
        _fail(f"networks: no network for command(s) {', '.join(absent)}")

    part = cfg["partition"] or {}
    unknown = sorted(set(part) - _PARTITION_KEYS)
    if unknown:
        _fail(f"unknown partition keys: {', '.join(unknown)}")
    part = dict(part)
    part.setdefault("sensor_radius", cfg["target_radius"])
    part.setdefault("collision_radius", cfg["collision_radius"])
    if "initial_command" in part:
        try:
            part["initial_command"] = commands.index(part["initial_command"])
        except KeyError as exc:
            _fail(f"partition.initial_command: {exc.args[0]}")

    gamma = int(cfg["resize_threshold"])
    if gamma < len(commands):
        _fail(f"resize_threshold: {gamma} is below the number of commands {len(commands)}")
    if int(cfg["max_split_depth"]) < 0:
        _fail("max_split_depth: must be non-negative")
    try:
        controller = ControllerSpec(commands, [nets[i] for i in range(len(commands))],
                                    period=cfg["period"], pre=cfg["pre"], transformer=cfg["transformer"])
        spec = ScenarioSpec(
            plant=make_plant(cfg["plant"]),
            controller=controller,
            horizon=int(cfg["horizon"]),
            integration_steps=int(cfg["integration_steps"]),
            resize_threshold=gamma,
            collision_radius=float(cfg["collision_radius"]),
            target_radius=float(cfg["target_radius"]),
            taylor_order=int(cfg["taylor_order"]),
            split_dims=tuple(cfg["split_dims"]),
        )
        partition = PartitionParams(**part)
    except (TypeError, ValueError) as exc:
        _fail(str(exc))
    if not 1 <= spec.taylor_order <= 6:
        _fail("taylor_order: must be in 1..6")
    return Scenario(spec, partition, int(cfg["max_split_depth"]))
