"""Desk-scale collision-avoidance benchmark.

Five small hand-built ReLU networks stand in for the lambda table. Each
maps ``(rho, theta, psi, v_own, v_int)`` to five advisory scores (lowest
wins) for clear-of-conflict, weak left/right and strong left/right. The
advisory is to turn away from the side the intruder is on once it is
within roughly 6000 ft, harder when closer. Each network slightly favours
the previous advisory.
"""
from __future__ import annotations

import json
import math
import os
from typing import List, Optional

import numpy as np

from .controller import ACASXU_COMMAND_NAMES, ACASXU_COMMANDS
from .network import ReluNetwork, dump_network

__all__ = ["benchmark_networks", "benchmark_scenario_dict", "write_benchmark", "BENCHMARK_DIR"]

BENCHMARK_DIR = os.path.join(os.path.dirname(__file__), "benchmarks")

INPUT_MEAN = (4000.0, 0.0, 0.0, 650.0, 600.0)
INPUT_RANGE = (8000.0, math.pi, math.pi, 100.0, 100.0)
INPUT_MIN = (0.0, -math.pi, -math.pi, 600.0, 500.0)
INPUT_MAX = (60000.0, math.pi, math.pi, 800.0, 700.0)

HYSTERESIS = 0.1
_SHIFT = 5.0  # keeps the second hidden layer active everywhere


def _layers(prev: int):
    # hidden 1: closeness and closeness biased to the left / right side
    W1 = np.zeros((3, 5))
    W1[:, 0] = -4.0
    W1[1, 1], W1[2, 1] = 3.0, -3.0
    b1 = np.array([1.0, 0.5, 0.5])
    # scores as affine maps of (hC, hL, hR)
    S = np.array([
        [0.5, 0.0, 0.0],   # COC
        [0.0, 1.0, -0.6],  # WL
        [0.0, -0.6, 1.0],  # WR
        [0.0, 2.0, -1.0],  # SL
        [0.0, -1.0, 2.0],  # SR
    ])
    c = np.array([0.0, 0.3, 0.3, 0.6, 0.6])
    c[prev] -= HYSTERESIS
    W2, b2 = S, c + _SHIFT
    W3, b3 = np.eye(5), np.full(5, -_SHIFT)
    return [W1, W2, W3], [b1, b2, b3]


def benchmark_networks() -> List[ReluNetwork]:
    """One network per previous advisory, indexed like the command set."""
    nets = []
    for prev in range(len(ACASXU_COMMANDS)):
        Ws, bs = _layers(prev)
        nets.append(ReluNetwork(Ws, bs, input_min=INPUT_MIN, input_max=INPUT_MAX,
                                input_mean=INPUT_MEAN, input_range=INPUT_RANGE))
    return nets


def benchmark_scenario_dict(arc_count: int = 36, heading_bin_count: int = 8) -> dict:
    return {
        "description": "desk-scale head-on and crossing encounters",
        "plant": "acasxu",
        "period": 1.0,
        "horizon": 20,
        "commands": list(ACASXU_COMMANDS),
        "command_names": list(ACASXU_COMMAND_NAMES),
        "networks": {n: f"{n.lower()}.nnet" for n in ACASXU_COMMAND_NAMES},
        "collision_radius": 500.0,
        "target_radius": 8000.0,
        "integration_steps": 10,
        "resize_threshold": 5,
        "taylor_order": 4,
        "max_split_depth": 0,
        "partition": {
            "arc_count": arc_count,
            "heading_bin_count": heading_bin_count,
            "v_own": 700.0,
            "v_int": 600.0,
            "initial_command": "COC",
        },
    }


def write_benchmark(directory: Optional[str] = None, **kw) -> str:
    """Write the networks and ``scenario.json`` to ``directory``; returns the scenario path."""
    directory = directory or BENCHMARK_DIR
    os.makedirs(directory, exist_ok=True)
    for name, net in zip(ACASXU_COMMAND_NAMES, benchmark_networks()):
        with open(os.path.join(directory, f"{name.lower()}.nnet"), "w") as fh:
            dump_network(net, fh, comment=f"benchmark advisory network, previous advisory {name}")
    path = os.path.join(directory, "scenario.json")
    with open(path, "w") as fh:
        json.dump(benchmark_scenario_dict(**kw), fh, indent=2)
        fh.write("\n")
    return path


if __name__ == "__main__":
    print(write_benchmark())
