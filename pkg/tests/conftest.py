import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from _oracles import TINY_NET_TEXT  # noqa: E402

from nnreach.benchmark import BENCHMARK_DIR  # noqa: E402
from nnreach.closedloop import ScenarioSpec  # noqa: E402
from nnreach.config import load_scenario  # noqa: E402
from nnreach.controller import CommandSet, ControllerSpec  # noqa: E402
from nnreach.network import ReluNetwork, loads_network  # noqa: E402
from nnreach.odesim import LinearPlant  # noqa: E402

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def tiny():
    return loads_network(TINY_NET_TEXT)


@pytest.fixture(scope="session")
def bench_path():
    return os.path.join(BENCHMARK_DIR, "scenario.json")


@pytest.fixture(scope="session")
def bench(bench_path):
    return load_scenario(bench_path)


def constant_net(m, winner, p=5):
    """Network whose argmin is always ``winner``."""
    b = np.full(p, 10.0)
    b[winner] = 0.0
    return ReluNetwork([np.zeros((p, m))], [b])


def linear_scenario(command=5.0, horizon=20, target=3.0, collision=0.5, M=10):
    """s' = -s + u with a constant controller; s settles at u, beyond the target radius."""
    plant = LinearPlant([[-1.0]], [[1.0]])
    cmds = CommandSet((command, 0.0))
    nets = [constant_net(1, 0, 2), constant_net(1, 0, 2)]
    ctrl = ControllerSpec(cmds, nets, period=1.0, pre="identity")
    return ScenarioSpec(plant, ctrl, horizon=horizon, integration_steps=M, resize_threshold=2,
                        collision_radius=collision, target_radius=target, position_dims=(0,), split_dims=(0,))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
