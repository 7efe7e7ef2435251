import itertools
import math

import numpy as np
import pytest

from _oracles import box_samples, in_box, linear_solution, tube_violations
from conftest import constant_net, linear_scenario
from nnreach.closedloop import (
    ENCLOSURE_FAILURE,
    SAFE_HORIZON,
    SAFE_TERMINATED,
    UNSAFE_INTERSECTION,
    ReachResult,
    ScenarioSpec,
    SymbolicState,
    distance,
    join,
    min_sq_norm_lower,
    resize,
    step_reach,
    verify,
)
from nnreach.controller import CommandSet, ControllerSpec
from nnreach.interval import Box
from nnreach.network import ReluNetwork
from nnreach.odesim import LinearPlant


def st1(lo, hi, c=0):
    return SymbolicState(Box.from_pairs([(lo, hi)]), c)


def test_distance_and_join():
    a = SymbolicState(Box.from_pairs([(0, 2), (0, 2)]), 1)
    b = SymbolicState(Box.from_pairs([(3, 5), (4, 6)]), 1)
    assert distance(a, b) == 3 ** 2 + 4 ** 2
    assert join(a, b) == SymbolicState(Box.from_pairs([(0, 5), (0, 6)]), 1)
    with pytest.raises(ValueError):
        distance(a, SymbolicState(a.box, 2))
    with pytest.raises(ValueError):
        join(a, SymbolicState(a.box, 2))


def test_resize_example():
    states = [st1(0, 0), st1(1, 1), st1(10, 10)]
    assert resize(states, 2) == [st1(0, 1), st1(10, 10)]
    assert resize(states, 3) == states


def test_resize_keeps_commands_apart():
    states = [st1(0, 0, 0), st1(0.1, 0.1, 1), st1(5, 5, 0)]
    assert resize(states, 2) == [st1(0, 5, 0), st1(0.1, 0.1, 1)]
    # nothing left to join: only distinct commands remain
    assert resize([st1(0, 0, 0), st1(1, 1, 1)], 1) == [st1(0, 0, 0), st1(1, 1, 1)]


def resize_reference(states, gamma):
    states = list(states)
    while len(states) > gamma:
        best = None
        for i, j in itertools.combinations(range(len(states)), 2):
            if states[i].command != states[j].command:
                continue
            d = distance(states[i], states[j])
            if best is None or d < best[0]:
                best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        states[i] = join(states[i], states[j])
        del states[j]
    return states


def test_resize_matches_exhaustive_reference():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = int(rng.integers(1, 12))
        states = []
        for _ in range(k):
            lo = rng.integers(-5, 5, size=2).astype(float)
            hi = lo + rng.integers(0, 3, size=2)
            states.append(SymbolicState(Box(lo, hi), int(rng.integers(0, 3))))
        gamma = int(rng.integers(3, 8))
        out = resize(states, gamma)
        assert out == resize_reference(states, gamma)
        assert len(out) <= max(gamma, 3)
        for s in states:
            assert any(o.command == s.command and o.box.contains(s.box) for o in out)


def test_min_sq_norm_lower():
    assert min_sq_norm_lower(Box.from_pairs([(3, 4), (4, 5)]), (0, 1)) == 25.0
    assert min_sq_norm_lower(Box.from_pairs([(-1, 1), (-5, -4)]), (0, 1)) == 16.0
    assert min_sq_norm_lower(Box.from_pairs([(-1, 1), (7, 9)]), (0,)) == 0.0


def test_unsafe_and_target_tests_conservative():
    spec = linear_scenario()
    assert spec.intersects_unsafe(Box.from_pairs([(0.4, 0.6)]))
    assert spec.intersects_unsafe(Box.from_pairs([(-0.5, -0.49)]))  # boundary counts as touching
    assert not spec.intersects_unsafe(Box.from_pairs([(0.5000001, 1)]))
    assert spec.inside_target(Box.from_pairs([(3.0000001, 4)]))
    assert not spec.inside_target(Box.from_pairs([(3.0, 4)]))
    assert not spec.inside_target(Box.from_pairs([(2.9, 4)]))


def test_scenario_validation():
    plant = LinearPlant([[-1.0]], [[1.0]])
    ctrl = ControllerSpec(CommandSet((1.0, 0.0, -1.0)), [constant_net(1, 0, 3)] * 3, pre="identity")
    with pytest.raises(ValueError):
        ScenarioSpec(plant, ctrl, resize_threshold=2, position_dims=(0,), split_dims=(0,))
    with pytest.raises(ValueError):
        ScenarioSpec(plant, ctrl, resize_threshold=3, position_dims=(1,), split_dims=(0,))
    with pytest.raises(ValueError):
        ScenarioSpec(plant, ctrl, resize_threshold=3, collision_radius=5, target_radius=1,
                     position_dims=(0,), split_dims=(0,))


def test_step_reach_constant_controller():
    spec = linear_scenario(command=5.0)
    s0 = st1(1.0, 1.2)
    seg, succ = step_reach(spec, s0)
    assert seg.command == 0 and len(seg.boxes) == spec.integration_steps
    assert len(succ) == 1 and succ[0].command == 0
    ends = linear_solution([[-1.0]], [[1.0]], [5.0], np.array([[1.0], [1.2]]), 1.0)
    assert in_box(ends, succ[0].box.lo, succ[0].box.hi).all()
    assert succ[0].box.width[0] <= 0.2 * math.exp(-1) + 1e-6
    assert seg.boxes[0].contains(s0.box)


def test_step_reach_point_matches_simulation():
    spec = linear_scenario(command=5.0)
    _, succ = step_reach(spec, st1(2.0, 2.0))
    exact = 5.0 - 3.0 * math.exp(-1.0)
    assert succ[0].box.contains([exact])
    assert succ[0].box.width[0] <= 1e-6  # Lagrange remainder of order 4


def test_initial_inside_target():
    res = verify(linear_scenario(), st1(3.5, 4.0))
    assert (res.verdict, res.j_end) == (SAFE_TERMINATED, 0)


def test_initial_meets_unsafe():
    res = verify(linear_scenario(), st1(0.4, 1.0))
    assert (res.verdict, res.j_end) == (UNSAFE_INTERSECTION, 0)
    assert res.reachtube == []


def test_contracting_linear_scenario():
    spec = linear_scenario(command=5.0)
    s0 = st1(1.0, 1.2)
    res = verify(spec, s0)
    # s(t) = 5 - (5 - s0) e^{-t} passes 3 before t = 1, so the first end box lies in T
    assert res.verdict == SAFE_TERMINATED and res.j_end == 1
    pts = box_samples(np.random.default_rng(1), s0.box.lo, s0.box.hi, 1000)
    bad, checked = tube_violations(spec, res, pts, 0, solver="linear")
    assert bad == 0 and checked > 0


def test_horizon_exhausted():
    spec = linear_scenario(command=0.0 + 1.0, target=3.0)
    # the state settles at 1 < 3: never reaches T, never meets E
    res = verify(spec, st1(1.5, 2.0))
    assert (res.verdict, res.j_end) == (SAFE_HORIZON, spec.horizon)
    assert len(res.reachtube) == spec.horizon
    assert len(res.sets) == spec.horizon + 1


def test_zero_horizon():
    res = verify(linear_scenario(horizon=0), st1(1.5, 2.0))
    assert (res.verdict, res.j_end) == (SAFE_HORIZON, 0)


def test_enclosure_failure_verdict():
    plant = LinearPlant([[-1e6]], [[1.0]])
    ctrl = ControllerSpec(CommandSet((1.0, 0.0)), [constant_net(1, 0, 2)] * 2, pre="identity")
    spec = ScenarioSpec(plant, ctrl, horizon=3, integration_steps=1, resize_threshold=2,
                        collision_radius=0.5, target_radius=3.0, position_dims=(0,), split_dims=(0,))
    res = verify(spec, st1(1.0, 1.1))
    assert res.verdict == ENCLOSURE_FAILURE and res.j_end == 0


def switching_scenario():
    """Command +2 when s > 2 and -2 otherwise; E is |s| < 0.5, T is |s| > 4."""
    plant = LinearPlant([[0.0]], [[1.0]])
    cmds = CommandSet((2.0, -2.0))
    # y0 = 2 (constant), y1 = s: argmin picks +2 once s > 2
    net = ReluNetwork([np.array([[0.0], [1.0]])], [np.array([2.0, 0.0])])
    ctrl = ControllerSpec(cmds, [net, net], period=0.5, pre="identity")
    return ScenarioSpec(plant, ctrl, horizon=10, integration_steps=4, resize_threshold=2,
                        collision_radius=0.5, target_radius=4.0, position_dims=(0,), split_dims=(0,))


def test_switching_controller_tube_sound():
    spec = switching_scenario()
    s0 = st1(1.6, 2.6, 1)
    res = verify(spec, s0)
    pts = box_samples(np.random.default_rng(2), s0.box.lo, s0.box.hi, 1000)
    bad, checked = tube_violations(spec, res, pts, 1, solver="linear")
    assert bad == 0 and checked > 0
    # the straddling box needs both commands at the first step
    assert {s.command for s in res.sets[1]} == {0, 1}


def test_command_delay_semantics():
    # starting at s = 3 with command -2: the new command (+2) only acts in the second period
    spec = switching_scenario()
    res = verify(spec, st1(3.0, 3.0, 1))
    assert len(res.sets[1]) == 1
    nxt = res.sets[1][0]
    # the first period still runs -2 (3 -> 2) while the new command is +2
    assert nxt.command == 0 and nxt.box.contains([2.0]) and nxt.box.width[0] <= 1e-6
    assert res.reachtube[0][0].command == 1


def test_split_children_tile_parent():
    spec = linear_scenario()
    s0 = st1(0.4, 1.0)
    res = verify(spec, s0, split_depth_budget=2)
    assert len(res.children) == 2
    lo = min(c.initial.box.lo[0] for c in res.children)
    hi = max(c.initial.box.hi[0] for c in res.children)
    assert (lo, hi) == (0.4, 1.0)
    assert all(c.depth == 1 for c in res.children)
    safe_child = [c for c in res.children if c.initial.box.lo[0] >= 0.7]
    assert safe_child[0].verdict == SAFE_TERMINATED and safe_child[0].children == []
    assert not res.proved_safe
    depths = [r.depth for r in res.walk()]
    assert max(depths) == 2


def test_no_split_when_safe():
    res = verify(linear_scenario(), st1(1.0, 1.2), split_depth_budget=3)
    assert res.children == [] and res.proved_safe


def test_proved_safe_combination():
    s = st1(1, 2)
    leaf_safe = ReachResult(SAFE_TERMINATED, 1, s)
    leaf_bad = ReachResult(SAFE_HORIZON, 20, s)
    parent = ReachResult(UNSAFE_INTERSECTION, 3, s, children=[leaf_safe, leaf_safe])
    assert parent.proved_safe
    parent.children[1] = leaf_bad
    assert not parent.proved_safe
    assert not ReachResult(UNSAFE_INTERSECTION, 0, s).proved_safe
