"""Set-based reachability of the closed loop: symbolic states, the per-period
successor construction, the resize heuristic and the verification loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .controller import ControllerSpec, PreprocessingError
from .interval import Box, add_down, mul_down, mul_up
from .odesim import EnclosureError, PlantModel, simulate

__all__ = [
    "SAFE_TERMINATED",
    "SAFE_HORIZON",
    "UNSAFE_INTERSECTION",
    "ENCLOSURE_FAILURE",
    "VERDICTS",
    "SymbolicState",
    "ScenarioSpec",
    "TubeSegment",
    "ReachResult",
    "distance",
    "join",
    "resize",
    "step_reach",
    "verify",
    "min_sq_norm_lower",
]

SAFE_TERMINATED = "safe-terminated"
SAFE_HORIZON = "safe-horizon"
UNSAFE_INTERSECTION = "indeterminate-unsafe-intersection"
ENCLOSURE_FAILURE = "indeterminate-enclosure-failure"
VERDICTS = (SAFE_TERMINATED, SAFE_HORIZON, UNSAFE_INTERSECTION, ENCLOSURE_FAILURE)


@dataclass(frozen=True)
class SymbolicState:
    """A box of plant states paired with the command currently applied."""

    box: Box
    command: int

    def __post_init__(self):
        if not isinstance(self.box, Box):
            object.__setattr__(self, "box", Box.from_pairs(self.box))
        object.__setattr__(self, "command", int(self.command))


def distance(a: SymbolicState, b: SymbolicState) -> float:
    """Squared euclidean distance between box centers."""
    if a.command != b.command:
        raise ValueError(f"cannot compare states with commands {a.command} and {b.command}")
    d = a.box.center - b.box.center
    return float(np.sum(d * d))


def join(a: SymbolicState, b: SymbolicState) -> SymbolicState:
    if a.command != b.command:
        raise ValueError(f"cannot join states with commands {a.command} and {b.command}")
    return SymbolicState(a.box.hull(b.box), a.command)


def resize(states: Sequence[SymbolicState], gamma: int) -> List[SymbolicState]:
    """Join closest same-command pairs until at most ``gamma`` states remain.

    The joined state takes the slot of the first member of the pair. Ties are
    broken by the lexicographically smallest index pair.
    """
    states = list(states)
    if len(states) <= gamma:
        return states
    centers = np.array([s.box.center for s in states])
    cmds = np.array([s.command for s in states])
    while len(states) > gamma:
        diff = centers[:, None, :] - centers[None, :, :]
        d = np.sum(diff * diff, axis=-1)
        ok = (cmds[:, None] == cmds[None, :]) & np.triu(np.ones(d.shape, dtype=bool), 1)
        if not ok.any():
            break
        d = np.where(ok, d, np.inf)
        i, j = np.unravel_index(int(np.argmin(d)), d.shape)  # row-major: smallest (i, j) on ties
        states[i] = join(states[i], states[j])
        del states[j]
        centers[i] = states[i].box.center
        centers = np.delete(centers, j, axis=0)
        cmds = np.delete(cmds, j)
    return states


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSpec:
    """One verification problem: plant, controller, horizon and the sets E, T.

    ``E`` is the open disk of radius ``collision_radius`` and ``T`` the
    exterior of the disk of radius ``target_radius``, both over the state
    components listed in ``position_dims``.
    """

    plant: PlantModel
    controller: ControllerSpec
    horizon: int = 20
    integration_steps: int = 10
    resize_threshold: int = 5
    collision_radius: float = 500.0
    target_radius: float = 8000.0
    taylor_order: int = 4
    position_dims: Tuple[int, ...] = (0, 1)
    split_dims: Tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        P = self.controller.n_commands
        if self.resize_threshold < P:
            raise ValueError(f"resize threshold {self.resize_threshold} must be at least the number of commands {P}")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.integration_steps < 1:
            raise ValueError("need at least one integration step per period")
        if not 0 <= self.collision_radius < self.target_radius:
            raise ValueError("collision radius must be below the target radius")
        dims = tuple(int(d) for d in self.position_dims)
        if not dims or any(not 0 <= d < self.plant.dim for d in dims):
            raise ValueError(f"invalid position dims {self.position_dims}")
        splits = tuple(int(d) for d in self.split_dims)
        if any(not 0 <= d < self.plant.dim for d in splits):
            raise ValueError(f"invalid split dims {self.split_dims}")
        object.__setattr__(self, "position_dims", dims)
        object.__setattr__(self, "split_dims", splits)

    @property
    def period(self) -> float:
        return self.controller.period

    def min_sq_distance(self, box: Box) -> float:
        return min_sq_norm_lower(box, self.position_dims)

    def intersects_unsafe(self, box: Box) -> bool:
        """Conservative test: False only if the box provably misses E."""
        r = self.collision_radius
        return self.min_sq_distance(box) < mul_up(r, r)

    def inside_target(self, box: Box) -> bool:
        """Conservative test: True only if the box provably lies in T."""
        r = self.target_radius
        return self.min_sq_distance(box) > mul_up(r, r)


def min_sq_norm_lower(box: Box, dims: Sequence[int]) -> float:
    """Lower bound on the squared distance from the origin to the box."""
    acc = 0.0
    for i in dims:
        lo, hi = float(box.lo[i]), float(box.hi[i])
        d = lo if lo > 0.0 else (-hi if hi < 0.0 else 0.0)
        acc = add_down(acc, mul_down(d, d))
    return acc


@dataclass(frozen=True)
class TubeSegment:
    """Enclosures over one period for one symbolic state (one box per sub-step)."""

    command: int
    boxes: Tuple[Box, ...]


@dataclass
class ReachResult:
    verdict: str
    j_end: int
    initial: SymbolicState
    reachtube: List[List[TubeSegment]] = field(default_factory=list)
    sets: List[List[SymbolicState]] = field(default_factory=list)
    wall_time: float = 0.0
    peak_k: int = 0
    message: str = ""
    depth: int = 0
    children: List["ReachResult"] = field(default_factory=list)

    @property
    def proved_safe(self) -> bool:
        if self.verdict == SAFE_TERMINATED:
            return True
        return bool(self.children) and all(c.proved_safe for c in self.children)

    def walk(self):
        """This result followed by all split descendants, depth first."""
        yield self
        for c in self.children:
            yield from c.walk()


def step_reach(spec: ScenarioSpec, state: SymbolicState):
    """Tube over one period and the successor states at its end.

    The command for the next period is computed from the box at the start of
    the period and paired with the end box.
    """
    ctrl = spec.controller
    sim = simulate(spec.plant, state.box, ctrl.commands[state.command], spec.period,
                   spec.integration_steps, spec.taylor_order)
    nxt = ctrl.step_abstract(state.box, state.command)
    tube = TubeSegment(state.command, tuple(sim.tubes))
    return tube, [SymbolicState(sim.end, c) for c in nxt]


def _dedup(states: List[SymbolicState]) -> List[SymbolicState]:
    seen, out = set(), []
    for s in states:
        key = (s.command, s.box.key())
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


def _run(spec: ScenarioSpec, initial: SymbolicState, record: bool) -> ReachResult:
    t0 = time.perf_counter()
    res = ReachResult(UNSAFE_INTERSECTION, 0, initial)
    current = [initial]
    res.peak_k = 1

    def done(verdict, j, msg=""):
        res.verdict, res.j_end, res.message = verdict, j, msg
        res.wall_time = time.perf_counter() - t0
        return res

    if spec.intersects_unsafe(initial.box):
        return done(UNSAFE_INTERSECTION, 0, "initial set meets E")
    for j in range(spec.horizon):
        current = [s for s in current if not spec.inside_target(s.box)]
        if not current:
            return done(SAFE_TERMINATED, j)
        current = resize(current, spec.resize_threshold)
        if record:
            res.sets.append(list(current))
        segs, nxt = [], []
        for st in current:
            try:
                seg, succ = step_reach(spec, st)
            except EnclosureError as exc:
                return done(ENCLOSURE_FAILURE, j, str(exc))
            except PreprocessingError as exc:
                return done(UNSAFE_INTERSECTION, j, str(exc))
            segs.append(seg)
            if any(spec.intersects_unsafe(b) for b in seg.boxes):
                if record:
                    res.reachtube.append(segs)
                return done(UNSAFE_INTERSECTION, j, "reachtube meets E")
            nxt.extend(succ)
        if record:
            res.reachtube.append(segs)
        current = _dedup(nxt)
        res.peak_k = max(res.peak_k, len(current))
    current = [s for s in current if not spec.inside_target(s.box)]
    if record:
        res.sets.append(list(current))
    if not current:
        return done(SAFE_TERMINATED, spec.horizon)
    return done(SAFE_HORIZON, spec.horizon)


def split_box(box: Box, dims: Sequence[int]) -> List[Box]:
    """Bisect ``box`` along every dimension in ``dims``: ``2**len(dims)`` children."""
    boxes = [box]
    for d in dims:
        boxes = [half for b in boxes for half in b.bisect(d)]
    return boxes


def verify(spec: ScenarioSpec, initial: SymbolicState, split_depth_budget: int = 0,
           record_tube: bool = True, _depth: int = 0) -> ReachResult:
    """Run the reachability loop from ``initial``.

    Unless the cell is proved safe, and while the split budget lasts, the
    initial box is bisected along ``spec.split_dims`` and every child is
    verified recursively. ``ReachResult.proved_safe`` combines the tree.
    """
    res = _run(spec, initial, record_tube)
    res.depth = _depth
    if res.verdict != SAFE_TERMINATED and split_depth_budget > 0 and spec.split_dims:
        for b in split_box(initial.box, spec.split_dims):
            res.children.append(verify(spec, SymbolicState(b, initial.command),
                                       split_depth_budget - 1, record_tube, _depth + 1))
    return res
