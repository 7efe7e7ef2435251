"""Initial-set partitioning over the ribbon of intruder entry states, split
bookkeeping and the coverage metric.

An intruder enters at angular position ``alpha`` on the circle of radius
``r`` around the ownship, i.e. at ``(-r sin(alpha), r cos(alpha))``, with a
heading ``psi`` in the inward cone ``[alpha - 3pi/2, alpha - pi/2]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence

from .closedloop import SAFE_TERMINATED, SymbolicState, split_box
from .interval import PI, TWO_PI, Box, Interval

__all__ = [
    "PartitionParams",
    "CellRecord",
    "full_scale_params",
    "arc_interval",
    "build_initial_partition",
    "initial_cells",
    "split_cell",
    "coverage",
]

_THREE_HALF_PI = PI * 1.5


@dataclass(frozen=True)
class PartitionParams:
    sensor_radius: float = 8000.0
    arc_count: int = 36
    heading_bin_count: int = 8
    heading_cone_span: float = math.pi
    heading_bin_width: Optional[float] = None
    v_own: float = 700.0
    v_int: float = 600.0
    initial_command: int = 0
    collision_radius: float = 500.0

    def __post_init__(self):
        if self.arc_count < 1 or self.heading_bin_count < 1:
            raise ValueError("arc and heading bin counts must be at least 1")
        if not self.sensor_radius > self.collision_radius:
            raise ValueError("sensor radius must exceed the collision radius")
        if not 0 < self.heading_cone_span <= 2 * math.pi:
            raise ValueError("heading cone span must be in (0, 2pi]")
        if self.heading_bin_width is not None:
            if not self.heading_bin_width > 0:
                raise ValueError("heading bin width must be positive")
            if self.heading_bin_width * self.heading_bin_count < self.heading_cone_span:
                raise ValueError("heading bins do not cover the cone")

    @property
    def cell_count(self) -> int:
        return self.arc_count * self.heading_bin_count


def full_scale_params() -> PartitionParams:
    """80 ft arcs at r = 8000 ft and 0.01 rad heading bins."""
    return PartitionParams(arc_count=629, heading_bin_count=316, heading_bin_width=0.01)


@dataclass(frozen=True)
class CellRecord:
    cell_id: str
    state: SymbolicState
    depth: int = 0
    verdict: Optional[str] = None
    wall_time: float = 0.0
    parent_id: Optional[str] = None
    j_end: Optional[int] = None

    @property
    def safe(self) -> bool:
        return self.verdict == SAFE_TERMINATED


def arc_interval(a: int, arc_count: int) -> Interval:
    """Enclosure of the angular range of arc ``a``."""
    n = float(arc_count)
    return Interval((TWO_PI * float(a) / n).lo, (TWO_PI * float(a + 1) / n).hi)


def _bin_width(params: PartitionParams) -> Interval:
    if params.heading_bin_width is not None:
        return Interval(params.heading_bin_width)
    span = PI if params.heading_cone_span == math.pi else Interval(params.heading_cone_span)
    return span / float(params.heading_bin_count)


def _bin_interval(alpha: Interval, b: int, w: Interval) -> Interval:
    base = alpha - _THREE_HALF_PI
    lo = (base.lo + w * float(b)).lo
    hi = (base.hi + w * float(b + 1)).hi
    psi = Interval(lo, hi)
    k = math.ceil((psi.mid - math.pi) / (2 * math.pi))
    return psi - TWO_PI * float(k) if k else psi


def _cell_box(params: PartitionParams, a: int, b: int) -> Box:
    r = params.sensor_radius
    alpha = arc_interval(a, params.arc_count)
    x = -(alpha.sin() * r)
    y = alpha.cos() * r
    psi = _bin_interval(alpha, b, _bin_width(params))
    return Box.from_intervals([x, y, psi, Interval(params.v_own), Interval(params.v_int)])


def initial_cells(params: PartitionParams) -> List[CellRecord]:
    """Cells in arc-major order with ids ``a{arc}-h{bin}``."""
    cmd = params.initial_command
    return [
        CellRecord(f"a{a}-h{b}", SymbolicState(_cell_box(params, a, b), cmd))
        for a in range(params.arc_count)
        for b in range(params.heading_bin_count)
    ]


def build_initial_partition(params: PartitionParams) -> List[SymbolicState]:
    return [c.state for c in initial_cells(params)]


def split_cell(cell: CellRecord, max_depth: int, dims: Sequence[int] = (0, 1, 2)) -> List[CellRecord]:
    """Children of ``cell`` obtained by bisecting along ``dims``."""
    if cell.depth >= max_depth:
        raise ValueError(f"cell {cell.cell_id} is at depth {cell.depth}, maximum is {max_depth}")
    boxes = split_box(cell.state.box, dims)
    return [
        CellRecord(f"{cell.cell_id}.{k}", SymbolicState(b, cell.state.command), cell.depth + 1,
                   parent_id=cell.cell_id)
        for k, b in enumerate(boxes)
    ]


def coverage(records: Iterable[CellRecord], k0: int, max_depth: int, branching: int = 8) -> float:
    """Percentage of the initial set proved safe, weighting depth-d cells by ``branching**-d``."""
    if k0 < 1:
        raise ValueError("need at least one initial cell")
    records = list(records)
    by_id = {}
    for r in records:
        if r.cell_id in by_id:
            raise ValueError(f"duplicate record for cell {r.cell_id}")
        if not 0 <= r.depth <= max_depth:
            raise ValueError(f"cell {r.cell_id} has depth {r.depth} outside 0..{max_depth}")
        by_id[r.cell_id] = r
    for r in records:
        if r.parent_id is not None:
            parent = by_id.get(r.parent_id)
            if parent is not None and parent.safe:
                raise ValueError(f"cell {r.cell_id} has a parent {r.parent_id} already proved safe")
    total = sum((Fraction(1, branching ** r.depth) for r in records if r.safe), Fraction(0))
    if total > k0:
        raise ValueError("more safe weight than initial cells")
    return float(100 * total / k0)
