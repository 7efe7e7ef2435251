"""Batch verification over partition cells and report generation."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .closedloop import ENCLOSURE_FAILURE, SAFE_TERMINATED, ReachResult, verify
from .config import Scenario, load_scenario
from .partition import CellRecord, coverage, initial_cells

__all__ = [
    "RunConfig",
    "parse_cell_range",
    "verify_cell",
    "run_batch",
    "read_records",
    "coverage_from_records",
    "emit_report",
]

RECORDS_FILE = "records.jsonl"
SUMMARY_FILE = "summary.json"
TUBES_FILE = "tubes.jsonl"


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    out: str
    networks: Optional[str] = None
    jobs: int = 1
    steps: Optional[int] = None
    gamma: Optional[int] = None
    order: Optional[int] = None
    max_split_depth: Optional[int] = None
    cells: Optional[Tuple[int, int]] = None
    dump_tubes: bool = False

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.cells is not None and not 0 <= self.cells[0] <= self.cells[1]:
            raise ValueError(f"invalid cell range {self.cells}")

    def load(self) -> Scenario:
        return load_scenario(self.scenario, self.networks, {
            "integration_steps": self.steps,
            "resize_threshold": self.gamma,
            "taylor_order": self.order,
            "max_split_depth": self.max_split_depth,
        })


def parse_cell_range(text: str) -> Tuple[int, int]:
    """``"A..B"`` selects cells ``A <= i < B``; either end may be omitted."""
    if ".." not in text:
        raise ValueError(f"cell range must look like A..B, got {text!r}")
    a, b = text.split("..", 1)
    lo = int(a) if a.strip() else 0
    hi = int(b) if b.strip() else 2 ** 62
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid cell range {text!r}")
    return lo, hi


def _box_json(box) -> List[List[float]]:
    return [[float(l), float(h)] for l, h in zip(box.lo, box.hi)]


def _flatten(res: ReachResult, cell_id: str, parent: Optional[str], records: list, tubes: list, dump: bool):
    records.append({
        "cellId": cell_id,
        "depth": res.depth,
        "verdict": res.verdict,
        "j_end": res.j_end,
        "wallTimeMs": res.wall_time * 1e3,
        "parentId": parent,
        "box": _box_json(res.initial.box),
        "command": res.initial.command,
        "peakK": res.peak_k,
    })
    if dump:
        tubes.append({
            "cellId": cell_id,
            "steps": [
                [{"command": seg.command, "boxes": [_box_json(b) for b in seg.boxes]} for seg in step]
                for step in res.reachtube
            ],
        })
    for k, child in enumerate(res.children):
        _flatten(child, f"{cell_id}.{k}", cell_id, records, tubes, dump)


def verify_cell(scenario: Scenario, cell: CellRecord, dump_tubes: bool = False):
    """Records for a cell and all of its split descendants (plus tube dumps)."""
    records: list = []
    tubes: list = []
    t0 = time.perf_counter()
    try:
        res = verify(scenario.spec, cell.state, scenario.max_split_depth, record_tube=dump_tubes)
    except Exception as exc:  # a failing cell must not abort the batch
        records.append({
            "cellId": cell.cell_id, "depth": cell.depth, "verdict": ENCLOSURE_FAILURE, "j_end": 0,
            "wallTimeMs": (time.perf_counter() - t0) * 1e3, "parentId": cell.parent_id,
            "box": _box_json(cell.state.box), "command": cell.state.command, "peakK": 0,
            "error": f"{type(exc).__name__}: {exc}",
        })
        return records, tubes
    _flatten(res, cell.cell_id, cell.parent_id, records, tubes, dump_tubes)
    return records, tubes


_WORKER: dict = {}


def _init_worker(scenario: Scenario, dump: bool):
    _WORKER["scenario"] = scenario
    _WORKER["dump"] = dump


def _work(cell: CellRecord):
    return verify_cell(_WORKER["scenario"], cell, _WORKER["dump"])


def _records_to_cells(records: Iterable[dict]) -> List[CellRecord]:
    return [CellRecord(r["cellId"], None, r["depth"], r["verdict"], r["wallTimeMs"] / 1e3, r["parentId"], r["j_end"])
            for r in records]


def coverage_from_records(records: Sequence[dict], max_depth: Optional[int] = None) -> Optional[float]:
    roots = [r for r in records if r["parentId"] is None]
    if not roots:
        return None
    if max_depth is None:
        max_depth = max(r["depth"] for r in records)
    return coverage(_records_to_cells(records), len(roots), max_depth)


def _summary(records: List[dict], scenario: Scenario, n_cells: int, elapsed: float) -> dict:
    per_root: Dict[str, float] = defaultdict(float)
    for r in records:
        per_root[r["cellId"].split(".", 1)[0]] += r["wallTimeMs"]
    times = np.array(list(per_root.values()), dtype=float)
    cov = coverage_from_records(records, scenario.max_split_depth) if records else None
    pct = {}
    if times.size:
        for q in (50, 90, 99):
            pct[f"p{q}"] = float(np.percentile(times, q))
        pct["max"] = float(times.max())
    return {
        "cells": n_cells,
        "records": len(records),
        "coverage": cov,
        "coverageDefined": cov is not None,
        "provedSafeRoots": _proved_safe_roots(records),
        "verdicts": dict(sorted(Counter(r["verdict"] for r in records).items())),
        "rootVerdicts": dict(sorted(Counter(r["verdict"] for r in records if r["parentId"] is None).items())),
        "wallTimeMs": {"total": float(times.sum()), **pct},
        "elapsedS": elapsed,
        "maxSplitDepth": scenario.max_split_depth,
        "sensorRadius": scenario.partition.sensor_radius,
        "arcCount": scenario.partition.arc_count,
    }


def _proved_safe_roots(records: List[dict]) -> int:
    kids: Dict[Optional[str], List[str]] = defaultdict(list)
    verdict = {}
    for r in records:
        kids[r["parentId"]].append(r["cellId"])
        verdict[r["cellId"]] = r["verdict"]

    def safe(cid):
        if verdict[cid] == SAFE_TERMINATED:
            return True
        ch = kids.get(cid, [])
        return bool(ch) and all(safe(c) for c in ch)

    return sum(1 for cid in kids.get(None, []) if safe(cid))


def run_batch(cfg: RunConfig) -> dict:
    """Verify every selected cell, write ``records.jsonl`` and ``summary.json``."""
    t0 = time.perf_counter()
    scenario = cfg.load()
    cells = initial_cells(scenario.partition)
    if cfg.cells is not None:
        cells = cells[cfg.cells[0]:cfg.cells[1]]
    os.makedirs(cfg.out, exist_ok=True)
    records: List[dict] = []
    tube_fh = open(os.path.join(cfg.out, TUBES_FILE), "w") if cfg.dump_tubes else None
    try:
        with open(os.path.join(cfg.out, RECORDS_FILE), "w") as fh:
            if cfg.jobs == 1 or len(cells) <= 1:
                results = (verify_cell(scenario, c, cfg.dump_tubes) for c in cells)
                pool = None
            else:
                pool = ProcessPoolExecutor(cfg.jobs, initializer=_init_worker,
                                           initargs=(scenario, cfg.dump_tubes))
                results = pool.map(_work, cells, chunksize=max(1, len(cells) // (8 * cfg.jobs)))
            try:
                for recs, tubes in results:
                    for r in recs:
                        fh.write(json.dumps(r) + "\n")
                    records.extend(recs)
                    if tube_fh:
                        for t in tubes:
                            tube_fh.write(json.dumps(t) + "\n")
            finally:
                if pool is not None:
                    pool.shutdown()
    finally:
        if tube_fh:
            tube_fh.close()
    summary = _summary(records, scenario, len(cells), time.perf_counter() - t0)
    with open(os.path.join(cfg.out, SUMMARY_FILE), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------
# reports


def read_records(path: str) -> List[dict]:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"records file not found: {path}")
    with open(path) as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]


def root_angle(record: dict) -> float:
    """Angular position in [0, 2pi) of a cell's box center on the sensor circle."""
    (xl, xh), (yl, yh) = record["box"][0], record["box"][1]
    a = math.atan2(-0.5 * (xl + xh), 0.5 * (yl + yh))
    return a + 2 * math.pi if a < 0 else a


def emit_report(records_path: str, bin_arc_ft: float, out_dir: str,
                radius: Optional[float] = None) -> Tuple[str, str]:
    """Write ``bins.csv`` (coverage and time per arc bin) and ``cells.csv``.

    Cells are binned by the angular position of their root cell; ``radius``
    defaults to the sensor radius stored in the run summary next to the
    records, else 8000 ft.
    """
    if not bin_arc_ft > 0:
        raise ValueError("bin arc length must be positive")
    records = read_records(records_path)
    if radius is None:
        radius = 8000.0
        spath = os.path.join(os.path.dirname(os.path.abspath(records_path)), SUMMARY_FILE)
        if os.path.isfile(spath):
            with open(spath) as fh:
                radius = float(json.load(fh).get("sensorRadius", radius))
    dtheta = bin_arc_ft / radius
    n_bins = max(1, math.ceil(2 * math.pi / dtheta))
    root_bin = {}
    for r in records:
        if r["parentId"] is None:
            root_bin[r["cellId"]] = min(int(root_angle(r) / dtheta), n_bins - 1)
    groups: Dict[int, List[dict]] = defaultdict(list)
    for r in records:
        groups[root_bin[r["cellId"].split(".", 1)[0]]].append(r)
    max_depth = max((r["depth"] for r in records), default=0)
    os.makedirs(out_dir, exist_ok=True)
    bins_path = os.path.join(out_dir, "bins.csv")
    with open(bins_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "arc_mid_angle_rad", "cells", "coverage_pct", "wall_time_s"])
        for b in sorted(groups):
            recs = groups[b]
            k0 = sum(1 for r in recs if r["parentId"] is None)
            cov = coverage(_records_to_cells(recs), k0, max_depth)
            wall = sum(r["wallTimeMs"] for r in recs) / 1e3
            mid = min((b + 0.5) * dtheta, 2 * math.pi)
            w.writerow([b, repr(mid), k0, repr(cov), repr(wall)])
    map_path = os.path.join(out_dir, "cells.csv")
    with open(map_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cellId", "depth", "x_lo", "x_hi", "y_lo", "y_hi", "psi_lo", "psi_hi", "verdict"])
        for r in records:
            (xl, xh), (yl, yh), (pl, ph) = r["box"][:3]
            w.writerow([r["cellId"], r["depth"], repr(xl), repr(xh), repr(yl), repr(yh), repr(pl), repr(ph),
                        r["verdict"]])
    return bins_path, map_path
