"""Discrete controller: network selection by previous command, geometric
pre-processing and argmin post-processing, each with an abstract
counterpart on boxes.

Command indices are 0-based throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple, Union

import numpy as np

from .interval import PI, TWO_PI, Box, Interval, atan2
from .network import ReluNetwork, eval_interval, eval_symbolic, evaluate

__all__ = [
    "PreprocessingError",
    "CommandSet",
    "ControllerSpec",
    "wrap_angle",
    "wrap_angle_interval",
    "pre_concrete",
    "pre_abstract",
    "post_concrete",
    "post_abstract",
    "ACASXU_COMMANDS",
    "ACASXU_COMMAND_NAMES",
]

ACASXU_COMMANDS = (0.0, 1.5, -1.5, 3.0, -3.0)
ACASXU_COMMAND_NAMES = ("COC", "WL", "WR", "SL", "SR")
PRE_KINDS = ("acasxu", "identity")

_FULL_TURN = Interval(-PI.hi, PI.hi)


class PreprocessingError(ValueError):
    """Raised when the bearing is undefined (intruder at the origin)."""


@dataclass(frozen=True)
class CommandSet:
    """Ordered, duplicate-free list of command vectors."""

    values: Tuple[Tuple[float, ...], ...]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        vals = tuple(tuple(float(c) for c in np.atleast_1d(v)) for v in self.values)
        if not vals:
            raise ValueError("command set must be nonempty")
        if len({len(v) for v in vals}) != 1:
            raise ValueError("all commands must have the same dimension")
        if len(set(vals)) != len(vals):
            raise ValueError("duplicate commands in command set")
        names = tuple(self.names)
        if names and len(names) != len(vals):
            raise ValueError(f"{len(names)} names for {len(vals)} commands")
        if len(set(names)) != len(names):
            raise ValueError("duplicate command names")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)

    @classmethod
    def acasxu(cls) -> "CommandSet":
        return cls(ACASXU_COMMANDS, ACASXU_COMMAND_NAMES)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i: int) -> Tuple[float, ...]:
        return self.values[i]

    @property
    def dim(self) -> int:
        return len(self.values[0])

    def index(self, key: Union[int, str, float]) -> int:
        """Resolve a name, an index or a scalar command value to an index."""
        if isinstance(key, str):
            if key in self.names:
                return self.names.index(key)
            try:
                key = int(key)
            except ValueError:
                raise KeyError(f"unknown command {key!r}") from None
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            if not 0 <= key < len(self):
                raise KeyError(f"command index {key} out of range 0..{len(self) - 1}")
            return int(key)
        raise KeyError(f"cannot resolve command {key!r}")

    def label(self, i: int) -> str:
        return self.names[i] if self.names else str(i)


# ---------------------------------------------------------------------------
# pre-processing


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    out = np.where((a > -math.pi) & (a <= math.pi), a, np.mod(a + math.pi, 2 * math.pi) - math.pi)
    out = np.where(out == -math.pi, math.pi, out)
    return out if out.ndim else float(out)


def wrap_angle_interval(a: Interval) -> Interval:
    """Enclosure of the wrapped image of ``a``; straddling the cut gives [-pi, pi]."""
    if a.lo >= -math.pi and a.hi <= math.pi:
        return a
    if a.hi - a.lo >= 2 * math.pi:
        return _FULL_TURN
    k = round(a.mid / (2 * math.pi))
    shifted = a - TWO_PI * float(k)
    if shifted.lo >= -math.pi and shifted.hi <= math.pi:
        return shifted
    return _FULL_TURN


def pre_concrete(s, kind: str = "acasxu") -> np.ndarray:
    """Plant state(s) to network input(s); rows of a 2-D array are independent states."""
    s = np.asarray(s, dtype=np.float64)
    if kind == "identity":
        return s.copy()
    if kind != "acasxu":
        raise ValueError(f"unknown pre-processing kind {kind!r}")
    x, y = s[..., 0], s[..., 1]
    rho = np.hypot(x, y)
    if np.any(rho == 0.0):
        raise PreprocessingError("bearing undefined at rho = 0")
    out = np.array(s, copy=True)
    out[..., 0] = rho
    out[..., 1] = np.arctan2(-x + 0.0, y)
    out[..., 2] = wrap_angle(s[..., 2])
    return out


def pre_abstract(box: Box, kind: str = "acasxu") -> Box:
    if kind == "identity":
        return box
    if kind != "acasxu":
        raise ValueError(f"unknown pre-processing kind {kind!r}")
    ivs = box.intervals()
    x, y = ivs[0], ivs[1]
    if x.lo <= 0.0 <= x.hi and y.lo <= 0.0 <= y.hi:
        raise PreprocessingError("box contains the origin")
    rho = (x.sqr() + y.sqr()).sqrt()
    theta = atan2(-x, y)
    return Box.from_intervals([rho, theta, wrap_angle_interval(ivs[2])] + ivs[3:])


# ---------------------------------------------------------------------------
# post-processing


def post_concrete(y) -> np.ndarray:
    """Index of the smallest score; ties go to the lowest index."""
    return np.argmin(np.asarray(y), axis=-1)


def post_abstract(y: Box) -> Tuple[int, ...]:
    """Every index that is the argmin for some point of ``y``."""
    best = float(np.min(y.hi))
    return tuple(int(i) for i in np.flatnonzero(y.lo <= best))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControllerSpec:
    """Command set, lambda table (one network per previous command) and period."""

    commands: CommandSet
    networks: Tuple[ReluNetwork, ...]
    period: float = 1.0
    pre: str = "acasxu"
    transformer: str = "symbolic"

    def __post_init__(self):
        nets = self.networks
        if isinstance(nets, Mapping):
            try:
                nets = [nets[i] for i in range(len(self.commands))]
            except KeyError as exc:
                raise ValueError(f"lambda table has no network for command {exc.args[0]}") from None
        nets = tuple(nets)
        P = len(self.commands)
        if len(nets) != P:
            raise ValueError(f"lambda table has {len(nets)} networks for {P} commands")
        m = nets[0].n_inputs
        for i, net in enumerate(nets):
            if net.n_inputs != m:
                raise ValueError(f"network for command {i} has {net.n_inputs} inputs, expected {m}")
            if net.n_outputs != P:
                raise ValueError(f"network for command {i} has {net.n_outputs} outputs, expected {P}")
        if self.pre not in PRE_KINDS:
            raise ValueError(f"unknown pre-processing kind {self.pre!r}")
        if self.transformer not in ("symbolic", "naive"):
            raise ValueError(f"unknown transformer {self.transformer!r}")
        if not self.period > 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "networks", nets)
        object.__setattr__(self, "period", float(self.period))

    @property
    def n_commands(self) -> int:
        return len(self.commands)

    def network(self, command: int) -> ReluNetwork:
        return self.networks[command]

    def scores_abstract(self, box: Box, command: int) -> Box:
        x = pre_abstract(box, self.pre)
        net = self.networks[command]
        return eval_symbolic(net, x) if self.transformer == "symbolic" else eval_interval(net, x)

    def step_abstract(self, box: Box, command: int) -> Tuple[int, ...]:
        """Sound set of next commands for all states in ``box``."""
        return post_abstract(self.scores_abstract(box, command))

    def step_concrete(self, s, command) -> np.ndarray:
        """Next command for one state or a batch; ``command`` may be per-row."""
        s = np.asarray(s, dtype=np.float64)
        x = pre_concrete(s, self.pre)
        if s.ndim == 1:
            return int(post_concrete(evaluate(self.networks[int(command)], x)))
        cmd = np.broadcast_to(np.asarray(command, dtype=int), s.shape[:1])
        out = np.empty(s.shape[0], dtype=int)
        for c in np.unique(cmd):
            rows = cmd == c
            out[rows] = post_concrete(evaluate(self.networks[c], x[rows]))
        return out
