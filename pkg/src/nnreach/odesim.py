"""Validated simulation of the plant over one controller period.

Each integration step follows the classic two-stage scheme: a coarse
a-priori enclosure valid over the whole step is obtained by Picard
iteration, then an interval Taylor expansion of order ``k`` with a Lagrange
remainder evaluated over that enclosure gives a tight box at the end of the
step.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .interval import PI, Box, Interval

__all__ = [
    "EnclosureError",
    "PlantModel",
    "AcasXuKinematics",
    "LinearPlant",
    "StepResult",
    "SimulationResult",
    "a_priori_enclosure",
    "taylor_step",
    "simulate",
    "make_plant",
]

INFLATION_FACTOR = 1.1
INFLATION_ABS = 1e-9
MAX_INFLATIONS = 20
MAX_ORDER = 6


class EnclosureError(RuntimeError):
    """Picard iteration did not reach containment; retry with a shorter step."""

    def __init__(self, msg, substep=None):
        super().__init__(msg)
        self.substep = substep


IBox = List[Interval]

_ZERO = Interval(0.0)


class PlantModel(ABC):
    """Right-hand side ``s' = f(s, u)`` of an autonomous plant."""

    dim: int
    command_dim: int

    @abstractmethod
    def command(self, u) -> IBox:
        """Enclosure of the physical command applied for command value ``u``."""

    @abstractmethod
    def rhs(self, s: IBox, u: IBox) -> IBox:
        """Interval extension of ``f``."""

    @abstractmethod
    def rhs_point(self, s: np.ndarray, u) -> np.ndarray:
        """Floating-point ``f`` for reference simulations; vectorised over rows of ``s``."""

    @abstractmethod
    def taylor_coefficients(self, s: IBox, u: IBox, order: int) -> List[IBox]:
        """Normalised derivatives ``s^(i) / i!`` for ``i = 0..order`` over the box ``s``."""


_FACT = [float(math.factorial(i)) for i in range(MAX_ORDER + 3)]


@dataclass(frozen=True)
class AcasXuKinematics(PlantModel):
    """Relative 2D kinematics of intruder w.r.t. ownship.

    State ``(x, y, psi, v_own, v_int)`` in ft, rad, ft/s; command is the
    ownship turn rate in deg/s (counter-clockwise positive)::

        x'   = -v_int sin(psi)
        y'   =  v_int cos(psi) - v_own
        psi' = -u
    """

    dim: int = field(default=5, init=False)
    command_dim: int = field(default=1, init=False)

    def command(self, u) -> IBox:
        u = float(np.ravel(u)[0]) if np.ndim(u) else float(u)
        if u == 0.0:
            return [_ZERO]
        return [Interval(u) * PI / 180.0]

    def rhs(self, s, u):
        _, _, psi, vo, vi = s
        return [
            -(vi * psi.sin()),
            vi * psi.cos() - vo,
            -u[0],
            _ZERO,
            _ZERO,
        ]

    def rhs_point(self, s, u):
        s = np.asarray(s, dtype=np.float64)
        u_rad = float(np.ravel(u)[0]) * math.pi / 180.0
        psi, vo, vi = s[..., 2], s[..., 3], s[..., 4]
        out = np.zeros_like(s)
        out[..., 0] = -vi * np.sin(psi)
        out[..., 1] = vi * np.cos(psi) - vo
        out[..., 2] = -u_rad
        return out

    def taylor_coefficients(self, s, u, order):
        x, y, psi, vo, vi = s
        w = -u[0]  # psi'
        sn, cs = psi.sin(), psi.cos()
        # d^k/dt^k sin(psi(t)) = w^k sin(psi + k pi/2), same shift for cos
        sin_shift = (sn, cs, -sn, -cs)
        cos_shift = (cs, -sn, -cs, sn)
        coeffs = [list(s)]
        wpow = Interval(1.0)
        for n in range(1, order + 1):
            k = n - 1
            if k > 0:
                wpow = wpow * w
            dx = -(vi * (wpow * sin_shift[k % 4]))
            dy = vi * (wpow * cos_shift[k % 4])
            if n == 1:
                dy = dy - vo
            f = _FACT[n]
            coeffs.append([
                dx / f,
                dy / f,
                w if n == 1 else _ZERO,
                _ZERO,
                _ZERO,
            ])
        return coeffs


@dataclass(frozen=True, eq=False)
class LinearPlant(PlantModel):
    """Linear test plant ``s' = A s + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.asarray(self.B, dtype=np.float64)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def command_dim(self) -> int:
        return self.B.shape[1]

    def command(self, u) -> IBox:
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if u.shape[0] != self.command_dim:
            raise ValueError(f"command has {u.shape[0]} entries, expected {self.command_dim}")
        return [Interval(v) for v in u.tolist()]

    def _matvec(self, M, v):
        out = []
        for row in M.tolist():
            acc = _ZERO
            for a, vi in zip(row, v):
                if a != 0.0:
                    acc = acc + vi * a
            out.append(acc)
        return out

    def rhs(self, s, u):
        As = self._matvec(self.A, s)
        Bu = self._matvec(self.B, u)
        return [a + b for a, b in zip(As, Bu)]

    def rhs_point(self, s, u):
        s = np.asarray(s, dtype=np.float64)
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        return s @ self.A.T + self.B @ u

    def taylor_coefficients(self, s, u, order):
        # s^(1) = A s + B u, s^(n) = A s^(n-1)
        derivs = [list(s), self.rhs(s, u)]
        for _ in range(2, order + 1):
            derivs.append(self._matvec(self.A, derivs[-1]))
        return [derivs[0]] + [[c / _FACT[n] for c in derivs[n]] for n in range(1, order + 1)]

    def taylor_polynomial(self, s0, u, hp, order):
        """Taylor polynomial ``P(h) s0 + q(h)`` with each ``s0_j`` used once per row.

        Summing the terms of ``taylor_coefficients`` separately repeats
        ``s0`` in every term and loses the contraction of stable systems.
        """
        n = self.dim
        eye = [[Interval(1.0) if i == j else _ZERO for j in range(n)] for i in range(n)]
        A = [[Interval(a) for a in row] for row in self.A.tolist()]
        Bu = self._matvec(self.B, u)
        P = [row[:] for row in eye]
        q = [_ZERO] * n
        An = eye  # A^(k-1)
        for k in range(1, order + 1):
            Bk = self._imatvec(An, Bu)
            An = _imatmul(A, An)
            scale = hp[k] / _FACT[k]
            P = [[p + scale * a for p, a in zip(prow, arow)] for prow, arow in zip(P, An)]
            q = [qi + scale * b for qi, b in zip(q, Bk)]
        return [sum_intervals([pij * sj for pij, sj in zip(row, s0)] + [qi]) for row, qi in zip(P, q)]

    @staticmethod
    def _imatvec(M, v):
        return [sum_intervals([m * x for m, x in zip(row, v)]) for row in M]


def _imatmul(X, Y):
    cols = list(zip(*Y))
    return [[sum_intervals([a * b for a, b in zip(row, col)]) for col in cols] for row in X]


def sum_intervals(ivs):
    acc = _ZERO
    for iv in ivs:
        acc = acc + iv
    return acc


def make_plant(kind: str, **kwargs) -> PlantModel:
    if kind in ("acasxu", "acasxu-kinematics"):
        if kwargs:
            raise ValueError(f"acasxu plant takes no parameters, got {sorted(kwargs)}")
        return AcasXuKinematics()
    if kind in ("linear", "linear-test"):
        return LinearPlant(kwargs["A"], kwargs["B"])
    raise ValueError(f"unknown plant kind {kind!r}")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepResult:
    tube: Box
    end: Box


@dataclass(frozen=True)
class SimulationResult:
    tubes: List[Box]
    end: Box

    def tube_hull(self) -> Box:
        out = self.tubes[0]
        for t in self.tubes[1:]:
            out = out.hull(t)
        return out


def _hull_lists(a: IBox, b: IBox) -> IBox:
    return [p | q for p, q in zip(a, b)]


def _subset(a: IBox, b: IBox) -> bool:
    return all(q.lo <= p.lo and p.hi <= q.hi for p, q in zip(a, b))


def _inflate(a: IBox) -> IBox:
    out = []
    for iv in a:
        r = 0.5 * (iv.hi - iv.lo) * INFLATION_FACTOR + INFLATION_ABS
        m = iv.mid
        out.append(Interval(min(iv.lo, m - r), max(iv.hi, m + r)))
    return out


def a_priori_enclosure(model: PlantModel, s0, u, h: float) -> Box:
    """Box containing every solution from ``s0`` over ``[0, h]``.

    Returned ``S`` satisfies ``s0 + [0, h] * f(S, u) <= S``.
    """
    return Box.from_intervals(_a_priori(model, _as_ibox(s0), _as_cmd(model, u), h))


def _a_priori(model, s0: IBox, u: IBox, h: float) -> IBox:
    if not h > 0.0:
        raise ValueError(f"step length must be positive, got {h!r}")
    h_iv = Interval(0.0, h)
    euler = [a + h_iv * d for a, d in zip(s0, model.rhs(s0, u))]
    S = _hull_lists(s0, euler)
    for _ in range(MAX_INFLATIONS):
        cand = [a + h_iv * d for a, d in zip(s0, model.rhs(S, u))]
        if _subset(cand, S):
            return cand
        S = _inflate(_hull_lists(S, cand))
    raise EnclosureError(f"no a-priori enclosure after {MAX_INFLATIONS} inflations (h={h!r})")


def _as_ibox(s) -> IBox:
    if isinstance(s, Box):
        return s.intervals()
    return list(s)


def _as_cmd(model: PlantModel, u) -> IBox:
    if isinstance(u, list) and u and isinstance(u[0], Interval):
        return u
    return model.command(u)


_POW_CACHE: dict = {}


def _h_powers(h: Interval, n: int) -> List[Interval]:
    key = (h.lo, h.hi, n)
    out = _POW_CACHE.get(key)
    if out is None:
        hp = h
        out = [Interval(1.0)]
        for _ in range(n):
            out.append(out[-1] * hp)
        if len(_POW_CACHE) > 256:
            _POW_CACHE.clear()
        _POW_CACHE[key] = out
    return out


def _taylor(model, s0: IBox, u: IBox, h: Interval, order: int):
    """Taylor step valid for every step length in the interval ``h``."""
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"Taylor order must be in 1..{MAX_ORDER}, got {order}")
    S = _a_priori(model, s0, u, h.hi)
    hp = _h_powers(h, order + 1)
    coeffs = None if hasattr(model, "taylor_polynomial") else model.taylor_coefficients(s0, u, order)
    rem = model.taylor_coefficients(S, u, order + 1)[order + 1]
    poly = getattr(model, "taylor_polynomial", None)
    base = poly(s0, u, hp, order) if poly is not None else None
    end = []
    for i in range(len(s0)):
        if base is not None:
            acc = base[i]
        else:
            acc = coeffs[0][i]
            for n in range(1, order + 1):
                c = coeffs[n][i]
                if c.lo != 0.0 or c.hi != 0.0:
                    acc = acc + hp[n] * c
        r = rem[i]
        if r.lo != 0.0 or r.hi != 0.0:
            acc = acc + hp[order + 1] * r
        end.append(acc)
    tube = [a | b | c for a, b, c in zip(s0, S, end)]
    return tube, end


def taylor_step(model: PlantModel, s0, u, h: float, order: int = 4) -> StepResult:
    """One validated step of length ``h`` under the constant command ``u``."""
    tube, end = _taylor(model, _as_ibox(s0), _as_cmd(model, u), Interval(h), order)
    return StepResult(Box.from_intervals(tube), Box.from_intervals(end))


def simulate(model: PlantModel, s0, u, period: float, steps: int, order: int = 4) -> SimulationResult:
    """Chain ``steps`` Taylor steps of length ``period / steps``.

    ``tubes[i]`` encloses all solutions over the i-th sub-interval and ``end``
    encloses them at ``t = period``.
    """
    if steps < 1:
        raise ValueError(f"need at least one integration step, got {steps}")
    uc = _as_cmd(model, u)
    h = Interval(period) / float(steps)  # exact sub-step length T/M is enclosed
    s = _as_ibox(s0)
    tubes = []
    for i in range(steps):
        try:
            tube, s = _taylor(model, s, uc, h, order)
        except EnclosureError as exc:
            raise EnclosureError(str(exc), substep=i) from exc
        tubes.append(Box.from_intervals(tube))
    return SimulationResult(tubes, Box.from_intervals(s))
