"""Outward-rounded interval arithmetic and axis-aligned boxes.

Bounds are IEEE doubles. Every operation returns an enclosure of the exact
real result: a native float operation is performed, its rounding error is
recovered with an error-free transformation (TwoSum, Dekker's TwoProduct,
``math.fsum``), and the bound is moved one ulp outward only when the
operation was inexact and rounded the wrong way. Exact computations (small
integers, dyadic constants) therefore stay exact, and nothing depends on the
process-wide rounding mode.

Library transcendental functions (``sin``, ``cos``, ``atan2``) are not
guaranteed correctly rounded, so their results are widened by two ulps
unless the argument hits a case that is exact by definition (``sin 0``).
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Interval",
    "Box",
    "PI",
    "TWO_PI",
    "HALF_PI",
    "atan2",
    "hull",
    "add_down",
    "add_up",
    "mul_down",
    "mul_up",
    "affine_bounds",
    "dot_bounds",
]

_INF = math.inf
_nextafter = math.nextafter
_isfinite = math.isfinite
_fsum = math.fsum
_SPLITTER = 134217729.0  # 2**27 + 1
# Outside this magnitude range Dekker's error term is not exact.
_TINY = 2.0 ** -960
_HUGE = 2.0 ** 995


# ---------------------------------------------------------------------------
# directed scalar primitives


def _down(x: float) -> float:
    return _nextafter(x, -_INF)


def _up(x: float) -> float:
    return _nextafter(x, _INF)


def _two_sum_err(a: float, b: float, s: float) -> float:
    z = s - a
    return (a - (s - z)) + (b - z)


def _two_prod_err(a: float, b: float, p: float):
    """Exact error of ``p = fl(a*b)`` or None when it cannot be recovered."""
    if p == 0.0:
        # a or b zero (exact) or underflow to zero
        return 0.0 if (a == 0.0 or b == 0.0) else None
    ap = abs(p)
    if ap < _TINY or ap > _HUGE or not _isfinite(p):
        return None
    t = _SPLITTER * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLITTER * b
    bh = t - (t - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add_down(a: float, b: float) -> float:
    s = a + b
    return _down(s) if _two_sum_err(a, b, s) < 0.0 else s


def add_up(a: float, b: float) -> float:
    s = a + b
    return _up(s) if _two_sum_err(a, b, s) > 0.0 else s


def mul_down(a: float, b: float) -> float:
    p = a * b
    e = _two_prod_err(a, b, p)
    if e is None:
        # underflow to zero of a positive product: 0 is still a lower bound
        return 0.0 if p == 0.0 and (a > 0.0) == (b > 0.0) else _down(p)
    if e < 0.0:
        return _down(p)
    return p


def mul_up(a: float, b: float) -> float:
    p = a * b
    e = _two_prod_err(a, b, p)
    if e is None:
        return 0.0 if p == 0.0 and (a > 0.0) != (b > 0.0) else _up(p)
    if e > 0.0:
        return _up(p)
    return p


def _div_bounds(a: float, b: float):
    q = a / b
    e = _two_prod_err(q, b, q * b)
    if e is not None and e == 0.0 and q * b == a:
        return q, q
    # correctly rounded quotient: the exact value lies within one ulp
    return _down(q), _up(q)


def _sqrt_bounds(v: float):
    r = math.sqrt(v)
    p = r * r
    e = _two_prod_err(r, r, p)
    if p == v and e == 0.0:
        return r, r
    return _down(r), _up(r)


def _widen2(lo: float, hi: float):
    return _down(_down(lo)), _up(_up(hi))


# ---------------------------------------------------------------------------
# scalar interval


class Interval:
    """Closed interval ``[lo, hi]`` of reals with float bounds.

    A plain float operand is read as the exact value of that float. Empty
    intersections are reported as ``None`` rather than an inverted interval.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not lo <= hi:
            raise ValueError(f"invalid interval bounds [{lo!r}, {hi!r}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def _make(cls, lo: float, hi: float) -> "Interval":
        iv = object.__new__(cls)
        iv.lo = lo
        iv.hi = hi
        return iv

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Interval):
            blo, bhi = other.lo, other.hi
        else:
            blo = bhi = float(other)
        return Interval._make(add_down(self.lo, blo), add_up(self.hi, bhi))

    __radd__ = __add__

    def __neg__(self):
        return Interval._make(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Interval):
            blo, bhi = other.lo, other.hi
        else:
            blo = bhi = float(other)
        return Interval._make(add_down(self.lo, -bhi), add_up(self.hi, -blo))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Interval):
            blo, bhi = other.lo, other.hi
        else:
            blo = bhi = float(other)
        alo, ahi = self.lo, self.hi
        if blo == bhi:
            if blo >= 0.0:
                return Interval._make(mul_down(alo, blo), mul_up(ahi, blo))
            return Interval._make(mul_down(ahi, blo), mul_up(alo, blo))
        if alo == ahi:
            if alo >= 0.0:
                return Interval._make(mul_down(alo, blo), mul_up(alo, bhi))
            return Interval._make(mul_down(alo, bhi), mul_up(alo, blo))
        if alo >= 0.0 and blo >= 0.0:
            return Interval._make(mul_down(alo, blo), mul_up(ahi, bhi))
        lo = min(mul_down(alo, blo), mul_down(alo, bhi),
                 mul_down(ahi, blo), mul_down(ahi, bhi))
        hi = max(mul_up(alo, blo), mul_up(alo, bhi),
                 mul_up(ahi, blo), mul_up(ahi, bhi))
        return Interval._make(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Interval):
            blo, bhi = other.lo, other.hi
        else:
            blo = bhi = float(other)
        if blo <= 0.0 <= bhi:
            raise ZeroDivisionError("interval divisor contains zero")
        cands = [_div_bounds(a, b) for a in (self.lo, self.hi) for b in (blo, bhi)]
        return Interval._make(min(c[0] for c in cands), max(c[1] for c in cands))

    def __rtruediv__(self, other):
        return Interval(other) / self

    def sqr(self) -> "Interval":
        """Tight square; unlike ``x * x`` it is non-negative on straddling inputs."""
        lo, hi = self.lo, self.hi
        if lo >= 0.0:
            return Interval._make(mul_down(lo, lo), mul_up(hi, hi))
        if hi <= 0.0:
            return Interval._make(mul_down(hi, hi), mul_up(lo, lo))
        m = max(-lo, hi)
        return Interval._make(0.0, mul_up(m, m))

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise ValueError(f"sqrt domain error: lower bound {self.lo!r} < 0")
        return Interval._make(_sqrt_bounds(self.lo)[0], _sqrt_bounds(self.hi)[1])

    def sin(self) -> "Interval":
        return Interval._make(*_sin_bounds(self.lo, self.hi))

    def cos(self) -> "Interval":
        return Interval._make(*_cos_bounds(self.lo, self.hi))

    # -- set operations ---------------------------------------------------

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * self.lo + 0.5 * self.hi

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    __contains__ = contains

    def hull(self, other: "Interval") -> "Interval":
        return Interval._make(min(self.lo, other.lo), max(self.hi, other.hi))

    __or__ = hull

    def intersect(self, other: "Interval"):
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval._make(lo, hi)

    __and__ = intersect

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"


def hull(*ivs: Interval) -> Interval:
    return Interval._make(min(i.lo for i in ivs), max(i.hi for i in ivs))


# pi lies strictly between these two doubles
_PI_LO = math.pi
_PI_HI = _up(math.pi)
PI = Interval(_PI_LO, _PI_HI)
TWO_PI = Interval(2.0 * _PI_LO, 2.0 * _PI_HI)
HALF_PI = Interval(0.5 * _PI_LO, 0.5 * _PI_HI)


def _may_hit(lo: float, hi: float, offset: float) -> bool:
    """Whether some point ``(offset + 2k) * pi`` may lie in ``[lo, hi]``."""
    k0 = math.floor((lo / _PI_LO - offset) / 2.0)
    for k in range(k0 - 1, k0 + 3):
        c = offset + 2.0 * k  # exact: small half-integers
        if c >= 0.0:
            plo, phi = mul_down(c, _PI_LO), mul_up(c, _PI_HI)
        else:
            plo, phi = mul_down(c, _PI_HI), mul_up(c, _PI_LO)
        if plo <= hi and lo <= phi:
            return True
    return False


def _sin_bounds(lo: float, hi: float):
    if lo == hi == 0.0:
        return 0.0, 0.0
    if hi - lo >= 6.28:
        return -1.0, 1.0
    a, b = math.sin(lo), math.sin(hi)
    l, u = _widen2(min(a, b), max(a, b))
    if lo == 0.0:  # sin is exact at 0 and increasing just right of it
        l = 0.0 if b >= 0.0 else l
    if hi == 0.0:
        u = 0.0 if a <= 0.0 else u
    if _may_hit(lo, hi, 0.5):
        u = 1.0
    if _may_hit(lo, hi, 1.5):
        l = -1.0
    return max(l, -1.0), min(u, 1.0)


def _cos_bounds(lo: float, hi: float):
    if lo == hi == 0.0:
        return 1.0, 1.0
    if hi - lo >= 6.28:
        return -1.0, 1.0
    a, b = math.cos(lo), math.cos(hi)
    l, u = _widen2(min(a, b), max(a, b))
    if _may_hit(lo, hi, 0.0):
        u = 1.0
    if _may_hit(lo, hi, 1.0):
        l = -1.0
    return max(l, -1.0), min(u, 1.0)


def _atan2_point(y: float, x: float):
    if y == 0.0 and x > 0.0:
        return 0.0, 0.0
    v = math.atan2(y, x)
    return _widen2(v, v)


def atan2(y: Interval, x: Interval) -> Interval:
    """Enclosure of the polar angle of the points ``(x, y)`` of a box.

    The branch cut is the negative x axis. Boxes touching the origin or
    crossing the cut get ``[-pi, pi]``.
    """
    ylo, yhi = y.lo + 0.0, y.hi + 0.0  # drop negative zeros
    xlo, xhi = x.lo, x.hi
    if xlo <= 0.0 <= xhi and ylo <= 0.0 <= yhi:
        return Interval._make(-_PI_HI, _PI_HI)
    if xlo < 0.0 and ylo < 0.0 <= yhi:
        return Interval._make(-_PI_HI, _PI_HI)
    corners = [_atan2_point(yy, xx) for yy in (ylo, yhi) for xx in (xlo, xhi)]
    lo = min(c[0] for c in corners)
    hi = max(c[1] for c in corners)
    return Interval._make(max(lo, -_PI_HI), min(hi, _PI_HI))


# ---------------------------------------------------------------------------
# boxes


def _as_array(v) -> np.ndarray:
    a = np.array(v, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError("box bounds must be one-dimensional")
    return a


class Box:
    """Axis-aligned box ``[lo_0, hi_0] x ... x [lo_{l-1}, hi_{l-1}]``.

    Bounds are stored as read-only float64 arrays.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = _as_array(lo)
        hi = lo.copy() if hi is None else _as_array(hi)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if not np.all(lo <= hi):
            raise ValueError("box has a lower bound above its upper bound or a NaN")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_intervals(cls, ivs: Iterable[Interval]) -> "Box":
        ivs = list(ivs)
        return cls([i.lo for i in ivs], [i.hi for i in ivs])

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "Box":
        arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def intervals(self) -> list:
        return [Interval._make(l, h) for l, h in zip(self.lo.tolist(), self.hi.tolist())]

    def __len__(self):
        return self.lo.shape[0]

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def __getitem__(self, i) -> Interval:
        return Interval._make(float(self.lo[i]), float(self.hi[i]))

    def _check(self, other: "Box"):
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * self.lo + 0.5 * self.hi

    def hull(self, other: "Box") -> "Box":
        self._check(other)
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def contains(self, other) -> bool:
        """Membership of a point, or inclusion of a box."""
        if isinstance(other, Box):
            self._check(other)
            return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))
        p = np.asarray(other, dtype=np.float64)
        if p.shape != self.lo.shape:
            raise ValueError(f"dimension mismatch: {self.dim} vs {p.shape}")
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))

    def intersects(self, other: "Box") -> bool:
        self._check(other)
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def intersection(self, other: "Box"):
        """Common part of two boxes, ``None`` when they are disjoint."""
        self._check(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def bisect(self, dim: int):
        """Split at the midpoint of one coordinate; the halves share a face."""
        l, h = float(self.lo[dim]), float(self.hi[dim])
        m = 0.5 * l + 0.5 * h
        m = min(max(m, l), h)
        hi1 = self.hi.copy()
        hi1[dim] = m
        lo2 = self.lo.copy()
        lo2[dim] = m
        return Box(self.lo, hi1), Box(lo2, self.hi)

    def replace(self, dim: int, iv: Interval) -> "Box":
        lo, hi = self.lo.copy(), self.hi.copy()
        lo[dim], hi[dim] = iv.lo, iv.hi
        return Box(lo, hi)

    def is_point(self) -> bool:
        return bool(np.all(self.lo == self.hi))

    def key(self) -> tuple:
        return tuple(self.lo.tolist()) + tuple(self.hi.tolist())

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return self.lo.shape == other.lo.shape and bool(
            np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self):
        return hash(self.key())

    def to_pairs(self) -> list:
        return [[l, h] for l, h in zip(self.lo.tolist(), self.hi.tolist())]

    def __repr__(self):
        inner = " x ".join(f"[{l!r}, {h!r}]" for l, h in zip(self.lo.tolist(), self.hi.tolist()))
        return f"Box({inner})"


# ---------------------------------------------------------------------------
# vectorised affine maps for the network transformers


def _prod_with_err(a: np.ndarray, b: np.ndarray):
    """Elementwise products and exact errors; ``ok`` flags where errors are exact."""
    p = a * b
    t = _SPLITTER * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLITTER * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    ap = np.abs(p)
    zero = (a == 0.0) | (b == 0.0)
    ok = zero | ((ap >= _TINY) & (ap <= _HUGE))
    e = np.where(zero, 0.0, e)
    return p, e, ok


def _directed_row_sums(p, e, ok, bias, upward: bool) -> np.ndarray:
    """Rigorous per-row bound of ``sum_j (p_ij + e_ij) + bias_i``."""
    if not np.all(ok):
        p = np.where(ok, p, np.nextafter(p, np.inf if upward else -np.inf))
        e = np.where(ok, e, 0.0)
    rows_p = p.tolist()
    rows_e = e.tolist()
    bias = bias.tolist()
    out = []
    for rp, re_, b in zip(rows_p, rows_e, bias):
        terms = rp + re_
        terms.append(b)
        r = _fsum(terms)
        terms.append(-r)
        d = _fsum(terms)  # sign of (exact sum - r), exactly
        if upward:
            out.append(_up(r) if d > 0.0 else r)
        else:
            out.append(_down(r) if d < 0.0 else r)
    return np.array(out, dtype=np.float64)


def _directed_sum(terms: list, upward: bool) -> float:
    r = _fsum(terms)
    terms.append(-r)
    d = _fsum(terms)
    if upward:
        return _up(r) if d > 0.0 else r
    return _down(r) if d < 0.0 else r


def _small_affine_bounds(W, b, lo, hi):
    # scalar loop: cheaper than the array path for a handful of entries
    ylo, yhi = [], []
    lo, hi = lo.tolist(), hi.tolist()
    for row, c in zip(W.tolist(), b.tolist()):
        tl, th = [c], [c]
        for w, l, h in zip(row, lo, hi):
            for x, terms, nudge in ((l, tl, _down), (h, th, _up)) if w >= 0.0 else ((h, tl, _down), (l, th, _up)):
                p = w * x
                e = _two_prod_err(w, x, p)
                if e is None:
                    terms.append(nudge(p))
                else:
                    terms.append(p)
                    terms.append(e)
        ylo.append(_directed_sum(tl, False))
        yhi.append(_directed_sum(th, True))
    return np.array(ylo, dtype=np.float64), np.array(yhi, dtype=np.float64)


def affine_bounds(W: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Tightest float enclosure of ``{W x + b : lo <= x <= hi}``.

    Each output bound is the correctly directed rounding of the exact
    interval-arithmetic value.
    """
    if W.size <= 32:
        return _small_affine_bounds(W, b, lo, hi)
    pos = W >= 0.0
    x_for_lo = np.where(pos, lo[None, :], hi[None, :])
    x_for_hi = np.where(pos, hi[None, :], lo[None, :])
    p, e, ok = _prod_with_err(W, x_for_lo)
    ylo = _directed_row_sums(p, e, ok, b, upward=False)
    p, e, ok = _prod_with_err(W, x_for_hi)
    yhi = _directed_row_sums(p, e, ok, b, upward=True)
    return ylo, yhi


def dot_bounds(C: np.ndarray, c0: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Rigorous ``(min, max)`` of each affine form ``C[i] . x + c0[i]`` over a box."""
    return affine_bounds(C, c0, lo, hi)
