"""ReLU feed-forward networks: file format, concrete evaluation and two
sound abstract transformers (plain interval propagation and symbolic
interval propagation with affine lower/upper forms).

Network text format, one record per line, ``//`` lines are comments::

    2                 number of weighted layers
    2,2,1,            layer sizes k_1..k_L
    -1e9,-1e9,        input minimums (inputs are clamped to [min, max])
    1e9,1e9,          input maximums
    0,0,0,            input means, then the output mean
    1,1,1,            input ranges, then the output range
    -1,4,             weights of layer 2, one row per neuron
    3,-8,
    5,                biases of layer 2, one per line
    6,
    -0.5,1,           ... then layer 3
    2,

Inputs are normalised as ``(clamp(x) - mean) / range`` and outputs are
mapped back as ``y * range + mean``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .interval import Box, Interval, affine_bounds, dot_bounds

__all__ = [
    "NetworkFormatError",
    "DimensionMismatchError",
    "ReluNetwork",
    "SymbolicBounds",
    "load_network",
    "loads_network",
    "dump_network",
    "dumps_network",
    "evaluate",
    "eval_interval",
    "eval_symbolic",
    "propagate_symbolic",
]

_EPS = 2.0 ** -53


class NetworkFormatError(ValueError):
    def __init__(self, msg: str, lineno: Optional[int] = None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


class DimensionMismatchError(NetworkFormatError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Weighted layers ``(W_l, b_l)``; every layer but the last applies ReLU.

    ``L`` counts the input layer, as in ``sizes = (k_1, ..., k_L)``.
    """

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    input_min: Optional[np.ndarray] = None
    input_max: Optional[np.ndarray] = None
    input_mean: Optional[np.ndarray] = None
    input_range: Optional[np.ndarray] = None
    output_mean: float = 0.0
    output_range: float = 1.0
    sizes: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        Ws = tuple(_frozen(np.atleast_2d(W)) for W in self.weights)
        bs = tuple(_frozen(np.ravel(b)) for b in self.biases)
        if not Ws:
            raise DimensionMismatchError("network needs at least one weighted layer")
        if len(Ws) != len(bs):
            raise DimensionMismatchError(f"{len(Ws)} weight matrices but {len(bs)} bias vectors")
        sizes = [Ws[0].shape[1]]
        for i, (W, b) in enumerate(zip(Ws, bs)):
            if W.shape[1] != sizes[-1]:
                raise DimensionMismatchError(
                    f"layer {i + 2}: weight matrix has {W.shape[1]} columns, previous layer has {sizes[-1]} neurons")
            if b.shape[0] != W.shape[0]:
                raise DimensionMismatchError(
                    f"layer {i + 2}: {W.shape[0]} weight rows but {b.shape[0]} biases")
            sizes.append(W.shape[0])
        m = sizes[0]
        for name in ("input_min", "input_max", "input_mean", "input_range"):
            v = getattr(self, name)
            if v is not None:
                v = _frozen(np.ravel(v))
                if v.shape[0] != m:
                    raise DimensionMismatchError(f"{name} has {v.shape[0]} entries, network has {m} inputs")
                object.__setattr__(self, name, v)
        if self.input_range is not None and np.any(self.input_range <= 0):
            raise ValueError("input ranges must be positive")
        if not self.output_range > 0:
            raise ValueError("output range must be positive")
        object.__setattr__(self, "weights", Ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "sizes", tuple(sizes))
        object.__setattr__(self, "output_mean", float(self.output_mean))
        object.__setattr__(self, "output_range", float(self.output_range))

    @property
    def L(self) -> int:
        return len(self.sizes)

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def evaluate(self, x):
        return evaluate(self, x)

    def interval(self, box):
        return eval_interval(self, box)

    def symbolic(self, box):
        return eval_symbolic(self, box)


# ---------------------------------------------------------------------------
# file format


def _values(line: str, lineno: int) -> List[float]:
    toks = [t.strip() for t in line.split(",")]
    while toks and toks[-1] == "":
        toks.pop()
    try:
        return [float(t) for t in toks]
    except ValueError as exc:
        raise NetworkFormatError(f"cannot parse number: {exc}", lineno) from None


def loads_network(text: str) -> ReluNetwork:
    return load_network(io.StringIO(text))


def load_network(source: Union[TextIO, str]) -> ReluNetwork:
    """Parse a network from a text stream or a file path."""
    if isinstance(source, (str, bytes)) and not hasattr(source, "read"):
        with open(source) as fh:
            return load_network(fh)
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(source.read().splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("//")]
    if not lines:
        raise NetworkFormatError("empty network file", 1)
    it = iter(lines)
    last = lines[-1][0]

    def nxt(what, count=None):
        try:
            lineno, ln = next(it)
        except StopIteration:
            raise DimensionMismatchError(f"unexpected end of file while reading {what}", last) from None
        vals = _values(ln, lineno)
        if count is not None and len(vals) != count:
            raise DimensionMismatchError(f"{what}: expected {count} values, got {len(vals)}", lineno)
        return lineno, vals

    lineno, head = nxt("layer count")
    if len(head) != 1 or head[0] != int(head[0]) or head[0] < 1:
        raise NetworkFormatError("first line must be a positive layer count", lineno)
    n_weighted = int(head[0])
    lineno, sizes = nxt("layer sizes", n_weighted + 1)
    if any(s != int(s) or s < 1 for s in sizes):
        raise NetworkFormatError("layer sizes must be positive integers", lineno)
    sizes = [int(s) for s in sizes]
    m = sizes[0]
    _, mins = nxt("input minimums", m)
    _, maxs = nxt("input maximums", m)
    _, means = nxt("means", m + 1)
    _, ranges = nxt("ranges", m + 1)
    Ws, bs = [], []
    for layer in range(1, n_weighted + 1):
        rows = [nxt(f"layer {layer + 1} weights", sizes[layer - 1])[1] for _ in range(sizes[layer])]
        bias = [nxt(f"layer {layer + 1} biases", 1)[1][0] for _ in range(sizes[layer])]
        Ws.append(rows)
        bs.append(bias)
    extra = next(it, None)
    if extra is not None:
        raise DimensionMismatchError("trailing data after the last layer", extra[0])
    if any(lo > hi for lo, hi in zip(mins, maxs)):
        raise NetworkFormatError("input minimum above maximum")
    return ReluNetwork(
        weights=[np.array(W, dtype=np.float64).reshape(sizes[i + 1], sizes[i]) for i, W in enumerate(Ws)],
        biases=bs,
        input_min=mins,
        input_max=maxs,
        input_mean=means[:m],
        input_range=ranges[:m],
        output_mean=means[m],
        output_range=ranges[m],
    )


def _fmt(vals: Iterable[float]) -> str:
    return ",".join(repr(float(v)) for v in vals) + ","


def dump_network(net: ReluNetwork, stream: TextIO, comment: Optional[str] = None) -> None:
    """Write ``net`` using shortest round-trip decimal literals."""
    m = net.n_inputs
    if comment:
        for ln in comment.splitlines():
            stream.write(f"// {ln}\n")
    stream.write(f"{len(net.weights)}\n")
    stream.write(",".join(str(s) for s in net.sizes) + ",\n")
    mins = net.input_min if net.input_min is not None else np.full(m, -np.finfo(float).max)
    maxs = net.input_max if net.input_max is not None else np.full(m, np.finfo(float).max)
    means = net.input_mean if net.input_mean is not None else np.zeros(m)
    ranges = net.input_range if net.input_range is not None else np.ones(m)
    stream.write(_fmt(mins) + "\n")
    stream.write(_fmt(maxs) + "\n")
    stream.write(_fmt(list(means) + [net.output_mean]) + "\n")
    stream.write(_fmt(list(ranges) + [net.output_range]) + "\n")
    for W, b in zip(net.weights, net.biases):
        for row in W:
            stream.write(_fmt(row) + "\n")
        for v in b:
            stream.write(_fmt([v]) + "\n")


def dumps_network(net: ReluNetwork, comment: Optional[str] = None) -> str:
    buf = io.StringIO()
    dump_network(net, buf, comment)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# concrete semantics


def evaluate(net: ReluNetwork, x) -> np.ndarray:
    """Network output for one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_inputs:
        raise ValueError(f"input has {x.shape[-1]} entries, network expects {net.n_inputs}")
    z = x
    if net.input_min is not None:
        z = np.clip(z, net.input_min, net.input_max)
    if net.input_mean is not None:
        z = (z - net.input_mean) / net.input_range
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = z @ W.T + b
        if i < last:
            z = np.maximum(z, 0.0)
    return z * net.output_range + net.output_mean


# ---------------------------------------------------------------------------
# abstract semantics


def _check_box(net: ReluNetwork, box: Box) -> None:
    if box.dim != net.n_inputs:
        raise ValueError(f"input box has dimension {box.dim}, network expects {net.n_inputs}")


def _normalised_inputs(net: ReluNetwork, box: Box):
    lo, hi = box.lo, box.hi
    if net.input_min is not None:
        lo = np.clip(lo, net.input_min, net.input_max)
        hi = np.clip(hi, net.input_min, net.input_max)
    if net.input_mean is None:
        return np.array(lo), np.array(hi)
    ivs = [
        (Interval(l, h) - mu) / r
        for l, h, mu, r in zip(lo.tolist(), hi.tolist(), net.input_mean.tolist(), net.input_range.tolist())
    ]
    return np.array([i.lo for i in ivs]), np.array([i.hi for i in ivs])


def _denormalised(net: ReluNetwork, lo: np.ndarray, hi: np.ndarray) -> Box:
    if net.output_range == 1.0 and net.output_mean == 0.0:
        return Box(lo, hi)
    ivs = [Interval(l, h) * net.output_range + net.output_mean for l, h in zip(lo.tolist(), hi.tolist())]
    return Box.from_intervals(ivs)


def _naive_layers(net: ReluNetwork, lo: np.ndarray, hi: np.ndarray):
    """Pre-activation bounds of every weighted layer under plain interval propagation."""
    out = []
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        lo, hi = affine_bounds(W, b, lo, hi)
        out.append((lo, hi))
        if i < last:
            lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    return out


def eval_interval(net: ReluNetwork, box: Box) -> Box:
    """Layer-by-layer interval propagation."""
    _check_box(net, box)
    lo, hi = _normalised_inputs(net, box)
    lo, hi = _naive_layers(net, lo, hi)[-1]
    return _denormalised(net, lo, hi)


@dataclass(frozen=True)
class SymbolicBounds:
    """Affine bounds of one layer's neurons in the normalised inputs ``z``.

    Row ``i`` of ``low``/``up`` holds coefficients over ``z`` followed by the
    constant term: ``low[i] . (z, 1) <= neuron_i(z) <= up[i] . (z, 1)`` for all
    ``z`` in the input box. ``lo``/``hi`` are concrete bounds of the neurons.
    """

    low: np.ndarray
    up: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def _form_bounds(F: np.ndarray, zlo: np.ndarray, zhi: np.ndarray):
    return dot_bounds(F[:, :-1], F[:, -1], zlo, zhi)


def _compose(W, b, up_src, low_src, zabs):
    """Rigorous upper form of ``W h + b`` given bounding forms of ``h``.

    Float rounding in the matrix products is covered by a slack added to the
    constant term, computed from the standard ``gamma_n`` error bound.
    """
    Wp = np.maximum(W, 0.0)
    Wn = np.minimum(W, 0.0)
    F = Wp @ up_src + Wn @ low_src
    F[:, -1] += b
    n = W.shape[1] + 3
    gamma = 1.01 * n * _EPS / (1.0 - n * _EPS)
    mag = np.abs(Wp) @ np.abs(up_src) + np.abs(Wn) @ np.abs(low_src)
    mag[:, -1] += np.abs(b) + np.abs(F[:, -1])
    slack = gamma * (mag @ zabs)
    slack = np.nextafter(slack * (1.0 + 4 * n * _EPS), np.inf)
    F[:, -1] = np.nextafter(F[:, -1] + slack, np.inf)
    return F


def propagate_symbolic(net: ReluNetwork, box: Box) -> SymbolicBounds:
    """Symbolic interval propagation; returns bounds of the (normalised) outputs.

    Unstable ReLUs get a zero lower form and keep their upper form when that
    form is non-negative over the box, otherwise a constant upper form.
    Concrete bounds are intersected with plain interval propagation at every
    layer, so the result never exceeds the naive one.
    """
    _check_box(net, box)
    zlo, zhi = _normalised_inputs(net, box)
    m = zlo.shape[0]
    naive = _naive_layers(net, zlo, zhi)
    zabs = np.append(np.maximum(np.abs(zlo), np.abs(zhi)), 1.0)
    low = np.hstack([np.eye(m), np.zeros((m, 1))])
    up = low.copy()
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        new_up = _compose(W, b, up, low, zabs)
        new_low = -_compose(-W, -b, up, low, zabs)
        _, u_hi = _form_bounds(new_up, zlo, zhi)
        l_lo, _ = _form_bounds(new_low, zlo, zhi)
        nlo, nhi = naive[i]
        lo = np.maximum(l_lo, nlo)
        hi = np.minimum(u_hi, nhi)
        up, low = new_up, new_low
        if i == last:
            break
        dead = hi <= 0.0
        unstable = (lo < 0.0) & ~dead
        if np.any(dead):
            up[dead] = 0.0
            low[dead] = 0.0
        if np.any(unstable):
            low[unstable] = 0.0
            up_min, _ = _form_bounds(up[unstable], zlo, zhi)
            idx = np.flatnonzero(unstable)
            for j, keep in zip(idx, up_min >= 0.0):
                if not keep:
                    up[j] = 0.0
                    up[j, -1] = hi[j]
    return SymbolicBounds(low=low, up=up, lo=lo, hi=hi)


def eval_symbolic(net: ReluNetwork, box: Box) -> Box:
    sb = propagate_symbolic(net, box)
    return _denormalised(net, sb.lo, sb.hi)
