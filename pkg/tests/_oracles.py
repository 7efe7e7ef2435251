"""Reference computations used by the tests.

Nothing here goes through the interval code: the ODE references are closed
forms or plain RK4 and the closed-loop reference runs point trajectories.
"""
from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction

import numpy as np

TINY_NET_TEXT = """\
// two inputs, one hidden layer of two ReLUs, one output
2
2,2,1,
-1e9,-1e9,
1e9,1e9,
0,0,0,
1,1,1,
-1,4,
3,-8,
5,
6,
-0.5,1,
2,
"""

# relative tolerance for membership tests of float reference samples
MEMBER_RTOL = 1e-9


def tiny_reference(x1: float, x2: float) -> float:
    h1 = max(0.0, -1 * x1 + 4 * x2 + 5)
    h2 = max(0.0, 3 * x1 - 8 * x2 + 6)
    return -0.5 * h1 + 1 * h2 + 2


def acas_closed_form(s0, u_deg: float, t):
    """Exact solution of the relative kinematics under a constant turn rate.

    ``s0`` has rows ``(x, y, psi, v_own, v_int)``; returns the states at time
    ``t`` (scalar).
    """
    s0 = np.atleast_2d(np.asarray(s0, dtype=float))
    x, y, psi, vo, vi = s0.T
    w = -u_deg * math.pi / 180.0  # psi' = -u
    out = s0.copy()
    if w == 0.0:
        out[:, 0] = x - vi * np.sin(psi) * t
        out[:, 1] = y + (vi * np.cos(psi) - vo) * t
    else:
        out[:, 0] = x + vi / w * (np.cos(psi + w * t) - np.cos(psi))
        out[:, 1] = y + vi / w * (np.sin(psi + w * t) - np.sin(psi)) - vo * t
        out[:, 2] = psi + w * t
    return out


def rk4(f, s0, t_end: float, n: int):
    s = np.array(s0, dtype=float)
    h = t_end / n
    for _ in range(n):
        k1 = f(s)
        k2 = f(s + 0.5 * h * k1)
        k3 = f(s + 0.5 * h * k2)
        k4 = f(s + h * k3)
        s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s


def linear_solution(A, B, u, s0, t):
    """``exp(At) s0 + int_0^t exp(A(t-r)) B u dr`` via an augmented matrix exponential."""
    from scipy.linalg import expm

    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = B @ u
    E = expm(M * t)
    s0 = np.atleast_2d(s0)
    return s0 @ E[:n, :n].T + E[:n, n]


def in_box(points, lo, hi, rtol=MEMBER_RTOL):
    points = np.atleast_2d(points)
    tol = rtol * (1.0 + np.abs(points))
    return np.all((points >= lo - tol) & (points <= hi + tol), axis=-1)


def box_samples(rng, lo, hi, n, vertices=True):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    pts = lo + (hi - lo) * rng.random((n, lo.size))
    if vertices:
        k = min(n, 2 ** lo.size)
        for i in range(k):
            bits = [(i >> d) & 1 for d in range(lo.size)]
            pts[i] = np.where(bits, hi, lo)
    return pts


def closed_loop_trajectories(spec, s0, cmd0, samples_per_substep=3, solver="acas"):
    """Point simulations of the closed loop.

    Yields ``(j, i, states, commands, active)`` for every step ``j`` and
    sub-interval ``i``: ``states`` has shape ``(samples, n, l)`` and holds
    the samples at evenly spaced instants of the sub-interval (end points
    included). Trajectories stop being active once they are in T at a
    sampling instant. The command is chosen at the start of each period
    from the state at that instant and applied during the next period.
    """
    ctrl = spec.controller
    T, M = spec.period, spec.integration_steps
    r2 = spec.target_radius ** 2
    pos = list(spec.position_dims)
    s = np.array(s0, dtype=float)
    n = s.shape[0]
    cmd = np.full(n, cmd0, dtype=int)
    active = np.ones(n, dtype=bool)
    for j in range(spec.horizon):
        active &= np.sum(s[:, pos] ** 2, axis=1) <= r2
        if not active.any():
            return
        nxt = cmd.copy()
        nxt[active] = ctrl.step_concrete(s[active], cmd[active])
        start = s.copy()
        for i in range(M):
            ts = np.linspace(i * T / M, (i + 1) * T / M, samples_per_substep)
            states = np.stack([_advance(spec, start, cmd, t, solver) for t in ts])
            yield j, i, states, cmd.copy(), active.copy()
        s = _advance(spec, start, cmd, T, solver)
        cmd = nxt


def _advance(spec, s, cmd, t, solver):
    out = np.empty_like(s)
    for c in np.unique(cmd):
        rows = cmd == c
        u = spec.controller.commands[c]
        if solver == "acas":
            out[rows] = acas_closed_form(s[rows], u[0], t)
        else:
            A, B = spec.plant.A, spec.plant.B
            out[rows] = linear_solution(A, B, u, s[rows], t)
    return out


def coverage_reference(depths_of_safe, k0, branching=8):
    total = sum(Fraction(1, branching ** d) for d in depths_of_safe)
    return float(100 * total / k0)


def random_relu_net(rng, n_layers=None, max_width=8, normalise=False):
    from nnreach.network import ReluNetwork

    n_layers = n_layers or int(rng.integers(1, 5))
    sizes = [int(rng.integers(1, max_width + 1)) for _ in range(n_layers + 1)]
    Ws = [rng.normal(size=(sizes[i + 1], sizes[i])) for i in range(n_layers)]
    bs = [rng.normal(size=sizes[i + 1]) for i in range(n_layers)]
    kw = {}
    if normalise:
        m = sizes[0]
        kw = dict(input_min=-5 * np.ones(m), input_max=5 * np.ones(m),
                  input_mean=rng.normal(size=m), input_range=rng.uniform(0.5, 3, size=m),
                  output_mean=float(rng.normal()), output_range=float(rng.uniform(0.5, 3)))
    return ReluNetwork(Ws, bs, **kw)


def random_box(rng, m, scale=2.0):
    c = rng.normal(scale=scale, size=m)
    w = rng.uniform(0, scale, size=m) * (rng.random(m) < 0.9)
    return c - w / 2, c + w / 2


def exact_eval(net, x):
    """Network output in exact rational arithmetic (inputs are the given floats)."""
    z = [Fraction(float(v)) for v in x]
    if net.input_min is not None:
        z = [min(max(v, Fraction(float(a))), Fraction(float(b)))
             for v, a, b in zip(z, net.input_min, net.input_max)]
    if net.input_mean is not None:
        z = [(v - Fraction(float(mu))) / Fraction(float(r)) for v, mu, r in zip(z, net.input_mean, net.input_range)]
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = [sum((Fraction(float(w)) * v for w, v in zip(row, z)), Fraction(float(c))) for row, c in zip(W, b)]
        if i < last:
            z = [max(v, Fraction(0)) for v in z]
    return [v * Fraction(net.output_range) + Fraction(net.output_mean) for v in z]


def tube_violations(spec, result, s0, cmd0, solver="acas", samples_per_substep=3):
    """Count sampled concrete states that escape the recorded reachtube.

    For every fully processed step ``j < j_end`` (all steps for results that
    ran to completion) each active sample at every sampling instant of
    sub-interval ``i`` must lie in ``boxes[i]`` of some segment carrying the
    same command. States at the start of the step must also lie in one of the
    recorded symbolic states with that command. Returns ``(violations, checked)``.
    """
    steps = len(result.reachtube)
    if result.verdict.startswith("indeterminate"):
        steps = min(steps, result.j_end)
    bad = checked = 0
    for j, i, states, cmd, active in closed_loop_trajectories(spec, s0, cmd0, samples_per_substep, solver):
        if j >= steps:
            break
        segs = result.reachtube[j]
        for c in np.unique(cmd[active]):
            rows = active & (cmd == c)
            pts = states[:, rows].reshape(-1, states.shape[-1])
            hit = np.zeros(len(pts), dtype=bool)
            for seg in segs:
                if seg.command == c:
                    hit |= in_box(pts, seg.boxes[i].lo, seg.boxes[i].hi)
            if i == 0:
                start = states[0, rows]
                ok = np.zeros(len(start), dtype=bool)
                for st in result.sets[j]:
                    if st.command == c:
                        ok |= in_box(start, st.box.lo, st.box.hi)
                bad += int(np.sum(~ok))
            bad += int(np.sum(~hit))
            checked += len(pts)
    return bad, checked


def report_reference(recs, bin_arc_ft, radius):
    """Bin coverage and time recomputed from the raw records."""
    dtheta = bin_arc_ft / radius
    n_bins = math.ceil(2 * math.pi / dtheta)
    root_of = {}
    for r in recs:
        if r["parentId"] is None:
            (xl, xh), (yl, yh) = r["box"][:2]
            a = math.atan2(-(xl + xh) / 2, (yl + yh) / 2) % (2 * math.pi)
            root_of[r["cellId"]] = min(int(a / dtheta), n_bins - 1)
    safe, roots, wall = defaultdict(Fraction), defaultdict(int), defaultdict(float)
    for r in recs:
        b = root_of[r["cellId"].split(".")[0]]
        roots[b] += r["parentId"] is None
        wall[b] += r["wallTimeMs"] / 1e3
        if r["verdict"] == "safe-terminated":
            safe[b] += Fraction(1, 8 ** r["depth"])
    return {b: (roots[b], float(100 * safe[b] / roots[b]), wall[b]) for b in roots}
