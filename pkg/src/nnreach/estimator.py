"""scikit-learn style wrappers.

Boxes are passed as float arrays of shape ``(n, d, 2)`` holding
``[lo, hi]`` per dimension.
"""
from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .closedloop import SAFE_TERMINATED, ReachResult, ScenarioSpec, SymbolicState, verify
from .controller import ACASXU_COMMANDS, CommandSet, ControllerSpec
from .interval import Box
from .network import ReluNetwork, eval_interval, eval_symbolic, load_network
from .odesim import PlantModel, make_plant
from .partition import CellRecord, coverage

__all__ = ["check_boxes", "IntervalBoundPropagator", "ReachabilityVerifier"]


def check_boxes(X, n_features: Optional[int] = None, name: str = "X") -> np.ndarray:
    """Validate a box array and return it as float64 of shape ``(n, d, 2)``.

    A single ``(d, 2)`` box is promoted to a batch of one.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2 and X.shape[-1] == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[-1] != 2:
        raise ValueError(f"{name} must have shape (n_boxes, n_features, 2), got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} contains no boxes")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite bounds")
    if np.any(X[..., 0] > X[..., 1]):
        raise ValueError(f"{name} has a lower bound above its upper bound")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def _as_network(net) -> ReluNetwork:
    if isinstance(net, ReluNetwork):
        return net
    if isinstance(net, str):
        return load_network(net)
    raise TypeError(f"expected a ReluNetwork or a file path, got {type(net).__name__}")


def _boxes(X) -> List[Box]:
    return [Box(b[:, 0], b[:, 1]) for b in X]


class IntervalBoundPropagator(TransformerMixin, BaseEstimator):
    """Output bounds of a ReLU network over input boxes.

    ``method`` is ``"symbolic"`` (affine bound forms) or ``"naive"``
    (plain interval propagation).
    """

    def __init__(self, network=None, method: str = "symbolic"):
        self.network = network
        self.method = method

    def fit(self, X=None, y=None):
        if self.method not in ("symbolic", "naive"):
            raise ValueError(f"method must be 'symbolic' or 'naive', got {self.method!r}")
        if self.network is None:
            raise ValueError("no network given")
        self.network_ = _as_network(self.network)
        self.n_features_in_ = self.network_.n_inputs
        if X is not None:
            check_boxes(X, self.n_features_in_)
        return self

    def transform(self, X):
        check_is_fitted(self, "network_")
        X = check_boxes(X, self.n_features_in_)
        fn = eval_symbolic if self.method == "symbolic" else eval_interval
        out = np.empty((X.shape[0], self.network_.n_outputs, 2))
        for i, box in enumerate(_boxes(X)):
            y = fn(self.network_, box)
            out[i, :, 0], out[i, :, 1] = y.lo, y.hi
        return out


class ReachabilityVerifier(BaseEstimator):
    """Closed-loop safety verdicts for initial-state boxes.

    ``fit`` only validates the parameters and assembles ``spec_``; there is
    nothing to learn. ``predict`` returns one verdict string per box, with
    ``"safe-terminated"`` also reported for boxes whose split children were
    all proved safe. ``score`` is the coverage percentage.
    """

    def __init__(self, networks=None, plant="acasxu", commands=ACASXU_COMMANDS, period=1.0,
                 horizon=20, integration_steps=10, resize_threshold=5, taylor_order=4,
                 collision_radius=500.0, target_radius=8000.0, pre="acasxu", transformer="symbolic",
                 max_split_depth=0, initial_command=0, position_dims=(0, 1), split_dims=(0, 1, 2)):
        self.networks = networks
        self.plant = plant
        self.commands = commands
        self.period = period
        self.horizon = horizon
        self.integration_steps = integration_steps
        self.resize_threshold = resize_threshold
        self.taylor_order = taylor_order
        self.collision_radius = collision_radius
        self.target_radius = target_radius
        self.pre = pre
        self.transformer = transformer
        self.max_split_depth = max_split_depth
        self.initial_command = initial_command
        self.position_dims = position_dims
        self.split_dims = split_dims

    def fit(self, X=None, y=None):
        if self.networks is None:
            raise ValueError("no networks given")
        plant = self.plant if isinstance(self.plant, PlantModel) else make_plant(self.plant)
        commands = self.commands if isinstance(self.commands, CommandSet) else CommandSet(tuple(self.commands))
        nets = self.networks
        if isinstance(nets, dict):
            nets = [nets[i] for i in range(len(commands))]
        controller = ControllerSpec(commands, [_as_network(n) for n in nets], period=self.period,
                                    pre=self.pre, transformer=self.transformer)
        if not 1 <= self.taylor_order <= 6:
            raise ValueError("taylor_order must be in 1..6")
        if self.max_split_depth < 0:
            raise ValueError("max_split_depth must be non-negative")
        commands.index(int(self.initial_command))
        self.spec_ = ScenarioSpec(
            plant=plant, controller=controller, horizon=self.horizon,
            integration_steps=self.integration_steps, resize_threshold=self.resize_threshold,
            collision_radius=self.collision_radius, target_radius=self.target_radius,
            taylor_order=self.taylor_order, position_dims=tuple(self.position_dims),
            split_dims=tuple(self.split_dims),
        )
        self.n_features_in_ = plant.dim
        if X is not None:
            check_boxes(X, self.n_features_in_)
        return self

    def verify_boxes(self, X, record_tube: bool = False) -> List[ReachResult]:
        check_is_fitted(self, "spec_")
        X = check_boxes(X, self.n_features_in_)
        return [verify(self.spec_, SymbolicState(b, self.initial_command), self.max_split_depth, record_tube)
                for b in _boxes(X)]

    def predict(self, X) -> np.ndarray:
        res = self.verify_boxes(X)
        return np.array([SAFE_TERMINATED if r.proved_safe else r.verdict for r in res], dtype=object)

    def score(self, X, y=None) -> float:
        res = self.verify_boxes(X)
        records = []
        for i, root in enumerate(res):
            stack = [(root, f"{i}", None)]
            while stack:
                r, cid, parent = stack.pop()
                records.append(CellRecord(cid, r.initial, r.depth, r.verdict, r.wall_time, parent, r.j_end))
                stack.extend((c, f"{cid}.{k}", cid) for k, c in enumerate(r.children))
        return coverage(records, len(res), self.max_split_depth, 2 ** len(self.spec_.split_dims))
