"""Sound reachability analysis of closed-loop systems with ReLU network controllers."""
from .closedloop import (
    ENCLOSURE_FAILURE,
    SAFE_HORIZON,
    SAFE_TERMINATED,
    UNSAFE_INTERSECTION,
    ReachResult,
    ScenarioSpec,
    SymbolicState,
    distance,
    join,
    resize,
    step_reach,
    verify,
)
from .controller import CommandSet, ControllerSpec
from .estimator import IntervalBoundPropagator, ReachabilityVerifier, check_boxes
from .interval import Box, Interval
from .network import ReluNetwork, eval_interval, eval_symbolic, evaluate, load_network
from .odesim import AcasXuKinematics, LinearPlant, simulate, taylor_step
from .partition import PartitionParams, build_initial_partition, coverage, split_cell

__version__ = "0.1.0"
