"""Set-based reachability, heating limits and tube MPC for atmospheric re-entry."""

from .dynamics import ControlInput, EntryModel, EntryState, Environment, VehicleParams
from .kernels import BACKEND
from .nmpc import MpcConfig, MpcSolution, ReferenceTrajectory, mpc_loop, reference_from_tube, solve_ocp
from .reach import ReachConfig, ReachTube, reach
from .scenario import ScenarioConfig, ScenarioError, parse_scenario
from .setalg import ConstrainedZonotope, EmptySetError, Halfspace, IntervalBox, Zonotope
from .thermal import ThermalParams

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConstrainedZonotope",
    "ControlInput",
    "EmptySetError",
    "EntryModel",
    "EntryState",
    "Environment",
    "Halfspace",
    "IntervalBox",
    "MpcConfig",
    "MpcSolution",
    "ReachConfig",
    "ReachTube",
    "ReferenceTrajectory",
    "ScenarioConfig",
    "ScenarioError",
    "ThermalParams",
    "VehicleParams",
    "Zonotope",
    "mpc_loop",
    "parse_scenario",
    "reach",
    "reference_from_tube",
    "solve_ocp",
]
