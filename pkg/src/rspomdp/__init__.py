"""Risk-sensitive partially observable MDPs on finite grids."""

from .errors import RSPOMDPError
from .filtering import filter_trace, initial_measure, phi_update, psi_e_update, psi_update
from .house_selling import HouseModel, decide_stop, reservation_levels
from .measure import JointMeasure
from .model import ModelSpec, load_model, validate
from .simulate import enumerate_optimal, enumerate_value, monte_carlo
from .solver_exp import solve_finite_exp
from .solver_finite import AugmentedState, PolicyTree, SolveResult, solve_finite
from .solver_infinite import solve_infinite, solve_infinite_exp
from .solver_power import solve_finite_power
from .utility import Exponential, Linear, Log, PiecewiseLinearConcave, Power

__all__ = [
    "AugmentedState",
    "Exponential",
    "HouseModel",
    "JointMeasure",
    "Linear",
    "Log",
    "ModelSpec",
    "PiecewiseLinearConcave",
    "PolicyTree",
    "Power",
    "RSPOMDPError",
    "SolveResult",
    "decide_stop",
    "enumerate_optimal",
    "enumerate_value",
    "filter_trace",
    "initial_measure",
    "load_model",
    "monte_carlo",
    "phi_update",
    "psi_e_update",
    "psi_update",
    "reservation_levels",
    "solve_finite",
    "solve_finite_exp",
    "solve_finite_power",
    "solve_infinite",
    "solve_infinite_exp",
    "validate",
]
