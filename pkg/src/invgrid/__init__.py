"""Small-signal stability of inverter-rich transmission grids.

Builds the modified WSCC 9-bus system (one synchronous machine, one
grid-following and one grid-forming inverter), assembles it as a DAE under
three transmission line models, linearizes about equilibrium and sweeps
grid-forming control gains.
"""
from .core import (
    CASES, OMEGA_B, Bus, BusKind, BranchSpec, ConfigurationError, DeviceSpec, DqPhasor,
    NetworkCase, OperatingCondition, PerUnitBase, TransformerSpec, rotate_frame,
)
from .lines import LineModel, hyperbolic_correction
from .cases import build_wscc9, condition_for, load_case, save_case
from .inverters import GfmGains, GflGains
from .dae import assemble, find_equilibrium, solve_powerflow

__all__ = [
    "CASES", "OMEGA_B", "Bus", "BusKind", "BranchSpec", "ConfigurationError", "DeviceSpec",
    "DqPhasor", "NetworkCase", "OperatingCondition", "PerUnitBase", "TransformerSpec",
    "rotate_frame", "LineModel", "hyperbolic_correction", "build_wscc9", "condition_for",
    "load_case", "save_case", "GfmGains", "GflGains", "assemble", "find_equilibrium",
    "solve_powerflow",
]
