"""Lagrangian finite-element solver for a viscous fluid coupled to elastic solids.

The nonlinear problem is solved as a fixed point of a map that freezes the
flow-map coefficients from a given velocity history and solves a penalized
linear fluid-solid system.
"""

from .config import ConfigError, SimulationConfig, load_reference, parse_config, parse_config_text
from .fem import FluidP1Space, P2Space
from .fixed_point import ProblemContext, iterate_to_fixed_point, theta_map
from .geometry import FLUID, SOLID, GeometryError, Mesh, disk_mesh
from .initial_data import build_initial_data, check_compatibility
from .kinematics import InvertibilityError, coefficient_matrix, flow_map_state
from .material import MaterialParams, elastic_stress, fluid_stress
from .pipeline import run_pipeline, setup_problem
from .stepper import PenaltySettings, solve_linear_problem

__all__ = [
    "ConfigError",
    "FLUID",
    "FluidP1Space",
    "GeometryError",
    "InvertibilityError",
    "MaterialParams",
    "Mesh",
    "P2Space",
    "PenaltySettings",
    "ProblemContext",
    "SOLID",
    "SimulationConfig",
    "build_initial_data",
    "check_compatibility",
    "coefficient_matrix",
    "disk_mesh",
    "elastic_stress",
    "flow_map_state",
    "fluid_stress",
    "iterate_to_fixed_point",
    "load_reference",
    "parse_config",
    "parse_config_text",
    "run_pipeline",
    "setup_problem",
    "solve_linear_problem",
    "theta_map",
]

__version__ = "0.1.0"
