"""Locally optimal control of nonlinear networks via local minimum-energy steering."""
from .dynamics import (
    NonlinearSystem,
    TargetSet,
    ValidRegion,
    builtin_models,
    ellipsoid_within_region,
    fig1_linear,
    fig2_nonlinear,
    get_model,
    linearize,
    polynomial_system,
)
from .integrate import Trajectory, dopri5, simulate, simulate_plan
from .linsys import (
    ControlLaw,
    EnergyEllipsoid,
    LinearModel,
    energy_ellipsoid,
    gramian,
    mat_exp,
    min_energy_control,
    steer,
    zero_input_trajectory,
)
from .planner import LocsConfig, Plan, fitness, locs_run, locs_step

__version__ = "0.1.0"
