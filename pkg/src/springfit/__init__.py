"""springfit: system identification for spring-mass deformable objects.

Simulates spring-mass dynamics, fits multi-region connection topologies and
homogeneous physical parameters with CMA-ES, then trains a canonical
tri-plane neural field that predicts per-spring property residuals from
observed point trajectories.
"""

from .backend import backend_name
from .types import (
    ConfigError,
    ControlSchedule,
    GlobalPhysicalParams,
    MassSystem,
    MassSystemState,
    SpringParams,
    SpringTopology,
    Trajectory,
)
from .sim import (
    SimulationDiverged,
    accumulate_forces,
    collision_impulse,
    euler_step,
    rollout,
    skin_points,
    spring_force,
    dashpot_force,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ControlSchedule",
    "GlobalPhysicalParams",
    "MassSystem",
    "MassSystemState",
    "SimulationDiverged",
    "SpringParams",
    "SpringTopology",
    "Trajectory",
    "accumulate_forces",
    "backend_name",
    "collision_impulse",
    "dashpot_force",
    "euler_step",
    "rollout",
    "skin_points",
    "spring_force",
    "__version__",
]
