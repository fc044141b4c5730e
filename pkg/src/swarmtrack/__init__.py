"""Swarm tracking of a time-varying demand distribution by particle MPC over optimal transport."""

from .controller import (
    ControllerParams,
    Frame,
    StepDiagnostics,
    Trajectory,
    control_energy_step,
    intermediate_state,
    mpc_step,
    open_loop_velocity,
    run_simulation,
)
from .demand import ConstantVelocityDemand, FadingDemand, StaticDemand, demand_at, radial_departure
from .domain import (
    UNIT_SQUARE,
    DomainBox,
    GaussianMixture,
    GridDensity,
    ParticleState,
    PointCloud,
    VelocitySample,
    mixture_density_at,
    rasterize,
)
from .kernels import BACKEND
from .ot import (
    AssignmentTargets,
    NonConvergenceWarning,
    SizeLimitError,
    TransportPlan,
    barycentric_map,
    cost_matrix,
    exact_assignment,
    plan_cost,
    sinkhorn,
)
from .sampling import RngState, inverse_transform_sample

__version__ = "0.1.0"
