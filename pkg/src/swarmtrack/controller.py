"""Receding-horizon particle controller.

Every controller step assumes the demand will stay where it is now. Under
that model each particle ``i`` relaxes exponentially, with time constant
``alpha``, toward the point ``M_i`` that an optimal transport plan from the
swarm to the current demand assigns it:

    Q(t + tau) = (1 - exp(-tau / alpha)) * M + exp(-tau / alpha) * Q(t)

The assignment is recomputed from fresh demand samples at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np
from numpy.typing import ArrayLike

from . import kernels
from .demand import demand_at
from .domain import FloatArray, GridDensity, ParticleState, PointCloud, VelocitySample, as_positions, rasterize
from .ot import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    AssignmentTargets,
    barycentric_map,
    cost_matrix,
    plan_cost,
    sinkhorn,
    uniform_marginal,
)
from .sampling import RngState, inverse_transform_sample

if TYPE_CHECKING:
    from .config import SimConfig

RESOURCE_STREAM = 0
DEMAND_STREAM = 1


@dataclass(frozen=True)
class ControllerParams:
    alpha: float
    delta_t: float
    n_demand_samples: int = 500
    epsilon: float = 0.005
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        for name in ("alpha", "delta_t", "epsilon", "tol"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive number, got {value!r}")
        for name in ("n_demand_samples", "max_iter"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")

    @property
    def retention(self) -> float:
        """Fraction of the remaining displacement left after one step."""
        return math.exp(-self.delta_t / self.alpha)


@dataclass(frozen=True)
class StepDiagnostics:
    w2_sq_estimate: float
    control_energy: float
    sinkhorn_iterations: int
    marginal_residual: float
    converged: bool
    targets: AssignmentTargets


def _check_pair(Q: ArrayLike, targets: ArrayLike) -> tuple[FloatArray, FloatArray]:
    q = as_positions(Q)
    m = as_positions(targets)
    if q.shape != m.shape:
        raise ValueError(f"state has shape {q.shape} but targets have {m.shape}")
    return q, m


def _check_times(alpha: float, tau: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not tau >= 0:
        raise ValueError(f"tau must be >= 0, got {tau}")


def intermediate_state(Q: ArrayLike, targets: ArrayLike, alpha: float, tau: float) -> ParticleState:
    """Positions ``tau`` after the last assignment, with targets held fixed."""
    _check_times(alpha, tau)
    q, m = _check_pair(Q, targets)
    keep = math.exp(-tau / alpha)
    out = -math.expm1(-tau / alpha) * m + keep * q
    # a convex combination stays between its endpoints; clamp off rounding
    out = np.clip(out, np.minimum(q, m), np.maximum(q, m))
    return ParticleState(out)


def open_loop_velocity(Q: ArrayLike, targets: ArrayLike, alpha: float, tau: float) -> VelocitySample:
    """Time derivative of :func:`intermediate_state` at ``tau``; ``Q`` is the state at ``tau = 0``."""
    _check_times(alpha, tau)
    q, m = _check_pair(Q, targets)
    return VelocitySample(math.exp(-tau / alpha) / alpha * (m - q))


def control_energy_step(Q: ArrayLike, targets: ArrayLike, alpha: float, delta_t: float) -> float:
    """Exact integral of the mass-weighted squared speed over one step of length ``delta_t``."""
    _check_times(alpha, delta_t)
    q, m = _check_pair(Q, targets)
    sq = float(np.mean(np.sum((m - q) ** 2, axis=1)))
    return sq * (-math.expm1(-2.0 * delta_t / alpha)) / (2.0 * alpha)


def mpc_step(
    Q: ArrayLike, demand_cloud: ArrayLike, params: ControllerParams
) -> tuple[ParticleState, StepDiagnostics]:
    """Assign particles to the demand samples and advance them by one controller step.

    A Sinkhorn solve that fails to converge still yields a step; the
    failure is flagged in the diagnostics (and warned about by ``sinkhorn``).
    """
    q = as_positions(Q)
    y = as_positions(demand_cloud)
    C = cost_matrix(q, y)
    plan = sinkhorn(uniform_marginal(len(q)), uniform_marginal(len(y)), C, params.epsilon, params.tol, params.max_iter)
    targets = barycentric_map(plan, y)
    nxt = intermediate_state(q, targets, params.alpha, params.delta_t)
    diag = StepDiagnostics(
        w2_sq_estimate=plan_cost(plan, C),
        control_energy=control_energy_step(q, targets, params.alpha, params.delta_t),
        sinkhorn_iterations=plan.iterations_used,
        marginal_residual=plan.marginal_residual,
        converged=plan.converged,
        targets=targets,
    )
    return nxt, diag


@dataclass(frozen=True, eq=False)
class Frame:
    """State at ``t = k * delta_t`` together with the assignment computed there."""

    k: int
    t: float
    positions: FloatArray
    targets: FloatArray
    w2_sq_estimate: float
    control_energy: float
    sinkhorn_iterations: int
    marginal_residual: float
    converged: bool


@dataclass(frozen=True, eq=False)
class Trajectory:
    frames: tuple[Frame, ...]
    delta_t: float
    alpha: float
    objective: float
    n_unconverged: int
    backend: str

    @property
    def positions(self) -> FloatArray:
        """``(K + 1, N, 2)`` particle positions."""
        return np.stack([fr.positions for fr in self.frames])

    @property
    def targets(self) -> FloatArray:
        return np.stack([fr.targets for fr in self.frames])

    @property
    def w2_sq(self) -> FloatArray:
        return np.array([fr.w2_sq_estimate for fr in self.frames])

    def mean_speeds(self) -> FloatArray:
        """Mean particle speed over each applied step (``K`` values)."""
        pos = self.positions
        return np.linalg.norm(np.diff(pos, axis=0), axis=2).mean(axis=1) / self.delta_t

    def lags(self) -> FloatArray:
        """Mean particle-to-target distance at each frame."""
        return np.linalg.norm(self.targets - self.positions, axis=2).mean(axis=1)


FrameCallback = Callable[[Frame, GridDensity], None]


def run_simulation(config: SimConfig, on_frame: Optional[FrameCallback] = None) -> Trajectory:
    """Run the closed loop for ``config.n_steps`` steps.

    Frame ``k`` holds the positions at ``t = k * delta_t`` and the
    assignment solved there, so ``K`` steps produce ``K + 1`` frames; the
    assignment of the last frame is computed but not applied. ``on_frame``
    receives each frame with the demand density it was sampled from.

    The reported objective sums ``delta_t * w2_sq + alpha**2 * energy`` over
    the applied steps: left-endpoint quadrature for the tracking term and the
    exact integral for the control effort.
    """
    params = config.controller
    box = config.domain
    K = config.n_steps
    rng = RngState(config.seed)
    demand_rng = rng.spawn(DEMAND_STREAM)

    initial = config.initial_resource if config.initial_resource is not None else demand_at(config.demand, 0.0)
    resource_density = rasterize(initial, box, config.grid_width, config.grid_height)
    Q = ParticleState(inverse_transform_sample(resource_density, config.n_particles, rng.spawn(RESOURCE_STREAM)))

    frames = []
    objective = 0.0
    unconverged = 0
    for k in range(K + 1):
        t = k * params.delta_t
        density = rasterize(demand_at(config.demand, t), box, config.grid_width, config.grid_height)
        demand: PointCloud = inverse_transform_sample(density, params.n_demand_samples, demand_rng.spawn(k))
        nxt, diag = mpc_step(Q, demand, params)
        if not box.contains(nxt):
            raise RuntimeError(f"particles left the domain at step {k}")
        frame = Frame(
            k=k,
            t=t,
            positions=Q.positions,
            targets=diag.targets.targets,
            w2_sq_estimate=diag.w2_sq_estimate,
            control_energy=diag.control_energy,
            sinkhorn_iterations=diag.sinkhorn_iterations,
            marginal_residual=diag.marginal_residual,
            converged=diag.converged,
        )
        frames.append(frame)
        unconverged += not diag.converged
        if on_frame is not None:
            on_frame(frame, density)
        if k < K:
            objective += params.delta_t * diag.w2_sq_estimate + params.alpha**2 * diag.control_energy
            Q = nxt

    return Trajectory(
        frames=tuple(frames),
        delta_t=params.delta_t,
        alpha=params.alpha,
        objective=objective,
        n_unconverged=unconverged,
        backend=kernels.BACKEND,
    )
