"""Scripted time-varying demand signals.

Each spec evaluates to a :class:`GaussianMixture` at any ``t >= 0`` through
:func:`demand_at`. Covariances never change with time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from .domain import UNIT_SQUARE, DomainBox, FloatArray, GaussianMixture, _frozen


@dataclass(frozen=True, eq=False)
class StaticDemand:
    mixture: GaussianMixture

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StaticDemand) and self.mixture == other.mixture


@dataclass(frozen=True, eq=False)
class FadingDemand:
    """Linear cross-fade from ``left`` (before ``fade_start``) to ``right`` (after ``fade_end``)."""

    left: GaussianMixture
    right: GaussianMixture
    fade_start: float
    fade_end: float

    def __post_init__(self) -> None:
        if not self.fade_start < self.fade_end:
            raise ValueError(f"fade_start must be < fade_end, got {self.fade_start} / {self.fade_end}")

    def progress(self, t: float) -> float:
        s = (t - self.fade_start) / (self.fade_end - self.fade_start)
        return min(1.0, max(0.0, s))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FadingDemand)
            and self.left == other.left
            and self.right == other.right
            and self.fade_start == other.fade_start
            and self.fade_end == other.fade_end
        )


@dataclass(frozen=True, eq=False)
class ConstantVelocityDemand:
    """Components sit at their base means until ``departure_time``, then drift.

    ``velocities[c]`` is the drift of component ``c``; means are clamped to
    ``box`` so the demand never leaves the domain.
    """

    base: GaussianMixture
    departure_time: float
    velocities: FloatArray
    box: DomainBox = UNIT_SQUARE

    def __post_init__(self) -> None:
        vel = _frozen(self.velocities)
        if vel.shape != (len(self.base), 2):
            raise ValueError(f"need one 2-D velocity per component ({len(self.base)}), got shape {vel.shape}")
        if not np.all(np.isfinite(vel)):
            raise ValueError("velocities must be finite")
        if self.departure_time < 0:
            raise ValueError("departure_time must be >= 0")
        object.__setattr__(self, "velocities", vel)

    def means_at(self, t: float) -> FloatArray:
        elapsed = max(0.0, t - self.departure_time)
        return self.box.clip(self.base.means + self.velocities * elapsed)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ConstantVelocityDemand)
            and self.base == other.base
            and self.departure_time == other.departure_time
            and np.array_equal(self.velocities, other.velocities)
            and self.box == other.box
        )


DemandSpec = Union[StaticDemand, FadingDemand, ConstantVelocityDemand]


def demand_at(spec: DemandSpec, t: float) -> GaussianMixture:
    if t < 0:
        raise ValueError(f"demand is defined for t >= 0, got {t}")
    if isinstance(spec, StaticDemand):
        return spec.mixture
    if isinstance(spec, FadingDemand):
        s = spec.progress(t)
        return GaussianMixture.normalized(
            np.concatenate([spec.left.means, spec.right.means]),
            np.concatenate([spec.left.covariances, spec.right.covariances]),
            np.concatenate([(1.0 - s) * spec.left.weights, s * spec.right.weights]),
        )
    if isinstance(spec, ConstantVelocityDemand):
        return GaussianMixture(spec.means_at(t), spec.base.covariances, spec.base.weights)
    raise TypeError(f"unknown demand spec {type(spec).__name__}")


def radial_departure(
    center: ArrayLike,
    covariance: ArrayLike,
    speed: float,
    n: int = 3,
    departure_time: float = 0.5,
    start_angle: float = math.pi / 2,
    box: DomainBox = UNIT_SQUARE,
) -> ConstantVelocityDemand:
    """``n`` equal Gaussians stacked at ``center`` that leave along evenly spaced headings."""
    angles = start_angle + 2.0 * math.pi * np.arange(n) / n
    velocities = speed * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    base = GaussianMixture.normalized(
        np.repeat(np.asarray(center, dtype=np.float64)[None, :], n, axis=0),
        np.repeat(np.asarray(covariance, dtype=np.float64)[None, :, :], n, axis=0),
        np.ones(n),
    )
    return ConstantVelocityDemand(base, departure_time, velocities, box)
