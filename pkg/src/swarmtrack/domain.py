"""Geometric and measure types shared across the package.

Everything here is two-dimensional: positions are ``(n, 2)`` float arrays and
the domain is an axis-aligned box, the unit square by default. Array fields
are copied and frozen (``writeable=False``) on construction so instances can
be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]


def _frozen(a: ArrayLike, dtype=np.float64) -> FloatArray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def as_positions(x: ArrayLike) -> FloatArray:
    """Coerce ``x`` (array-like or a wrapper type) to an ``(n, 2)`` float array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of positions, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DomainBox:
    lower: tuple[float, float] = (0.0, 0.0)
    upper: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != 2 or len(hi) != 2:
            raise ValueError("DomainBox bounds must be 2-vectors")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("DomainBox bounds must be finite")
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ValueError(f"DomainBox requires lower < upper, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def size(self) -> FloatArray:
        return np.subtract(self.upper, self.lower)

    def contains(self, points: ArrayLike) -> bool:
        """True if every point lies in the closed box."""
        p = as_positions(points)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return bool(np.all((p >= lo) & (p <= hi)))

    def clip(self, points: ArrayLike) -> FloatArray:
        return np.clip(as_positions(points), self.lower, self.upper)


UNIT_SQUARE = DomainBox()


@dataclass(frozen=True)
class GaussianComponent:
    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]
    weight: float


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Weighted sum of 2-D Gaussians.

    ``means`` is ``(k, 2)``, ``covariances`` ``(k, 2, 2)`` and ``weights``
    ``(k,)``. Weights must already sum to one; use :meth:`normalized` to
    build a mixture from unnormalized weights.
    """

    means: FloatArray
    covariances: FloatArray
    weights: FloatArray
    _precisions: FloatArray = field(init=False, repr=False)
    _norms: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        means = _frozen(self.means)
        covs = _frozen(self.covariances)
        weights = _frozen(self.weights)
        if means.ndim != 2 or means.shape[1] != 2 or means.shape[0] < 1:
            raise ValueError(f"means must be (k, 2) with k >= 1, got {means.shape}")
        k = means.shape[0]
        if covs.shape != (k, 2, 2):
            raise ValueError(f"covariances must be ({k}, 2, 2), got {covs.shape}")
        if weights.shape != (k,):
            raise ValueError(f"weights must be ({k},), got {weights.shape}")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValueError("mixture parameters must be finite")
        if np.any(weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {weights.sum()!r}")
        if not np.allclose(covs, np.swapaxes(covs, 1, 2), rtol=0, atol=1e-15):
            raise ValueError("covariances must be symmetric")
        if np.any(np.linalg.eigvalsh(covs) <= 0):
            raise ValueError("covariances must be positive definite")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_precisions", _frozen(np.linalg.inv(covs)))
        dets = np.linalg.det(covs)
        object.__setattr__(self, "_norms", _frozen(1.0 / (2.0 * np.pi * np.sqrt(dets))))

    @classmethod
    def normalized(cls, means: ArrayLike, covariances: ArrayLike, weights: ArrayLike) -> GaussianMixture:
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not total > 0:
            raise ValueError("mixture weights must have a positive sum")
        # leave already-normalized weights bit-for-bit alone
        if abs(total - 1.0) > 1e-12:
            w = w / total
        return cls(means, covariances, w)

    @classmethod
    def from_components(cls, components: Iterable[GaussianComponent]) -> GaussianMixture:
        comps = list(components)
        return cls.normalized(
            [c.mean for c in comps], [c.cov for c in comps], [c.weight for c in comps]
        )

    @classmethod
    def isotropic(
        cls, means: ArrayLike, std: float | Sequence[float], weights: ArrayLike | None = None
    ) -> GaussianMixture:
        m = np.atleast_2d(np.asarray(means, dtype=np.float64))
        s = np.broadcast_to(np.asarray(std, dtype=np.float64), (m.shape[0],))
        covs = s[:, None, None] ** 2 * np.eye(2)
        w = np.ones(m.shape[0]) if weights is None else weights
        return cls.normalized(m, covs, w)

    @property
    def components(self) -> list[GaussianComponent]:
        return [
            GaussianComponent(
                mean=(float(m[0]), float(m[1])),
                cov=((float(c[0, 0]), float(c[0, 1])), (float(c[1, 0]), float(c[1, 1]))),
                weight=float(w),
            )
            for m, c, w in zip(self.means, self.covariances, self.weights)
        ]

    def __len__(self) -> int:
        return self.means.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            np.array_equal(self.means, other.means)
            and np.array_equal(self.covariances, other.covariances)
            and np.array_equal(self.weights, other.weights)
        )

    def density(self, points: ArrayLike) -> FloatArray:
        """Evaluate the mixture density at ``points`` of shape ``(..., 2)``."""
        p = np.asarray(points, dtype=np.float64)
        flat = p.reshape(-1, 2)
        out = np.zeros(flat.shape[0])
        for mean, prec, norm, w in zip(self.means, self._precisions, self._norms, self.weights):
            if w == 0.0:
                continue
            d = flat - mean
            q = prec[0, 0] * d[:, 0] ** 2 + 2.0 * prec[0, 1] * d[:, 0] * d[:, 1] + prec[1, 1] * d[:, 1] ** 2
            out += w * norm * np.exp(-0.5 * q)
        return out.reshape(p.shape[:-1])


def mixture_density_at(mixture: GaussianMixture, x: ArrayLike) -> float:
    """Density of ``mixture`` at a single point (not truncated to any domain)."""
    return float(mixture.density(np.asarray(x, dtype=np.float64).reshape(1, 2))[0])


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant probability mass on a ``height x width`` cell grid.

    ``mass[j, i]`` is the mass of the cell in column ``i`` (x direction) and
    row ``j`` (y direction, counted upward from ``box.lower[1]``). Flattening
    ``mass`` in C order gives the row-major cell order used for sampling.
    """

    box: DomainBox
    mass: FloatArray

    def __post_init__(self) -> None:
        mass = _frozen(self.mass)
        if mass.ndim != 2 or min(mass.shape) < 1:
            raise ValueError(f"mass must be a nonempty 2-D array, got shape {mass.shape}")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("cell masses must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > 1e-10:
            raise ValueError(f"total mass must be 1, got {mass.sum()!r}")
        object.__setattr__(self, "mass", mass)

    @property
    def width(self) -> int:
        return self.mass.shape[1]

    @property
    def height(self) -> int:
        return self.mass.shape[0]

    @property
    def cell_size(self) -> FloatArray:
        return self.box.size / np.array([self.width, self.height])

    def cell_centers(self) -> tuple[FloatArray, FloatArray]:
        """Return ``(xs, ys)`` center coordinates along each axis."""
        cw, ch = self.cell_size
        xs = self.box.lower[0] + (np.arange(self.width) + 0.5) * cw
        ys = self.box.lower[1] + (np.arange(self.height) + 0.5) * ch
        return xs, ys


def rasterize(mixture: GaussianMixture, box: DomainBox, width: int, height: int) -> GridDensity:
    """Midpoint-rule discretization of ``mixture`` on a grid, renormalized to unit mass.

    Mass outside ``box`` is discarded by the renormalization.
    """
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {width}x{height}")
    cw = (box.upper[0] - box.lower[0]) / width
    ch = (box.upper[1] - box.lower[1]) / height
    xs = box.lower[0] + (np.arange(width) + 0.5) * cw
    ys = box.lower[1] + (np.arange(height) + 0.5) * ch
    gx, gy = np.meshgrid(xs, ys)
    mass = mixture.density(np.stack([gx, gy], axis=-1)) * (cw * ch)
    total = mass.sum()
    if not total > 0:
        raise ValueError("mixture has no mass inside the domain at this resolution")
    return GridDensity(box, mass / total)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Uniformly weighted point set; each of the ``m`` points carries mass ``1/m``."""

    positions: FloatArray

    def __post_init__(self) -> None:
        pos = _frozen(as_positions(self.positions))
        if pos.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.positions if dtype is None else self.positions.astype(dtype)

    @property
    def weights(self) -> FloatArray:
        return np.full(len(self), 1.0 / len(self))


class ParticleState(PointCloud):
    """Resource particle positions; row ``i`` is particle ``i`` for the whole run."""


@dataclass(frozen=True, eq=False)
class VelocitySample:
    """Per-particle velocities aligned with a :class:`ParticleState`."""

    velocities: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "velocities", _frozen(as_positions(self.velocities)))

    def __len__(self) -> int:
        return self.velocities.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.velocities if dtype is None else self.velocities.astype(dtype)
