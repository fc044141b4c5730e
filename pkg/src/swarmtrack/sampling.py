"""Seedable sampling of point clouds from grid densities.

The generator is counter based: draw ``n`` of a stream with seed ``s`` is
``splitmix64(s + n * GAMMA)``, so a stream is reproducible from its seed and
counter alone and independent streams are obtained by deriving seeds with
:meth:`RngState.spawn`. Results are bit-identical for a given seed and call
sequence on any platform that implements IEEE doubles.
"""

from __future__ import annotations

import numpy as np

from .domain import GridDensity, PointCloud

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, counter: int, n: int) -> np.ndarray:
    """Outputs ``counter + 1 .. counter + n`` of the splitmix64 sequence seeded with ``seed``."""
    idx = np.arange(counter + 1, counter + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + idx * np.uint64(_GAMMA)
        return _mix64(z)


class RngState:
    """Explicit random stream. Not thread-safe; give each consumer its own via :meth:`spawn`."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0) -> None:
        self.seed = int(seed) & _MASK
        self.counter = int(counter)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed:#018x}, counter={self.counter})"

    def next_uint64(self, n: int) -> np.ndarray:
        out = splitmix64(self.seed, self.counter, n)
        self.counter += n
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in ``[0, 1)`` with 53 random bits each."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def spawn(self, key: int) -> RngState:
        """Child stream for ``key``; depends only on this stream's seed, not its counter."""
        with np.errstate(over="ignore"):
            base = _mix64(np.array([self.seed], dtype=np.uint64))[0]
            mixed = _mix64(np.array([int(base) ^ ((int(key) + 1) * _GAMMA & _MASK)], dtype=np.uint64))
        return RngState(int(mixed[0]))


def inverse_transform_sample(density: GridDensity, n: int, rng: RngState) -> PointCloud:
    """Draw ``n`` points from ``density``.

    Cells are chosen by inverting the row-major cumulative mass, then each
    point is placed uniformly inside its cell. Consumes ``3 * n`` draws from
    ``rng``: cell selectors first, then x and y jitter.
    """
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    cdf = np.cumsum(density.mass.ravel())
    u = rng.uniform(n) * cdf[-1]
    cells = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    rows, cols = np.divmod(cells, density.width)
    jx = rng.uniform(n)
    jy = rng.uniform(n)
    cw, ch = density.cell_size
    x = density.box.lower[0] + (cols + jx) * cw
    y = density.box.lower[1] + (rows + jy) * ch
    pts = np.stack([x, y], axis=1)
    # rounding at the outer edge can land one ulp past the box
    pts = np.clip(pts, density.box.lower, density.box.upper)
    return PointCloud(pts)
