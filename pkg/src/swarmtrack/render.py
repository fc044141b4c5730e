"""Frame rasters as binary PPM (P6).

One pixel per grid cell, top image row = highest y. Cell mass ``m`` is
colored by linear interpolation from ``LOW_COLOR`` at ``m = 0`` to
``HIGH_COLOR`` at the frame's largest cell mass, each channel rounded half
to even. Assignment segments are drawn in ``SEGMENT_COLOR`` with
Bresenham's algorithm, then particles as 3x3 ``PARTICLE_COLOR`` squares on
top, clipped at the image border.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from .domain import GridDensity, as_positions

LOW_COLOR = (0, 0, 255)
HIGH_COLOR = (255, 255, 0)
PARTICLE_COLOR = (255, 255, 255)
SEGMENT_COLOR = (255, 0, 0)


def density_colors(density: GridDensity) -> np.ndarray:
    """``(height, width, 3)`` uint8 image of the density alone, y axis pointing up."""
    m = density.mass
    s = m / m.max()
    lo = np.asarray(LOW_COLOR, dtype=np.float64)
    hi = np.asarray(HIGH_COLOR, dtype=np.float64)
    rgb = np.rint(lo + s[..., None] * (hi - lo)).astype(np.uint8)
    return rgb[::-1].copy()


def to_pixels(density: GridDensity, points: ArrayLike) -> np.ndarray:
    """Integer ``(col, row)`` image coordinates of ``points``; row 0 is the top."""
    p = as_positions(points)
    lo = np.asarray(density.box.lower)
    frac = (p - lo) / density.box.size
    col = np.clip(np.floor(frac[:, 0] * density.width), 0, density.width - 1).astype(int)
    row = np.clip(np.floor(frac[:, 1] * density.height), 0, density.height - 1).astype(int)
    return np.stack([col, density.height - 1 - row], axis=1)


def _line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def render_frame(density: GridDensity, positions: ArrayLike | None = None, targets: ArrayLike | None = None) -> np.ndarray:
    """Compose the frame image; returns ``(height, width, 3)`` uint8. Inputs are not modified."""
    img = density_colors(density)
    h, w = img.shape[:2]
    if positions is None or len(np.asarray(positions)) == 0:
        return img
    pix = to_pixels(density, positions)
    if targets is not None:
        tpix = to_pixels(density, targets)
        for (c0, r0), (c1, r1) in zip(pix, tpix):
            for c, r in _line(int(c0), int(r0), int(c1), int(r1)):
                img[r, c] = SEGMENT_COLOR
    for c, r in pix:
        img[max(r - 1, 0) : min(r + 2, h), max(c - 1, 0) : min(c + 2, w)] = PARTICLE_COLOR
    return img


def encode_ppm(img: np.ndarray) -> bytes:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected an (h, w, 3) uint8 image")
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    """Parse a P6 file as written by :func:`encode_ppm` (no comments)."""
    magic, dims, maxval, body = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("not an 8-bit binary PPM")
    w, h = (int(v) for v in dims.split())
    if len(body) != w * h * 3:
        raise ValueError("PPM payload size mismatch")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def write_ppm(path: Union[str, Path], img: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(img))


def frame_filename(k: int) -> str:
    return f"frame_{k:06d}.ppm"
