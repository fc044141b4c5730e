"""CSV logs of a trajectory.

Frames file::

    # delta_t=0.10000000000000001
    k,t,particle_id,x,y,target_x,target_y
    0,0,0,0.4812...,...

Metrics file::

    k,t,w2_sq,control_energy,sinkhorn_iters,marginal_residual

Floats use 17 significant digits so every value parses back bit-exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np

from .controller import Trajectory

FRAMES_HEADER = ("k", "t", "particle_id", "x", "y", "target_x", "target_y")
METRICS_HEADER = ("k", "t", "w2_sq", "control_energy", "sinkhorn_iters", "marginal_residual")

Sink = Union[str, Path, IO[str]]


class FrameLogError(OSError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _open(sink: Sink, mode: str):
    if isinstance(sink, (str, Path)):
        try:
            return open(sink, mode, newline="", encoding="utf-8"), True
        except OSError as exc:
            raise FrameLogError(f"cannot open {sink}: {exc.strerror or exc}") from exc
    return sink, False


def write_frames(trajectory: Trajectory, frames_sink: Sink, metrics_sink: Sink | None = None) -> None:
    fh, close = _open(frames_sink, "w")
    try:
        fh.write(f"# delta_t={_fmt(trajectory.delta_t)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAMES_HEADER)
        for fr in trajectory.frames:
            t = _fmt(fr.t)
            for i, (p, q) in enumerate(zip(fr.positions, fr.targets)):
                w.writerow((fr.k, t, i, _fmt(p[0]), _fmt(p[1]), _fmt(q[0]), _fmt(q[1])))
    except OSError as exc:
        raise FrameLogError(f"writing frames to {frames_sink}: {exc}") from exc
    finally:
        if close:
            fh.close()
    if metrics_sink is not None:
        write_metrics(trajectory, metrics_sink)


def write_metrics(trajectory: Trajectory, sink: Sink) -> None:
    fh, close = _open(sink, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for fr in trajectory.frames:
            w.writerow(
                (
                    fr.k,
                    _fmt(fr.t),
                    _fmt(fr.w2_sq_estimate),
                    _fmt(fr.control_energy),
                    fr.sinkhorn_iterations,
                    _fmt(fr.marginal_residual),
                )
            )
    except OSError as exc:
        raise FrameLogError(f"writing metrics to {sink}: {exc}") from exc
    finally:
        if close:
            fh.close()


@dataclass(frozen=True)
class FrameTable:
    """Frames parsed back from CSV: ``positions[k, i]`` and ``targets[k, i]``."""

    delta_t: float | None
    steps: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    targets: np.ndarray


def read_frames(source: Sink) -> FrameTable:
    fh, close = _open(source, "r")
    try:
        text = fh.read()
    except OSError as exc:
        raise FrameLogError(f"reading {source}: {exc}") from exc
    finally:
        if close:
            fh.close()

    delta_t = None
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "delta_t":
                delta_t = float(value)
            continue
        lines.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    if not rows or tuple(rows[0]) != FRAMES_HEADER:
        raise ValueError(f"{source}: expected header {','.join(FRAMES_HEADER)}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{source}: no frame rows")
    ks = np.array([int(r[0]) for r in body])
    ids = np.array([int(r[2]) for r in body])
    n_frames = int(ks.max()) + 1
    n = int(ids.max()) + 1
    if len(body) != n_frames * n:
        raise ValueError(f"{source}: expected {n_frames} x {n} rows, got {len(body)}")
    vals = np.array([[float(v) for v in r[3:7]] for r in body])
    pos = np.empty((n_frames, n, 2))
    tgt = np.empty((n_frames, n, 2))
    pos[ks, ids] = vals[:, 0:2]
    tgt[ks, ids] = vals[:, 2:4]
    times = np.empty(n_frames)
    times[ks] = [float(r[1]) for r in body]
    return FrameTable(delta_t, np.arange(n_frames), times, pos, tgt)


def read_metrics(source: Sink) -> dict[str, np.ndarray]:
    fh, close = _open(source, "r")
    try:
        rows = list(csv.reader(fh))
    finally:
        if close:
            fh.close()
    if not rows or tuple(rows[0]) != METRICS_HEADER:
        raise ValueError(f"{source}: expected header {','.join(METRICS_HEADER)}")
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(METRICS_HEADER)
    out = {}
    for name, col in zip(METRICS_HEADER, cols):
        dtype = int if name in ("k", "sinkhorn_iters") else float
        out[name] = np.array([dtype(v) for v in col], dtype=dtype)
    return out
