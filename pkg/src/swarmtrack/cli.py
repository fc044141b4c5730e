"""Command line driver.

    swarmtrack run SCENARIO.toml [--seed N] [--steps K] [--out-dir DIR]
    swarmtrack render FRAMES.csv SCENARIO.toml [--out-dir DIR] [--every N]
    swarmtrack validate SCENARIO.toml

Relative output paths resolve against ``--out-dir``, else
``$SWARMTRACK_OUT_DIR``, else the working directory.

Exit status: 0 success, 1 finished with unconverged Sinkhorn solves,
2 configuration or usage error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, SimConfig, dump_config, parse_config
from .controller import Frame, run_simulation
from .demand import demand_at
from .domain import GridDensity, rasterize
from .framelog import FrameLogError, read_frames, write_frames
from .kernels import BACKEND
from .ot import NonConvergenceWarning
from .render import frame_filename, render_frame, write_ppm

EXIT_OK = 0
EXIT_UNCONVERGED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

OUT_DIR_ENV = "SWARMTRACK_OUT_DIR"

log = logging.getLogger("swarmtrack")


def _load_config(path: str) -> SimConfig:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FrameLogError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(data)


def _out_dir(arg: Optional[str]) -> Path:
    return Path(arg or os.environ.get(OUT_DIR_ENV) or ".")


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config).with_overrides(seed=args.seed, n_steps=args.steps)
    out = _out_dir(args.out_dir)
    render_dir = _resolve(out, cfg.output.render_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.output.render:
            render_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FrameLogError(f"cannot create output directory: {exc}") from exc

    def on_frame(frame: Frame, density: GridDensity) -> None:
        if cfg.output.render and frame.k % cfg.output.render_every == 0:
            img = render_frame(density, frame.positions, frame.targets)
            try:
                write_ppm(render_dir / frame_filename(frame.k), img)
            except OSError as exc:
                raise FrameLogError(f"cannot write frame image: {exc}") from exc

    log.info("running %d steps with N=%d on the %s backend", cfg.n_steps, cfg.n_particles, BACKEND)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        traj = run_simulation(cfg, on_frame=on_frame)
    frames_path = _resolve(out, cfg.output.frames_path)
    metrics_path = _resolve(out, cfg.output.metrics_path)
    write_frames(traj, frames_path, metrics_path)
    log.info("objective %.6g; wrote %s and %s", traj.objective, frames_path, metrics_path)
    if traj.n_unconverged:
        log.warning("%d of %d Sinkhorn solves did not converge", traj.n_unconverged, len(traj.frames))
        return EXIT_UNCONVERGED
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    table = read_frames(args.frames)
    out = _resolve(_out_dir(args.out_dir), cfg.output.render_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FrameLogError(f"cannot create output directory: {exc}") from exc
    every = args.every or cfg.output.render_every
    count = 0
    for k in table.steps[::every]:
        density = rasterize(demand_at(cfg.demand, float(table.times[k])), cfg.domain, cfg.grid_width, cfg.grid_height)
        img = render_frame(density, table.positions[k], table.targets[k])
        try:
            write_ppm(out / frame_filename(int(k)), img)
        except OSError as exc:
            raise FrameLogError(f"cannot write frame image: {exc}") from exc
        count += 1
    log.info("wrote %d frames to %s", count, out)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors share the config exit status
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swarmtrack", description="Particle MPC tracking of a time-varying demand distribution.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate a scenario and write frame/metric CSVs")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--steps", type=int, help="override the horizon with this many steps")
    run.add_argument("--out-dir")
    run.set_defaults(func=_cmd_run)

    ren = sub.add_parser("render", help="render frames from a frames CSV as PPM images")
    ren.add_argument("frames")
    ren.add_argument("config")
    ren.add_argument("--out-dir")
    ren.add_argument("--every", type=int, help="render every n-th frame (default: output.render_every)")
    ren.set_defaults(func=_cmd_render)

    val = sub.add_parser("validate", help="check a scenario and print its normalized form")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG
    except FrameLogError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        # malformed frames CSV passed to render
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
