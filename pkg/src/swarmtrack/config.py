"""Scenario configuration: TOML schema, validation and normalized dump.

Schema (all sections optional unless noted)::

    seed = 0                    # integer in [-2**63, 2**63)
    n_particles = 20

    [domain]
    lower = [0.0, 0.0]
    upper = [1.0, 1.0]

    [grid]
    width = 400
    height = 400

    [controller]                # required
    alpha = 0.1                 # required, > 0
    delta_t = 0.1               # required, > 0
    n_demand_samples = 500
    epsilon = 0.005
    tol = 1e-6
    max_iter = 10000

    [horizon]                   # required: n_steps, end_time, or both (must agree)
    n_steps = 50
    end_time = 5.0

    [demand]                    # required
    kind = "static"             # "static" | "fading" | "constant_velocity"
    # static:            [[demand.components]]
    # fading:            fade_start, fade_end, [[demand.left]], [[demand.right]]
    # constant_velocity: departure_time, [[demand.components]] with velocity = [vx, vy]

    [initial_resource]          # defaults to the demand at t = 0
    [[initial_resource.components]]
    mean = [0.5, 0.5]
    cov = [[0.01, 0.0], [0.0, 0.01]]
    weight = 1.0                # default 1; weights are normalized

    [output]
    frames_path = "frames.csv"
    metrics_path = "metrics.csv"
    render = false
    render_every = 1
    render_dir = "render"

Unknown keys are rejected. Errors are :class:`ConfigError` with the dotted
key path in the message.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controller import ControllerParams
from .demand import ConstantVelocityDemand, DemandSpec, FadingDemand, StaticDemand
from .domain import UNIT_SQUARE, DomainBox, GaussianMixture
from .ot import DEFAULT_MAX_ITER, DEFAULT_TOL


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputConfig:
    frames_path: str = "frames.csv"
    metrics_path: str = "metrics.csv"
    render: bool = False
    render_every: int = 1
    render_dir: str = "render"


@dataclass(frozen=True)
class SimConfig:
    controller: ControllerParams
    demand: DemandSpec
    n_steps: int
    domain: DomainBox = UNIT_SQUARE
    grid_width: int = 400
    grid_height: int = 400
    n_particles: int = 20
    initial_resource: Optional[GaussianMixture] = None
    end_time: Optional[float] = None
    seed: int = 0
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_overrides(self, seed: Optional[int] = None, n_steps: Optional[int] = None) -> SimConfig:
        from dataclasses import replace

        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = _check_seed(seed, "seed")
        if n_steps is not None:
            if n_steps < 0:
                raise ConfigError(f"horizon.n_steps: must be >= 0, got {n_steps}")
            changes["n_steps"] = n_steps
            changes["end_time"] = None
        return replace(self, **changes)


_REQUIRED = object()


def _check_seed(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if not -(2**63) <= value < 2**63:
        raise ConfigError(f"{path}: must fit in a signed 64-bit integer")
    return value


class _Table:
    """Reads one TOML table, tracking the key path and consumed keys."""

    def __init__(self, data: Any, path: str) -> None:
        if not isinstance(data, dict):
            raise ConfigError(f"{path or '<root>'}: expected a table, got {type(data).__name__}")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def raw(self, name: str, default: Any = _REQUIRED) -> Any:
        self.seen.add(name)
        if name in self.data:
            return self.data[name]
        if default is _REQUIRED:
            raise ConfigError(f"{self.key(name)}: missing required key")
        return default

    def number(self, name: str, default: Any = _REQUIRED, *, positive: bool = False, nonneg: bool = False) -> Any:
        v = self.raw(name, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{self.key(name)}: expected a finite number, got {v!r}")
        v = float(v)
        if positive and not v > 0:
            raise ConfigError(f"{self.key(name)}: must be > 0, got {v!r}")
        if nonneg and not v >= 0:
            raise ConfigError(f"{self.key(name)}: must be >= 0, got {v!r}")
        return v

    def integer(self, name: str, default: Any = _REQUIRED, *, minimum: int = 0) -> Any:
        v = self.raw(name, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{self.key(name)}: expected an integer, got {v!r}")
        if v < minimum:
            raise ConfigError(f"{self.key(name)}: must be >= {minimum}, got {v}")
        return v

    def boolean(self, name: str, default: Any = _REQUIRED) -> bool:
        v = self.raw(name, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{self.key(name)}: expected true or false, got {v!r}")
        return v

    def string(self, name: str, default: Any = _REQUIRED) -> str:
        v = self.raw(name, default)
        if not isinstance(v, str) or not v:
            raise ConfigError(f"{self.key(name)}: expected a non-empty string, got {v!r}")
        return v

    def vector(self, name: str, default: Any = _REQUIRED) -> tuple[float, float]:
        v = self.raw(name, default)
        if not (isinstance(v, (list, tuple)) and len(v) == 2):
            raise ConfigError(f"{self.key(name)}: expected a 2-element array, got {v!r}")
        out = []
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ConfigError(f"{self.key(name)}: entries must be finite numbers, got {v!r}")
            out.append(float(x))
        return out[0], out[1]

    def matrix(self, name: str) -> list[tuple[float, float]]:
        v = self.raw(name)
        if not (isinstance(v, list) and len(v) == 2):
            raise ConfigError(f"{self.key(name)}: expected a 2x2 array, got {v!r}")
        return [_Table({"row": row}, self.key(name)).vector("row") for row in v]

    def table(self, name: str, required: bool = False) -> Optional[_Table]:
        v = self.raw(name, _REQUIRED if required else None)
        return None if v is None else _Table(v, self.key(name))

    def tables(self, name: str) -> list[_Table]:
        v = self.raw(name)
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{self.key(name)}: expected a non-empty array of tables")
        return [_Table(item, f"{self.key(name)}[{i}]") for i, item in enumerate(v)]

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.seen)
        if extra:
            raise ConfigError(f"{self.key(extra[0])}: unknown key")


def _read_mixture(t: _Table, name: str, with_velocity: bool = False):
    comps = t.tables(name)
    means, covs, weights, vels = [], [], [], []
    for c in comps:
        means.append(c.vector("mean"))
        covs.append(c.matrix("cov"))
        weights.append(c.number("weight", 1.0, nonneg=True))
        if with_velocity:
            vels.append(c.vector("velocity"))
        c.finish()
    try:
        mix = GaussianMixture.normalized(means, covs, weights)
    except ValueError as exc:
        raise ConfigError(f"{t.key(name)}: {exc}") from None
    return (mix, np.array(vels)) if with_velocity else mix


def _read_demand(t: _Table, box: DomainBox) -> DemandSpec:
    kind = t.string("kind", "static")
    try:
        if kind == "static":
            spec: DemandSpec = StaticDemand(_read_mixture(t, "components"))
        elif kind == "fading":
            start = t.number("fade_start")
            end = t.number("fade_end")
            if not start < end:
                raise ConfigError(f"{t.key('fade_end')}: must exceed fade_start ({start}), got {end}")
            spec = FadingDemand(_read_mixture(t, "left"), _read_mixture(t, "right"), start, end)
        elif kind == "constant_velocity":
            departure = t.number("departure_time", nonneg=True)
            base, vels = _read_mixture(t, "components", with_velocity=True)
            spec = ConstantVelocityDemand(base, departure, vels, box)
        else:
            raise ConfigError(
                f"{t.key('kind')}: expected 'static', 'fading' or 'constant_velocity', got {kind!r}"
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{t.path}: {exc}") from None
    t.finish()
    return spec


def parse_config(text: bytes | str) -> SimConfig:
    """Parse and validate scenario TOML."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    root = _Table(data, "")

    seed = _check_seed(root.raw("seed", 0), "seed")
    n_particles = root.integer("n_particles", 20, minimum=1)

    dom = root.table("domain")
    box = UNIT_SQUARE
    if dom is not None:
        lower = dom.vector("lower", UNIT_SQUARE.lower)
        upper = dom.vector("upper", UNIT_SQUARE.upper)
        dom.finish()
        try:
            box = DomainBox(lower, upper)
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from None

    grid = root.table("grid")
    width = height = 400
    if grid is not None:
        width = grid.integer("width", 400, minimum=1)
        height = grid.integer("height", 400, minimum=1)
        grid.finish()

    ctl = root.table("controller", required=True)
    controller = ControllerParams(
        alpha=ctl.number("alpha", positive=True),
        delta_t=ctl.number("delta_t", positive=True),
        n_demand_samples=ctl.integer("n_demand_samples", 500, minimum=1),
        epsilon=ctl.number("epsilon", 0.005, positive=True),
        tol=ctl.number("tol", DEFAULT_TOL, positive=True),
        max_iter=ctl.integer("max_iter", DEFAULT_MAX_ITER, minimum=1),
    )
    ctl.finish()

    hor = root.table("horizon", required=True)
    n_steps = hor.integer("n_steps", None, minimum=0)
    end_time = hor.number("end_time", None, nonneg=True)
    hor.finish()
    dt = controller.delta_t
    if n_steps is None and end_time is None:
        raise ConfigError("horizon: give n_steps, end_time, or both")
    if end_time is not None:
        implied = round(end_time / dt)
        if abs(implied * dt - end_time) > 1e-9 * max(1.0, end_time):
            raise ConfigError(f"horizon.end_time: {end_time} is not a whole number of delta_t = {dt} steps")
        if n_steps is not None and n_steps != implied:
            raise ConfigError(
                f"horizon.end_time: {end_time} disagrees with n_steps * delta_t = {n_steps} * {dt}"
            )
        n_steps = implied

    demand = _read_demand(root.table("demand", required=True), box)

    init = root.table("initial_resource")
    initial = None
    if init is not None:
        initial = _read_mixture(init, "components")
        init.finish()

    out = root.table("output")
    output = OutputConfig()
    if out is not None:
        output = OutputConfig(
            frames_path=out.string("frames_path", output.frames_path),
            metrics_path=out.string("metrics_path", output.metrics_path),
            render=out.boolean("render", output.render),
            render_every=out.integer("render_every", output.render_every, minimum=1),
            render_dir=out.string("render_dir", output.render_dir),
        )
        out.finish()

    root.finish()
    return SimConfig(
        controller=controller,
        demand=demand,
        n_steps=n_steps,
        domain=box,
        grid_width=width,
        grid_height=height,
        n_particles=n_particles,
        initial_resource=initial,
        end_time=end_time,
        seed=seed,
        output=output,
    )


def _mixture_tables(mix: GaussianMixture, velocities: Optional[np.ndarray] = None) -> list[dict]:
    out = []
    for i, c in enumerate(mix.components):
        row: dict[str, Any] = {"mean": list(c.mean), "cov": [list(r) for r in c.cov], "weight": c.weight}
        if velocities is not None:
            row["velocity"] = [float(v) for v in velocities[i]]
        out.append(row)
    return out


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    c = cfg.controller
    d: dict[str, Any] = {
        "seed": cfg.seed,
        "n_particles": cfg.n_particles,
        "domain": {"lower": list(cfg.domain.lower), "upper": list(cfg.domain.upper)},
        "grid": {"width": cfg.grid_width, "height": cfg.grid_height},
        "controller": {
            "alpha": c.alpha,
            "delta_t": c.delta_t,
            "n_demand_samples": c.n_demand_samples,
            "epsilon": c.epsilon,
            "tol": c.tol,
            "max_iter": c.max_iter,
        },
        "horizon": {"n_steps": cfg.n_steps},
    }
    if cfg.end_time is not None:
        d["horizon"]["end_time"] = cfg.end_time
    spec = cfg.demand
    if isinstance(spec, StaticDemand):
        d["demand"] = {"kind": "static", "components": _mixture_tables(spec.mixture)}
    elif isinstance(spec, FadingDemand):
        d["demand"] = {
            "kind": "fading",
            "fade_start": spec.fade_start,
            "fade_end": spec.fade_end,
            "left": _mixture_tables(spec.left),
            "right": _mixture_tables(spec.right),
        }
    else:
        d["demand"] = {
            "kind": "constant_velocity",
            "departure_time": spec.departure_time,
            "components": _mixture_tables(spec.base, spec.velocities),
        }
    if cfg.initial_resource is not None:
        d["initial_resource"] = {"components": _mixture_tables(cfg.initial_resource)}
    o = cfg.output
    d["output"] = {
        "frames_path": o.frames_path,
        "metrics_path": o.metrics_path,
        "render": o.render,
        "render_every": o.render_every,
        "render_dir": o.render_dir,
    }
    return d


def dump_config(cfg: SimConfig) -> str:
    """Normalized TOML with every default spelled out; ``parse_config`` inverts it exactly."""
    return tomli_w.dumps(config_to_dict(cfg))
