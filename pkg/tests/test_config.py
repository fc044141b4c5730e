from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmtrack.config import ConfigError, config_to_dict, dump_config, parse_config
from swarmtrack.demand import ConstantVelocityDemand, FadingDemand, StaticDemand

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = """
[controller]
alpha = 0.1
delta_t = 0.1

[horizon]
n_steps = 5

[[demand.components]]
mean = [0.5, 0.5]
cov = [[0.01, 0.0], [0.0, 0.01]]
"""

FULL_SCALE = """
seed = 1
n_particles = 20
[grid]
width = 400
height = 400
[controller]
alpha = 0.1
delta_t = 0.1
n_demand_samples = 500
epsilon = 0.005
[horizon]
n_steps = 50
[demand]
kind = "static"
[[demand.components]]
mean = [0.3, 0.7]
cov = [[0.01, 0.002], [0.002, 0.02]]
weight = 2
[[demand.components]]
mean = [0.7, 0.3]
cov = [[0.015, 0.0], [0.0, 0.01]]
weight = 1
"""


def test_minimal_defaults():
    cfg = parse_config(MINIMAL.encode())
    c = cfg.controller
    assert (c.tol, c.max_iter, c.n_demand_samples, c.epsilon) == (1e-6, 10000, 500, 0.005)
    assert cfg.output.render is False
    assert (cfg.grid_width, cfg.grid_height, cfg.n_particles, cfg.seed) == (400, 400, 20, 0)
    assert cfg.domain.lower == (0.0, 0.0) and cfg.domain.upper == (1.0, 1.0)
    assert isinstance(cfg.demand, StaticDemand)
    assert cfg.initial_resource is None


def test_negative_alpha_names_key():
    with pytest.raises(ConfigError, match=r"controller\.alpha"):
        parse_config(MINIMAL.replace("alpha = 0.1", "alpha = -1"))


def test_full_scale_round_trip():
    cfg = parse_config(FULL_SCALE.encode())
    assert (cfg.grid_width, cfg.grid_height, cfg.n_particles) == (400, 400, 20)
    c = cfg.controller
    assert (c.alpha, c.delta_t, c.n_demand_samples, c.epsilon) == (0.1, 0.1, 500, 0.005)
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_scenarios_idempotent(path):
    cfg = parse_config(path.read_bytes())
    once = dump_config(cfg)
    assert parse_config(once) == cfg
    assert dump_config(parse_config(once)) == once


def test_scenario_kinds():
    kinds = {p.stem: type(parse_config(p.read_bytes()).demand) for p in SCENARIOS.glob("*.toml")}
    assert kinds == {"static": StaticDemand, "fading": FadingDemand, "constant_velocity": ConstantVelocityDemand}


@pytest.mark.parametrize(
    "text,key",
    [
        (MINIMAL + "\nbogus = 1\n", "bogus"),
        (MINIMAL.replace("delta_t = 0.1", "delta_t = 0.1\ndleta = 2"), "controller.dleta"),
        (MINIMAL.replace("cov =", "weigth = 1\ncov ="), r"demand.components\[0\].weigth"),
        (MINIMAL + "\n[output]\nrender_evry = 3\n", "output.render_evry"),
    ],
)
def test_unknown_keys_rejected(text, key):
    with pytest.raises(ConfigError, match=key + ": unknown key"):
        parse_config(text)


@pytest.mark.parametrize(
    "edit,key",
    [
        (("alpha = 0.1\n", ""), "controller.alpha: missing"),
        (("delta_t = 0.1", "delta_t = 0"), "controller.delta_t"),
        (("n_steps = 5", "n_steps = -1"), "horizon.n_steps"),
        (("n_steps = 5", "n_steps = 5\nend_time = 0.7"), "horizon.end_time"),
        (("n_steps = 5", "end_time = 0.55"), "horizon.end_time"),
        (("n_steps = 5", ""), "horizon"),
        (("mean = [0.5, 0.5]", "mean = [0.5]"), r"demand.components\[0\].mean"),
        (("[[0.01, 0.0], [0.0, 0.01]]", "[[0.01, 0.02], [0.02, 0.01]]"), "positive definite"),
        (("[[demand.components]]", "[demand]\nkind = 'spiral'\n[[demand.components]]"), "demand.kind"),
    ],
)
def test_invalid_fields(edit, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(MINIMAL.replace(*edit))


def test_end_time_consistency():
    cfg = parse_config(MINIMAL.replace("n_steps = 5", "n_steps = 30\nend_time = 3.0"))
    assert cfg.n_steps == 30
    assert parse_config(MINIMAL.replace("n_steps = 5", "end_time = 3.0")).n_steps == 30


def test_bad_toml_and_encoding():
    with pytest.raises(ConfigError, match="invalid TOML"):
        parse_config("[controller\n")
    with pytest.raises(ConfigError, match="UTF-8"):
        parse_config(b"\xff\xfe")


@pytest.mark.parametrize("seed", [-(2**63), -1, 0, 2**63 - 1])
def test_seed_range(seed):
    assert parse_config(f"seed = {seed}\n" + MINIMAL).seed == seed


def test_seed_overflow():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(MINIMAL).with_overrides(seed=2**63)


def test_overrides():
    cfg = parse_config(MINIMAL.replace("n_steps = 5", "end_time = 3.0")).with_overrides(seed=4, n_steps=2)
    assert (cfg.seed, cfg.n_steps, cfg.end_time) == (4, 2, None)


@given(
    st.floats(1e-3, 10), st.floats(1e-3, 1), st.integers(1, 2000), st.integers(0, 500),
    st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(1e-3, 0.1), st.floats(0.01, 5)), min_size=1, max_size=4),
)
def test_dump_idempotent(alpha, dt, nd, k, comps):
    body = "".join(
        f"[[demand.components]]\nmean = [{mx!r}, {my!r}]\ncov = [[{s!r}, 0.0], [0.0, {s!r}]]\nweight = {w!r}\n"
        for mx, my, s, w in comps
    )
    text = f"[controller]\nalpha = {alpha!r}\ndelta_t = {dt!r}\nn_demand_samples = {nd}\n[horizon]\nn_steps = {k}\n" + body
    cfg = parse_config(text)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert config_to_dict(again) == config_to_dict(cfg)
