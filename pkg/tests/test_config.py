from pathlib import Path

import pytest

from conftest import CONFIGS, small_config
from viscshock.config import ConfigError, load_config, parse_config


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.name == path.stem
    flux = cfg.build_flux()
    assert cfg.build_shock(flux).eps == 1.0
    cfg.build_grid()


def test_defaults_are_echoed():
    echo = parse_config(small_config()).echo()
    assert echo["time"]["quad_points"] == 10
    assert echo["tolerances"]["tail_tol"] == 1e-6
    assert parse_config(echo).echo() == echo


def test_sin_flux_bound_defaults_to_curvature():
    cfg = parse_config(small_config(flux={"kind": "sin", "kappa": 0.05, "omega": 2.0}))
    assert cfg.build_flux().g2_bound == pytest.approx(0.2)


def test_poly_flux_needs_bound():
    cfg = parse_config(small_config(flux={"kind": "poly", "coeffs": [0, 0, 0, 0.01]}))
    with pytest.raises(ConfigError):
        cfg.build_flux()


@pytest.mark.parametrize("over", [
    {"grid": {"L": -1.0}},
    {"grid": {"n_xi": 3}},
    {"time": {"dt_policy": "fixed"}},
    {"initial": {"family": "zigzag"}},
    {"flux": {"transverse": [{"coeffs": [0, 1]}, {"coeffs": [0, 1]}]}},
    {"extra_section": {"x": 1}},
])
def test_invalid_configs(over):
    with pytest.raises(ConfigError):
        parse_config(small_config(**over))


def test_unreadable_file(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("name = [unterminated\n")
    with pytest.raises(ConfigError):
        load_config(bad)
