"""Shared fixtures. Long simulations are session-scoped and reused across files."""
from __future__ import annotations

from pathlib import Path

import pytest

from viscshock.config import load_config, parse_config
from viscshock.dynamics import run
from viscshock.flux import FluxSpec, ScalarFunction, ShockData
from viscshock.profile import solve_profile

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def burgers():
    flux = FluxSpec.burgers(0.5)
    return flux, ShockData.from_states(flux, 1.0, 0.0)


@pytest.fixture(scope="session")
def burgers_profile(burgers):
    return solve_profile(*burgers)


@pytest.fixture(scope="session")
def sin_flux():
    flux = FluxSpec(0.5, ScalarFunction((), 0.05), 0.05)
    return flux, ShockData.from_states(flux, 1.0, 0.0)


@pytest.fixture(scope="session")
def sin_profile(sin_flux):
    return solve_profile(*sin_flux)


def small_config(**overrides) -> dict:
    """A cheap n = 2 configuration, edited per test."""
    d = {
        "name": "small",
        "flux": {"kind": "burgers", "a": 0.5},
        "shock": {"u_minus": 1.0, "u_plus": 0.0},
        "grid": {"L": 40.0, "n_xi": 401, "n_dims": 2, "n_t": 8},
        "time": {"t_final": 2.0, "diag_dt": 0.1},
        "initial": {"family": "bump", "amplitude": 0.5, "width": 2.0},
    }
    for key, val in overrides.items():
        d[key] = {**d.get(key, {}), **val} if isinstance(val, dict) else val
    return d


@pytest.fixture
def small():
    return small_config


@pytest.fixture(scope="session")
def main_run(tmp_path_factory):
    """The full-resolution Burgers bump fixture, run once per session."""
    cfg = load_config(CONFIGS / "burgers_bump_n2.toml")
    return run(cfg, tmp_path_factory.mktemp("main"))


@pytest.fixture(scope="session")
def refined_pair(main_run, tmp_path_factory):
    """Same fixture at half the xi resolution, for the refinement comparison."""
    cfg = load_config(CONFIGS / "burgers_bump_n2.toml")
    cfg = parse_config({**cfg.echo(), "grid": {**cfg.echo()["grid"], "n_xi": 801}})
    coarse = run(cfg, tmp_path_factory.mktemp("coarse"))
    return coarse, main_run


@pytest.fixture(scope="session")
def shifted_run(tmp_path_factory):
    return run(load_config(CONFIGS / "shifted_profile_n2.toml"), tmp_path_factory.mktemp("shift"))


@pytest.fixture(scope="session")
def perturbed_g_run(tmp_path_factory):
    return run(load_config(CONFIGS / "perturbed_g_bump_n2.toml"), tmp_path_factory.mktemp("pg"))


def paired_config(initial: dict) -> dict:
    # the automatic step depends on the data range, so pairs share a fixed one
    return small_config(grid={"L": 40.0, "n_xi": 801, "n_t": 16},
                        time={"t_final": 10.0, "diag_dt": 0.1, "dt_policy": "fixed",
                              "dt": 0.002},
                        initial=initial)


@pytest.fixture(scope="session")
def paired_runs():
    """Runs sharing grid and steps: two different bumps, and the profile itself."""
    base = {"family": "bump", "amplitude": 1.0, "width": 2.0, "torus_width": 0.3}
    other = {"family": "modulated_bump", "amplitude": 0.7, "width": 1.5, "center": -1.0}
    prof = {"family": "profile"}
    runs = {}
    for name, init in (("a", base), ("b", other), ("profile", prof)):
        runs[name] = run(parse_config(paired_config(init)), write=False, keep_fields=True)
    return runs


LONG_FIXTURES = {"main_run", "refined_pair", "shifted_run", "perturbed_g_run", "paired_runs"}


def pytest_collection_modifyitems(items):
    for item in items:
        if LONG_FIXTURES & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
