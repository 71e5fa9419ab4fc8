"""Moving-frame evolution of the viscous conservation law coupled with the shift.

The state is advanced in ``xi = x1 - sigma t`` where the unshifted profile is
a steady state. Space is discretized by the conservative scheme of
:func:`viscshock.grid.divergence_flux` plus the centered Laplacian, fused into
compiled kernels; the right-hand side is well balanced, i.e. the discrete
residual of the tabulated profile is subtracted so that ``u0 = profile`` is an
exact discrete equilibrium. Time stepping uses the four-stage third-order
strong-stability-preserving Runge-Kutta method, applied to ``(u, X)`` jointly.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .flux import FluxSpec, check_admissibility
from .grid import Field, Grid, integrate_array, write_snapshot
from .profile import ShockProfile

log = logging.getLogger(__name__)

SSP_COEFFICIENT = 2.0


class DynamicsError(RuntimeError):
    pass


class NumericalAbort(DynamicsError):
    """The step blew the sup norm past its tolerance, typically a CFL violation."""


class ShiftRangeError(DynamicsError):
    """The shift left the window in which the profile can be evaluated honestly."""


class InitialDataError(ValueError):
    pass


@dataclass
class SimState:
    u: Field
    t: float = 0.0
    X: float = 0.0
    Xdot: float = 0.0
    step_index: int = 0


# initial data -------------------------------------------------------------

def smooth_bump(s):
    """``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero outside; peak value 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


def smooth_step(s):
    """C-infinity transition from 0 (s <= 0) to 1 (s >= 1)."""
    s = np.asarray(s, dtype=float)

    def psi(x):
        out = np.zeros_like(x)
        m = x > 0
        out[m] = np.exp(-1.0 / x[m])
        return out

    a, b = psi(s), psi(1.0 - s)
    return a / (a + b)


def plateau(s, half_width, edge):
    """Flat top of height 1 on ``|s| <= half_width``, smooth edges of length ``edge``."""
    s = np.abs(np.asarray(s, dtype=float))
    return smooth_step((half_width + edge - s) / edge)


def _periodic_distance(x, c):
    d = np.abs(x - c) % 1.0
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class InitialData:
    """Generator for ``u0``; the perturbation ``u0 - profile`` is what the families describe.

    ``width`` is the xi half-width of the support (the plateau half-width for
    ``plateau``); ``torus_width`` optionally localizes the data in every torus
    direction around ``torus_center``.
    """

    family: str = "bump"
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 2.0
    torus_center: float = 0.5
    torus_width: Optional[float] = None
    edge: float = 0.05
    shift: float = 0.0
    seed: int = 0
    margin: Optional[float] = None

    FAMILIES = ("profile", "bump", "modulated_bump", "shifted_profile", "plateau", "random")

    @classmethod
    def from_config(cls, cfg) -> "InitialData":
        return cls(**cfg.model_dump())

    def support_half_width(self) -> float:
        if self.family == "plateau":
            return self.width + self.edge
        return self.width

    def check_margin(self, grid: Grid, t_final: float, profile: ShockProfile,
                     tail_tol: float = 1e-6) -> None:
        if self.family == "profile":
            return
        if self.family == "shifted_profile":
            s = self.shift
            ends = np.array([-grid.L, grid.L])
            gap = np.max(np.abs(profile.value(ends - s) - profile.value(ends)))
            if gap > tail_tol * profile.shock.eps:
                raise InitialDataError(
                    f"shift {s:g} leaves a perturbation of {gap:.2e} at the boundary")
            return
        margin = 5.0 * math.sqrt(t_final) if self.margin is None else self.margin
        reach = abs(self.center) + self.support_half_width()
        if reach > grid.L - margin:
            raise InitialDataError(
                f"initial support reaches |xi| = {reach:g}, closer than the margin "
                f"{margin:g} to the boundary at L = {grid.L:g}")

    def torus_factor(self, grid: Grid) -> np.ndarray:
        """Product over torus directions, shaped to broadcast against the grid."""
        coords = grid.coords()[:-1]
        fac = np.ones([1] * grid.n_dims)
        if self.torus_width is not None:
            for x in coords:
                fac = fac * smooth_bump(_periodic_distance(x, self.torus_center) / self.torus_width)
        return fac

    def perturbation(self, grid: Grid, profile: ShockProfile) -> np.ndarray:
        xi = grid.xi
        fam = self.family
        if fam == "profile":
            return np.zeros(grid.shape)
        if fam == "shifted_profile":
            row = profile.value(xi - self.shift) - profile.value(xi)
            return grid.broadcast_xi(row)
        s = (xi - self.center) / self.width
        if fam == "bump":
            return self.amplitude * smooth_bump(s) * self.torus_factor(grid)
        if fam == "plateau":
            return self.amplitude * plateau(xi - self.center, self.width, self.edge) \
                * self.torus_factor(grid)
        if fam == "modulated_bump":
            x2 = grid.coords()[0]
            return self.amplitude * smooth_bump(s) * (1.0 + np.cos(2.0 * np.pi * x2)) \
                * self.torus_factor(grid)
        if fam == "random":
            rng = np.random.default_rng(self.seed)
            env = smooth_bump(s)
            pert = np.zeros(grid.shape)
            for x in grid.coords()[:-1]:
                for k in range(4):
                    c, ph = rng.normal(), rng.uniform(0, 2 * np.pi)
                    pert = pert + c * np.cos(2 * np.pi * k * x + ph) / (1 + k)
            modes = sum(rng.normal() * np.sin(np.pi * k * (s + 1) / 2.0) for k in range(1, 5))
            pert = pert * (1.0 + 0.5 * modes) * env * self.torus_factor(grid)
            peak = np.max(np.abs(pert))
            return self.amplitude * pert / peak if peak > 0 else pert
        raise InitialDataError(f"unknown initial-data family {fam!r}")

    def generate(self, grid: Grid, profile: ShockProfile) -> Field:
        u = profile.value(grid.xi)[None] * np.ones(grid.shape) + self.perturbation(grid, profile)
        u = np.ascontiguousarray(u)
        u[..., 0] = profile.shock.u_minus
        u[..., -1] = profile.shock.u_plus
        return Field(grid, u)


# shift ODE ------------------------------------------------------------------

def torus_mean(u: np.ndarray) -> np.ndarray:
    """Average over the torus axes; the torus has unit measure."""
    return u.reshape(-1, u.shape[-1]).mean(axis=0)


def shift_rhs_mean(mean_row: np.ndarray, X: float, grid: Grid, profile: ShockProfile,
                   flux: FluxSpec) -> float:
    """Shift velocity from the torus-averaged solution; the torus integral is exact."""
    xi = grid.xi - X
    w = mean_row - profile.value(xi)
    gain = flux.shift_gain / (2.0 * profile.shock.eps)
    return -gain * float(np.dot(grid.xi_weights, w * profile.derivative(xi)))


def shift_rhs_array(u: np.ndarray, X: float, grid: Grid, profile: ShockProfile,
                    flux: FluxSpec) -> float:
    return shift_rhs_mean(torus_mean(u), X, grid, profile, flux)


def shift_rhs(state: SimState, profile: ShockProfile, flux: FluxSpec) -> float:
    """Velocity of the shift: minus ``(2a+g2)/(2 eps)`` times the projection on the profile slope."""
    return shift_rhs_array(state.u.values, state.X, state.u.grid, profile, flux)


# discrete operator ---------------------------------------------------------

class Operator:
    """Well-balanced semi-discrete right-hand side on a fixed grid."""

    def __init__(self, grid: Grid, flux: FluxSpec, profile: ShockProfile):
        self.grid, self.flux, self.profile = grid, flux, profile
        self.sigma = profile.shock.sigma
        self.normal = self._pack(flux.normal)
        self.trans = [self._pack(fk) for fk in flux.transverse_fluxes(grid.n_dims)]
        row = np.ascontiguousarray(profile.value(grid.xi))
        row[0], row[-1] = profile.shock.u_minus, profile.shock.u_plus
        self.base_row = row
        src = np.zeros(grid.n_xi)
        out = np.empty((1, grid.n_xi))
        self._xi(row[None, :], out, src)
        self.src = out[0].copy()
        nt, n = grid.n_t, grid.n_dims
        nx = grid.n_xi
        self._torus_shapes = [(nt**k, nt, nt ** (n - 2 - k) * nx) for k in range(n - 1)]

    @staticmethod
    def _pack(fun):
        c, amp, fr, ph = fun.packed()
        return _kernels.pack_coefficients(c), amp, fr, ph

    def _xi(self, u2, out2, src):
        c, amp, fr, ph = self.normal
        _kernels.xi_rhs(u2, out2, self.grid.h_xi, c, amp, fr, ph, self.sigma, src)

    def apply(self, u: np.ndarray, out: np.ndarray) -> np.ndarray:
        nx = self.grid.n_xi
        self._xi(u.reshape(-1, nx), out.reshape(-1, nx), self.src)
        for shape, (c, amp, fr, ph) in zip(self._torus_shapes, self.trans):
            _kernels.torus_add(u.reshape(shape), out.reshape(shape), self.grid.h_t,
                               c, amp, fr, ph)
        out[..., 0] = 0.0
        out[..., -1] = 0.0
        return out

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.apply(u, np.empty_like(u))

    def max_speeds(self, lo: float, hi: float) -> list[float]:
        """``max |f_i'|`` over ``[lo, hi]``, the xi entry taken relative to the frame."""
        v = np.linspace(lo, hi, 2001)
        speeds = [float(np.max(np.abs(self.flux.df1(v) - self.sigma)))]
        for fk in self.flux.transverse_fluxes(self.grid.n_dims):
            speeds.append(float(np.max(np.abs(fk.deriv(v)))))
        return speeds


def stable_dt(grid: Grid, speeds: list[float], c_diff: float = 0.9, c_adv: float = 0.9) -> float:
    """Largest step for which each forward-Euler stage is monotone, times the SSP coefficient.

    Forward Euler with the LLF/MUSCL flux and the 5-point (or 2n+1 point)
    Laplacian is positive when ``dt * (sum 2/h_i^2 + sum 2 lam_i/h_i) <= 1``.
    """
    hs = [grid.h_xi] + [grid.h_t] * (grid.n_dims - 1)
    diff = sum(2.0 / h**2 for h in hs) / c_diff
    adv = sum(2.0 * lam / h for lam, h in zip(speeds, hs)) / c_adv
    return SSP_COEFFICIENT / (diff + adv)


class Solver:
    """Owns the work arrays and advances ``(u, X)`` by SSPRK(4,3) steps."""

    def __init__(self, grid: Grid, flux: FluxSpec, profile: ShockProfile, u0: Field,
                 X0: float = 0.0, *, max_shift: Optional[float] = None,
                 growth_tol: float = 1e-8):
        self.grid, self.flux, self.profile = grid, flux, profile
        self.op = Operator(grid, flux, profile)
        self.u = np.array(u0.values, dtype=np.float64, order="C")
        self.X = float(X0)
        self.t = 0.0
        self.step_index = 0
        self.max_shift = 0.5 * grid.L if max_shift is None else max_shift
        self.growth_tol = growth_tol
        self.linf0 = float(np.max(np.abs(self.u)))
        self.linf = self.linf0
        self._r = np.empty_like(self.u)
        self._y = np.empty_like(self.u)
        self._z = np.empty_like(self.u)
        self._rows = self.u.size // grid.n_xi
        self._col = np.empty(grid.n_xi)
        self._mean = torus_mean(self.u)

    def xdot(self, u=None, X=None) -> float:
        u = self.u if u is None else u
        X = self.X if X is None else X
        return self._xdot_mean(torus_mean(u), X)

    def _xdot_mean(self, mean, X) -> float:
        if abs(X) > self.max_shift:
            raise ShiftRangeError(f"|X| = {abs(X):.4g} exceeds the allowed range {self.max_shift:g}")
        return shift_rhs_mean(mean, X, self.grid, self.profile, self.flux)

    def state(self) -> SimState:
        return SimState(Field(self.grid, self.u.copy()), self.t, self.X, self.xdot(), self.step_index)

    def _stage(self, out, y0, y, c0, c1, h) -> np.ndarray:
        """One forward-Euler combination; returns the torus mean of the result."""
        s = self.profile.shock
        m = self.grid.n_xi
        self.op.apply(y, self._r)
        _kernels.stage(out.reshape(-1, m), y0.reshape(-1, m), y.reshape(-1, m),
                       self._r.reshape(-1, m), c0, c1, h, s.u_minus, s.u_plus, self._col)
        mean = self._col / self._rows
        if not np.all(np.isfinite(mean)):
            raise NumericalAbort(f"non-finite values at step {self.step_index + 1}; reduce dt")
        return mean

    def step(self, dt: float) -> None:
        """SSPRK(4,3): four forward-Euler stages of size dt/2, X carried alongside."""
        u, y, z = self.u, self._y, self._z
        h = 0.5 * dt
        X0 = self.X
        k = self._xdot_mean(self._mean, X0)
        mean = self._stage(y, u, u, 0.0, 1.0, h)
        X1 = X0 + h * k
        k = self._xdot_mean(mean, X1)
        mean = self._stage(z, u, y, 0.0, 1.0, h)
        X2 = X1 + h * k
        k = self._xdot_mean(mean, X2)
        mean = self._stage(y, u, z, 2.0 / 3.0, 1.0 / 3.0, h)
        X3 = 2.0 / 3.0 * X0 + 1.0 / 3.0 * (X2 + h * k)
        k = self._xdot_mean(mean, X3)
        self._mean = self._stage(u, u, y, 0.0, 1.0, h)
        self.X = X3 + h * k
        vmax = max(float(u.max()), -float(u.min()))
        if vmax > self.linf * (1.0 + self.growth_tol) + self.growth_tol:
            raise NumericalAbort(
                f"sup norm grew from {self.linf:.12g} to {vmax:.12g} at step "
                f"{self.step_index + 1}; reduce dt")
        self.linf = vmax
        self.t += dt
        self.step_index += 1
        if abs(self.X) > self.max_shift:
            raise ShiftRangeError(f"|X| = {abs(self.X):.4g} exceeds the allowed range {self.max_shift:g}")


def step(state: SimState, dt: float, profile: ShockProfile, flux: FluxSpec,
         grid: Grid) -> SimState:
    """One SSPRK(4,3) step from ``state``; convenience wrapper around :class:`Solver`."""
    s = Solver(grid, flux, profile, state.u, state.X)
    s.t, s.step_index = state.t, state.step_index
    s.linf = float(np.max(np.abs(state.u.values)))
    s.step(dt)
    return s.state()


# time grid -------------------------------------------------------------------

@dataclass(frozen=True)
class TimePlan:
    dt: float
    n_steps: int
    diag_every: int

    @property
    def n_samples(self) -> int:
        return self.n_steps // self.diag_every

    def sample_time(self, k: int) -> float:
        return k * self.diag_every * self.dt


def plan_time(time_cfg, dt_max: float) -> TimePlan:
    """Choose ``dt`` and the sampling stride so that ``t_final`` is hit exactly."""
    tf = time_cfg.t_final
    if time_cfg.dt_policy == "fixed":
        dt = time_cfg.dt
        if dt > dt_max * (1 + 1e-12):
            raise NumericalAbort(f"fixed dt={dt:g} exceeds the stability limit {dt_max:g}")
        n = int(round(tf / dt))
        if abs(n * dt - tf) > 1e-9 * tf:
            raise DynamicsError(f"t_final={tf:g} is not a multiple of dt={dt:g}")
        every = time_cfg.diag_every or max(1, int(round(time_cfg.diag_dt / dt)))
        if n % every:
            raise DynamicsError(f"{n} steps is not a multiple of diag_every={every}")
        return TimePlan(tf / n, n, every)
    if time_cfg.diag_every:
        every = time_cfg.diag_every
        n = math.ceil(tf / dt_max)
        n = every * math.ceil(n / every)
        return TimePlan(tf / n, n, every)
    n_samples = max(1, int(round(tf / time_cfg.diag_dt)))
    every = math.ceil((tf / n_samples) / dt_max)
    n = every * n_samples
    return TimePlan(tf / n, n, every)


# run ---------------------------------------------------------------------------

@dataclass
class RunResult:
    status: str
    records: list
    constants: object
    plan: TimePlan
    final: Optional[SimState] = None
    out_dir: Optional[Path] = None
    message: str = ""
    tol_residual: float = 0.0
    fields: list = field(default_factory=list)
    summary: Optional[dict] = None
    grid: Optional[Grid] = None

    @property
    def ok(self) -> bool:
        return self.status == "completed"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def default_out_dir(config) -> Path:
    """``$VISCSHOCK_OUT/<name>``, falling back to ``./runs/<name>``."""
    return Path(os.environ.get("VISCSHOCK_OUT", "runs")) / config.name


def run(config, out_dir: str | Path | None = None, *, allow_inadmissible: bool = False,
        keep_fields: bool = False, write: bool = True,
        progress: Optional[Callable[[object], None]] = None) -> RunResult:
    """Evolve from the configured data to ``t_final``, sampling diagnostics.

    Outputs (when ``write``) go to ``out_dir``: ``manifest.json``,
    ``diagnostics.csv`` (flushed row by row so aborted runs keep their
    prefix), ``snapshots/``, the profile tables and ``summary.json``.
    ``keep_fields`` additionally keeps every sampled field in memory, which
    the paired L1 check uses.
    """
    from . import diagnostics as dg
    from .inequalities import gn_constant_estimate
    from .profile import beta_constants, solve_profile, write_profile_csv, \
        profile_l2_of_derivative

    flux = config.build_flux()
    shock = config.build_shock(flux)
    grid = config.build_grid()
    report = check_admissibility(flux, shock)
    if not report.lax:
        raise dg.AdmissibilityError("; ".join(report.messages()), report)
    if not report.admissible and not allow_inadmissible:
        raise dg.AdmissibilityError("; ".join(report.messages()), report)
    profile = solve_profile(flux, shock, tol=config.profile_tol,
                            require_admissible=not allow_inadmissible)
    init = InitialData.from_config(config.initial)
    init.check_margin(grid, config.time.t_final, profile, config.tolerances.tail_tol)
    u0 = init.generate(grid, profile)

    solver = Solver(grid, flux, profile, u0, growth_tol=config.tolerances.cfl_growth)
    speeds = solver.op.max_speeds(min(shock.u_plus, float(u0.values.min())),
                                  max(shock.u_minus, float(u0.values.max())))
    dt_max = stable_dt(grid, speeds, config.time.c_diff, config.time.c_adv)
    plan = plan_time(config.time, dt_max)

    du_norm = profile_l2_of_derivative(profile)
    constants = dg.Constants.build(flux, shock, u0, profile, beta_constants(profile), du_norm,
                                   allow_nonpositive=allow_inadmissible)
    tol_res = config.tolerances.tol_residual
    if tol_res is None:
        tol_res = dg.default_tol_residual(grid, plan.dt, constants.l2_0 ** 2)

    gn_const = gn_constant_estimate()
    out = None
    writer = None
    if write:
        out = default_out_dir(config) if out_dir is None else Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_profile_csv(profile, out)
        manifest = {
            "config": config.echo(),
            "grid": grid.metadata(),
            "admissibility": report.as_dict(),
            "shock": {"u_minus": shock.u_minus, "u_plus": shock.u_plus,
                      "eps": shock.eps, "sigma": shock.sigma},
            "profile": {"closed_form": profile.closed_form, "nodes": len(profile.xi),
                        "du_l2": du_norm, "ode_residual": profile.ode_residual()},
            "constants": constants.as_dict(),
            "time": {"dt": plan.dt, "dt_max": dt_max, "n_steps": plan.n_steps,
                     "diag_every": plan.diag_every, "integrator": "SSPRK(4,3)",
                     "max_speeds": speeds},
            "tol_residual": tol_res,
            "gn_constant": gn_const,
            "status": "running",
        }
        (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2))
        writer = dg.DiagnosticsWriter(out / "diagnostics.csv")

    snap_times = sorted(config.output.snapshot_times)
    snap_done = set()

    def maybe_snapshot(state: SimState, force: bool = False):
        if out is None:
            return
        due = [ts for ts in snap_times if ts not in snap_done and state.t >= ts - 0.5 * plan.dt]
        if due or force:
            for ts in due:
                snap_done.add(ts)
            write_snapshot(out / "snapshots" / f"u_t{state.t:012.6f}", state.u,
                           {"t": state.t, "X": state.X, "Xdot": state.Xdot,
                            "step_index": state.step_index})

    records: list = []
    fields: list = []
    meas = dg.Measurer(grid, profile, flux)
    state = solver.state()
    rec = meas.record(state, grad_avg=None, prev=None, alpha=constants.alpha)
    records.append(rec)
    if writer:
        writer.write(rec)
    if keep_fields:
        fields.append(state.u.values.copy())
    maybe_snapshot(state, force=True)

    sub = max(1, plan.diag_every // config.time.quad_points)
    status, message = "completed", ""
    t_wall = time.perf_counter()
    try:
        for k in range(1, plan.n_samples + 1):
            ts = [solver.t]
            gs = [meas.grad_sq(solver.u, solver.X)]
            for j in range(1, plan.diag_every + 1):
                solver.step(plan.dt)
                if j % sub == 0 or j == plan.diag_every:
                    ts.append(solver.t)
                    gs.append(meas.grad_sq(solver.u, solver.X))
            # pin the clock to the exact sample time to avoid drift from summation
            solver.t = plan.sample_time(k)
            ts[-1] = solver.t
            g_avg = float(np.trapezoid(gs, ts) / (ts[-1] - ts[0]))
            state = solver.state()
            rec = meas.record(state, grad_avg=g_avg, prev=records[-1], alpha=constants.alpha)
            records.append(rec)
            if writer:
                writer.write(rec)
            if keep_fields:
                fields.append(state.u.values.copy())
            maybe_snapshot(state)
            if progress:
                progress(rec)
    except (NumericalAbort, ShiftRangeError) as exc:
        status, message = "aborted", str(exc)
        log.error("run aborted: %s", exc)
    except OSError as exc:
        status, message = "aborted", f"disk error: {exc}"
        log.error("run aborted: %s", message)
    finally:
        if writer:
            writer.close()
    wall = time.perf_counter() - t_wall

    final = solver.state() if status == "completed" else None
    if final is not None:
        maybe_snapshot(final, force=True)
    result = RunResult(status, records, constants, plan, final, out, message, tol_res, fields,
                       grid=grid)
    summary = dg.build_summary(records, constants, tol_res, config.fit.t_min,
                               status=status, message=message,
                               disabled=config.checks.disable,
                               tolerances=config.tolerances, gn_constant=gn_const)
    result.summary = summary
    if out is not None:
        manifest["status"] = status
        manifest["message"] = message
        manifest["wall_seconds"] = wall
        (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2))
        dg.write_summary(out, summary)
        dg.write_plot_data(out, records)
    return result


__all__ = [
    "SimState", "InitialData", "Solver", "Operator", "RunResult", "TimePlan",
    "DynamicsError", "NumericalAbort", "ShiftRangeError", "InitialDataError",
    "shift_rhs", "shift_rhs_array", "step", "run", "stable_dt", "plan_time",
    "smooth_bump", "plateau", "torus_mean",
]
