"""Monitored functionals, constants and the runtime checks built on them."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .flux import AdmissibilityReport, FluxSpec, ShockData
from .grid import Field, Grid, gradient_sq_array, integrate_array
from .profile import BetaConstants, ShockProfile

NOISE_FLOOR = 1e-10
ENVELOPE_SLACK = 1.05


class DiagnosticsError(ValueError):
    pass


class AdmissibilityError(ValueError):
    def __init__(self, message: str, report: AdmissibilityReport | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class DiagRecord:
    t: float
    X: float
    Xdot: float
    l2_dist: float
    l2_dist_unshifted: float
    l1_dist: float
    l1_dist_unshifted: float
    grad_sq: float
    grad_sq_avg: float
    dissipation_residual: float
    linf: float
    mass: float
    tail_mass: float
    step: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise DiagnosticsError(f"non-finite diagnostic {f.name} = {v}")


COLUMNS = [f.name for f in fields(DiagRecord)]


def column_schema() -> dict:
    text = resources.files("viscshock").joinpath("schemas/diagnostics_columns.json").read_text()
    return json.loads(text)


# constants ---------------------------------------------------------------------

def compute_alpha(flux: FluxSpec, eps: float) -> float:
    """The dissipation constant: min of the flux-curvature and the strength terms."""
    a, g2 = flux.a, flux.g2_bound
    if g2 >= 2.0 * a:
        raise DiagnosticsError(f"g2_bound={g2:g} >= 2a={2 * a:g}: alpha is undefined")
    gain = 2.0 * a + g2
    first = 2.0 - gain / (2.0 * a - g2)
    second = 2.0 * (1.0 - gain**2 * eps**2 / (64.0 * math.pi**2))
    return min(first, second)


def perturbation_norms(u0: Field, profile: ShockProfile, X: float = 0.0) -> tuple[float, float]:
    """``(||u0 - profile(. - X)||_L2, ||u0 - profile(. - X)||_L1)``."""
    g = u0.grid
    d = u0.values - profile.value(g.xi - X)
    return math.sqrt(integrate_array(g, d * d)), integrate_array(g, np.abs(d))


def compute_C0(u0: Field, profile: ShockProfile) -> float:
    l2, l1 = perturbation_norms(u0, profile)
    return 1.0 + l2 * l2 + l1


@dataclass(frozen=True)
class Constants:
    alpha: float
    C0: float
    beta: float
    beta1: float
    beta2: float
    eps: float
    a: float
    g2_bound: float
    du_l2: float
    l2_0: float
    l1_0: float
    linf_0: float
    mass_0: float
    n_dims: int

    @property
    def gain(self) -> float:
        """``(2a + g2)/(2 eps)``, the shift-ODE coefficient."""
        return (2.0 * self.a + self.g2_bound) / (2.0 * self.eps)

    @property
    def x_bound(self) -> float:
        return (self.l2_0**2 + 4.0 * self.eps * self.l1_0) / self.beta + 1.0

    @classmethod
    def build(cls, flux: FluxSpec, shock: ShockData, u0: Field, profile: ShockProfile,
              betas: BetaConstants, du_l2: float, *, allow_nonpositive: bool = False) -> "Constants":
        alpha = compute_alpha(flux, shock.eps)
        if alpha <= 0 and not allow_nonpositive:
            raise DiagnosticsError(f"alpha = {alpha:g} is not positive")
        l2, l1 = perturbation_norms(u0, profile)
        g = u0.grid
        mass0 = integrate_array(g, u0.values - profile.value(g.xi))
        return cls(alpha=alpha, C0=1.0 + l2 * l2 + l1, beta=betas.beta, beta1=betas.beta1,
                   beta2=betas.beta2, eps=shock.eps, a=flux.a, g2_bound=flux.g2_bound,
                   du_l2=du_l2, l2_0=l2, l1_0=l1,
                   linf_0=float(np.max(np.abs(u0.values))), mass_0=mass0, n_dims=g.n_dims)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["x_bound"] = self.x_bound
        d["gain"] = self.gain
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Constants":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def default_tol_residual(grid: Grid, dt: float, energy: float) -> float:
    """``10 (h^2 + dt^2)`` times the initial energy scale."""
    h = max(grid.h_xi, grid.h_t)
    return 10.0 * (h * h + dt * dt) * max(energy, 1e-12)


# measurement -------------------------------------------------------------------

class Measurer:
    """Evaluates the DiagRecord functionals of a state on a fixed grid."""

    def __init__(self, grid: Grid, profile: ShockProfile, flux: FluxSpec):
        self.grid, self.profile, self.flux = grid, profile, flux
        self.base = profile.value(grid.xi)
        tail = np.abs(grid.xi) >= 0.9 * grid.L
        self.tail_w = np.where(tail, grid.xi_weights, 0.0)

    def grad_sq(self, u: np.ndarray, X: float) -> float:
        return gradient_sq_array(self.grid, u - self.profile.value(self.grid.xi - X))

    def record(self, state, grad_avg: Optional[float], prev: Optional[DiagRecord],
               alpha: float) -> DiagRecord:
        g = self.grid
        u = state.u.values
        d = u - self.profile.value(g.xi - state.X)
        d0 = u - self.base
        l2_sq = integrate_array(g, d * d)
        gs = gradient_sq_array(g, d)
        if grad_avg is None:
            grad_avg = gs
        resid = 0.0 if prev is None else dissipation_residual_values(
            prev.l2_dist, prev.t, math.sqrt(l2_sq), state.t, grad_avg, alpha)
        a0 = np.abs(d0)
        return DiagRecord(
            t=float(state.t), X=float(state.X), Xdot=float(state.Xdot),
            l2_dist=math.sqrt(l2_sq),
            l2_dist_unshifted=math.sqrt(integrate_array(g, d0 * d0)),
            l1_dist=integrate_array(g, np.abs(d)),
            l1_dist_unshifted=integrate_array(g, a0),
            grad_sq=gs, grad_sq_avg=float(grad_avg), dissipation_residual=resid,
            linf=float(np.max(np.abs(u))), mass=integrate_array(g, d0),
            tail_mass=float(np.sum(a0 @ self.tail_w) * g.torus_cell),
            step=int(state.step_index))


def measure(state, profile: ShockProfile, flux: FluxSpec, alpha: float = 1.0,
            prev: Optional[DiagRecord] = None, grad_avg: Optional[float] = None) -> DiagRecord:
    return Measurer(state.u.grid, profile, flux).record(state, grad_avg, prev, alpha)


def dissipation_residual_values(l2_prev, t_prev, l2, t, grad_avg, alpha) -> float:
    return (l2 * l2 - l2_prev * l2_prev) / (t - t_prev) + alpha * grad_avg


def dissipation_residual(rec_prev: DiagRecord, rec: DiagRecord, alpha: float) -> float:
    """Finite-difference ``d/dt ||u^X - profile||^2 + alpha ||grad||^2`` over one interval.

    Uses the time-averaged gradient energy of ``rec`` over the interval,
    which is what the difference quotient actually balances.
    """
    return dissipation_residual_values(rec_prev.l2_dist, rec_prev.t, rec.l2_dist, rec.t,
                                       rec.grad_sq_avg, alpha)


# checks ------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    envelope_ok: bool
    inconclusive: bool
    K: float
    max_ratio: float
    n_points: int
    t_min: float

    def as_dict(self) -> dict:
        return asdict(self)


def fit_decay(t: Sequence[float], y: Sequence[float], t_min: float,
              slack: float = ENVELOPE_SLACK, floor: float = NOISE_FLOOR) -> FitResult:
    """Log-log least-squares slope on ``t >= t_min`` and the ``t^(-1/4)`` envelope test.

    ``K = t_min^(1/4) y(t_min)`` (first sample at or after ``t_min``); the
    envelope holds iff ``t^(1/4) y(t) <= slack * K`` on the window. Fewer than
    a decade of time or values under the noise floor make the result
    inconclusive, which is reported rather than raised.
    """
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    m = t >= t_min * (1 - 1e-12)
    t, y = t[m], y[m]
    if len(t) == 0:
        return FitResult(math.nan, True, True, math.nan, math.nan, 0, t_min)
    K = t[0] ** 0.25 * y[0]
    ratio = t**0.25 * y / K if K > 0 else np.zeros_like(y)
    max_ratio = float(np.max(ratio))
    envelope_ok = bool(max_ratio <= slack)
    good = y > floor
    inconclusive = bool(good.sum() < 3 or t[good][-1] < 10.0 * t[good][0] * (1 - 1e-9))
    if good.sum() >= 2:
        slope = float(np.polyfit(np.log(t[good]), np.log(y[good]), 1)[0])
    else:
        slope = math.nan
    return FitResult(slope, envelope_ok, inconclusive, float(K), max_ratio, int(good.sum()), t_min)


def _status(ok: bool, inconclusive: bool = False) -> str:
    if inconclusive:
        return "inconclusive"
    return "pass" if ok else "fail"


def _arrays(series: Sequence[DiagRecord]) -> dict:
    return {c: np.array([getattr(r, c) for r in series], dtype=float) for c in COLUMNS}


def contraction_check(series, tol_residual: float) -> dict:
    a = _arrays(series)
    dl = np.diff(a["l2_dist"])
    dt = np.diff(a["t"])
    excess = dl - tol_residual * dt
    worst = float(np.max(excess)) if len(excess) else -math.inf
    bound_ok = bool(np.all(a["l2_dist"] <= a["l2_dist"][0] + tol_residual))
    return {"status": _status(worst <= 0.0 and bound_ok),
            "max_increment": float(np.max(dl)) if len(dl) else 0.0,
            "max_excess_over_tolerance": worst, "bounded_by_initial": bound_ok}


def dissipation_check(series, tol_residual: float) -> dict:
    r = _arrays(series)["dissipation_residual"][1:]
    worst = float(np.max(r)) if len(r) else 0.0
    return {"status": _status(worst <= tol_residual), "max_residual": worst,
            "max_positive_excursion": max(worst, 0.0), "tol_residual": tol_residual}


def decay_check(series, t_min: float) -> dict:
    a = _arrays(series)
    fit = fit_decay(a["t"], a["l2_dist"], t_min)
    ok = fit.envelope_ok and (fit.slope <= -0.25 + 0.05 or fit.inconclusive)
    return {"status": _status(ok, fit.inconclusive and fit.envelope_ok), **fit.as_dict()}


def xdot_decay_check(series, constants: Constants, t_min: float = 1.0,
                     rel_tol: float = 1e-12) -> dict:
    a = _arrays(series)
    bound = constants.gain * a["l2_dist"] * constants.du_l2
    excess = np.abs(a["Xdot"]) - bound * (1.0 + rel_tol)
    cs_ok = bool(np.all(excess <= 0.0))
    fit = fit_decay(a["t"], a["Xdot"], t_min)
    slope_ok = fit.inconclusive or fit.slope <= -0.25 + 0.05
    return {"status": _status(cs_ok and slope_ok),
            "cauchy_schwarz_ok": cs_ok,
            "max_ratio_to_bound": float(np.max(np.abs(a["Xdot"]) / np.maximum(bound, 1e-300))),
            "slope": fit.slope, "slope_inconclusive": fit.inconclusive,
            "envelope_max_ratio": fit.max_ratio}


def l1_bound_check(series, constants: Constants, rel_tol: float = 1e-9) -> dict:
    a = _arrays(series)
    l1_ok = bool(np.all(a["l1_dist_unshifted"] <= constants.l1_0 * (1 + rel_tol) + 1e-14))
    xb = constants.x_bound
    x_ok = bool(np.all(np.abs(a["X"]) <= xb))
    return {"status": _status(l1_ok and x_ok),
            "l1_unshifted_ok": l1_ok,
            "l1_unshifted_margin": float(constants.l1_0 - np.max(a["l1_dist_unshifted"])),
            "x_bound": xb, "x_bound_ok": x_ok,
            "x_bound_margin": float(xb - np.max(np.abs(a["X"]))),
            # the constant in front of C0 is not specified; report the ratio only
            "l1_shifted_over_C0_max": float(np.max(a["l1_dist"]) / constants.C0)}


def sublinear_shift_check(series, t_min: float = 1.0, slack: float = ENVELOPE_SLACK) -> dict:
    a = _arrays(series)
    t, X, V = a["t"], a["X"], np.abs(a["Xdot"])
    m = t >= t_min * (1 - 1e-12)
    if m.sum() < 2:
        return {"status": "inconclusive", "K": math.nan, "margin": math.nan}
    t, X, V = t[m], X[m], V[m]
    K = 4.0 / 3.0 * slack * float(np.max(t**0.25 * V))
    allowed = abs(X[0]) + K * (t**0.75 - t[0] ** 0.75)
    # the anchor sample satisfies the bound with equality, so skip it
    margin = float(np.min(allowed[1:] - np.abs(X[1:])))
    return {"status": _status(margin >= -1e-12), "K": K, "margin": margin}


def conservation_check(series, constants: Constants, rel: float = 1e-8) -> dict:
    a = _arrays(series)
    drift = float(np.max(np.abs(a["mass"] - a["mass"][0])))
    tol = rel * constants.l2_0**2 + 1e-12
    return {"status": _status(drift <= tol), "max_mass_drift": drift, "tolerance": tol}


def max_principle_check(series, constants: Constants, tol: float = 1e-10) -> dict:
    a = _arrays(series)
    excess = float(np.max(a["linf"]) - constants.linf_0)
    return {"status": _status(excess <= tol), "max_excess": excess, "tolerance": tol}


def tail_check(series, tail_tol: float) -> dict:
    worst = float(np.max(_arrays(series)["tail_mass"]))
    return {"status": _status(worst <= tail_tol), "max_tail_mass": worst, "tail_tol": tail_tol}


def gn_ratio_report(series, constants: Constants, gn_constant: float, t_min: float) -> dict:
    """Dimensionless decay ratio using the empirical slab-interpolation constant.

    Values at most 1 mean the measured distance sits under the
    quantitative decay bound with the empirical constant in place of the
    unspecified one. Flagged empirical.
    """
    a = _arrays(series)
    m = a["t"] >= t_min
    n = constants.n_dims
    e0 = constants.l2_0
    if e0 == 0 or not np.any(m):
        return {"empirical": True, "max_ratio": 0.0, "gn_constant": gn_constant}
    cc = gn_constant * constants.C0 * n**1.5
    ratio = a["l2_dist"][m] * ((2 * constants.alpha) ** 0.25 * a["t"][m] ** 0.25 * e0 + cc) \
        / (2.0 * cc * e0)
    return {"empirical": True, "max_ratio": float(np.max(ratio)), "gn_constant": gn_constant}


CHECK_NAMES = ("contraction", "dissipation", "decay", "xdot", "l1_bound", "sublinear_shift",
               "conservation", "max_principle", "tail")


def _round_sig(x, digits: int = 8):
    if isinstance(x, dict):
        return {k: _round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round_sig(v, digits) for v in x]
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return float(f"{x:.{digits - 1}e}")


def build_summary(series: Sequence[DiagRecord], constants: Constants, tol_residual: float,
                  t_min: float = 1.0, *, status: str = "completed", message: str = "",
                  disabled: Iterable[str] = (), tolerances=None,
                  gn_constant: Optional[float] = None) -> dict:
    """All runtime checks on a series; floats rounded to 8 significant digits."""
    tol = tolerances
    tail_tol = getattr(tol, "tail_tol", 1e-6)
    disabled = set(disabled)
    checks = {
        "contraction": contraction_check(series, tol_residual),
        "dissipation": dissipation_check(series, tol_residual),
        "decay": decay_check(series, t_min),
        "xdot": xdot_decay_check(series, constants, t_min,
                                 getattr(tol, "cauchy_schwarz_rel", 1e-12)),
        "l1_bound": l1_bound_check(series, constants, getattr(tol, "l1_rel", 1e-9)),
        "sublinear_shift": sublinear_shift_check(series, t_min),
        "conservation": conservation_check(series, constants,
                                           getattr(tol, "conservation_rel", 1e-8)),
        "max_principle": max_principle_check(series, constants,
                                             getattr(tol, "max_principle", 1e-10)),
        "tail": tail_check(series, tail_tol),
    }
    for name in disabled:
        if name in checks:
            checks[name]["status"] = "disabled"
    failing = sorted(k for k, v in checks.items() if v["status"] == "fail")
    last = series[-1]
    summary = {
        "status": status,
        "message": message,
        "n_samples": len(series),
        "t_final": last.t,
        "t_min": t_min,
        "final": {"l2_dist": last.l2_dist, "X": last.X, "Xdot": last.Xdot},
        "constants": constants.as_dict(),
        "tol_residual": tol_residual,
        "checks": checks,
        "failing": failing,
        "all_pass": status == "completed" and not failing,
    }
    if gn_constant is not None:
        summary["gn_ratio"] = gn_ratio_report(series, constants, gn_constant, t_min)
    return _round_sig(summary)


def summary_hash(summary: dict) -> str:
    text = json.dumps(summary, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# persistence -------------------------------------------------------------------

class DiagnosticsWriter:
    """Row-at-a-time CSV writer that flushes so aborted runs keep their prefix."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(COLUMNS)
        self._fh.flush()

    def write(self, rec: DiagRecord) -> None:
        self._w.writerow([repr(v) if isinstance(v, float) else v
                          for v in (getattr(rec, c) for c in COLUMNS)])
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path: str | Path, series: Sequence[DiagRecord]) -> None:
    with DiagnosticsWriter(path) as w:
        for r in series:
            w.write(r)


def read_csv(path: str | Path) -> list[DiagRecord]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DiagnosticsError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DiagnosticsError(f"{path} has no data rows")
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(DiagRecord(**{c: (int(row[c]) if c == "step" else float(row[c]))
                                     for c in COLUMNS}))
        except (KeyError, TypeError, ValueError) as exc:
            raise DiagnosticsError(f"{path}: bad row {i + 2}: {exc}") from exc
    ts = [r.t for r in out]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise DiagnosticsError(f"{path}: times are not strictly increasing")
    return out


def write_summary(directory: str | Path, summary: dict) -> Path:
    p = Path(directory) / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return p


def write_plot_data(directory: str | Path, series: Sequence[DiagRecord]) -> None:
    """Plain CSV pairs for plotting: linear and log-log distance and shift velocity."""
    d = Path(directory)
    with open(d / "plot_l2.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "l2_dist", "log_t", "log_l2_dist", "t_quarter_l2"])
        for r in series:
            if r.t > 0 and r.l2_dist > 0:
                w.writerow([repr(r.t), repr(r.l2_dist), repr(math.log(r.t)),
                            repr(math.log(r.l2_dist)), repr(r.t**0.25 * r.l2_dist)])
    with open(d / "plot_shift.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "X", "abs_Xdot", "log_t", "log_abs_Xdot"])
        for r in series:
            if r.t > 0 and r.Xdot != 0:
                w.writerow([repr(r.t), repr(r.X), repr(abs(r.Xdot)), repr(math.log(r.t)),
                            repr(math.log(abs(r.Xdot)))])
