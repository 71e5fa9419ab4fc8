"""Viscous shock profiles.

The profile solves the first-order ODE ``u' = f1(u) - f1(u-) - sigma (u - u-)``
with ``u(center) = (u- + u+)/2``. For ``g == 0`` the tanh closed form is used;
otherwise the ODE is integrated outward from the center with DOP853 in the
deviation variables ``u- - u`` and ``u - u+``, which keeps relative accuracy in
the exponentially flat tails.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .flux import FluxSpec, ShockData, check_admissibility, verify_g2_bound


class ProfileError(ValueError):
    pass


class ProfileWidthError(ProfileError):
    """The tabulation is too narrow for the profile to settle to ``u+-``."""


def _fritsch_carlson(x, y, dy):
    """Clip Hermite slopes so every cubic piece stays monotone."""
    dy = dy.copy()
    secant = np.diff(y) / np.diff(x)
    for k, s in enumerate(secant):
        if s == 0.0:
            dy[k] = dy[k + 1] = 0.0
            continue
        al, be = dy[k] / s, dy[k + 1] / s
        r = al * al + be * be
        if r > 9.0:
            tau = 3.0 / math.sqrt(r)
            dy[k] = tau * al * s
            dy[k + 1] = tau * be * s
    return dy


@dataclass(frozen=True, eq=False)
class ShockProfile:
    """Tabulated shock profile with evaluators on all of the real line.

    Outside the tabulation the profile continues with its linearized
    exponential tails, so the evaluators stay strictly monotone everywhere.
    """

    flux: FluxSpec
    shock: ShockData
    xi: np.ndarray
    u: np.ndarray
    du: np.ndarray
    closed_form: bool
    center: float = 0.0
    _spline: CubicHermiteSpline | None = field(default=None, repr=False)

    @property
    def tail_rates(self) -> tuple[float, float]:
        """Exponential rates ``f1'(u-) - sigma > 0`` and ``f1'(u+) - sigma < 0``."""
        s = self.shock
        return (float(self.flux.df1(s.u_minus) - s.sigma),
                float(self.flux.df1(s.u_plus) - s.sigma))

    def ode_rhs(self, u):
        """First-integral right-hand side, split at the midpoint for accuracy."""
        s, f = self.shock, self.flux
        u = np.asarray(u, dtype=float)
        right = f.f1(u) - f.f1(s.u_plus) - s.sigma * (u - s.u_plus)
        left = f.f1(u) - f.f1(s.u_minus) - s.sigma * (u - s.u_minus)
        return np.where(u < s.midpoint, right, left)

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        s = self.shock
        if self.closed_form:
            k = 0.5 * self.flux.a * s.eps
            return s.midpoint - 0.5 * s.eps * np.tanh(k * (xi - self.center))
        shape = xi.shape
        xi = np.atleast_1d(xi)
        out = np.empty_like(xi)
        lo, hi = self.xi[0], self.xi[-1]
        inside = (xi >= lo) & (xi <= hi)
        out[inside] = self._spline(xi[inside])
        lam_m, lam_p = self.tail_rates
        left = xi < lo
        out[left] = s.u_minus - (s.u_minus - self.u[0]) * np.exp(lam_m * (xi[left] - lo))
        right = xi > hi
        out[right] = s.u_plus + (self.u[-1] - s.u_plus) * np.exp(lam_p * (xi[right] - hi))
        return out.reshape(shape)

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.closed_form:
            s = self.shock
            k = 0.5 * self.flux.a * s.eps
            return -0.5 * s.eps * k / np.cosh(k * (xi - self.center)) ** 2
        return self.ode_rhs(self.value(xi))

    def second_derivative(self, xi):
        u = self.value(xi)
        return (self.flux.df1(u) - self.shock.sigma) * self.derivative(xi)

    def ode_residual(self, xi=None) -> float:
        """Max of ``|u' - F(u)|`` with ``u'`` taken from the evaluator itself.

        At nodes and cell midpoints of the tabulation by default. For the
        interpolated profile the derivative comes from the Hermite spline, so
        the midpoint values measure the actual interpolation consistency.
        """
        if xi is None:
            mids = 0.5 * (self.xi[1:] + self.xi[:-1])
            xi = np.concatenate([self.xi, mids])
        xi = np.asarray(xi, dtype=float)
        if self.closed_form:
            d = self.derivative(xi)
        else:
            d = self._spline(xi, 1)
        return float(np.max(np.abs(d - self.ode_rhs(self.value(xi)))))


def default_half_width(flux: FluxSpec, shock: ShockData, tol: float) -> float:
    """Width after which the slower exponential tail is below ``tol * eps``, with headroom."""
    rate = min(abs(float(flux.df1(u) - shock.sigma)) for u in (shock.u_minus, shock.u_plus))
    return (math.log(1.0 / tol) + 3.0) / rate


def solve_profile(flux: FluxSpec, shock: ShockData, tol: float = 1e-10,
                  half_width: float | None = None, *, center: float = 0.0,
                  spacing: float | None = None, numeric: bool | None = None,
                  require_admissible: bool = True) -> ShockProfile:
    """Build the profile connecting ``u-`` to ``u+``.

    ``numeric=True`` forces ODE integration even when ``g == 0`` (used to
    cross-check the integrator against the closed form).
    """
    report = check_admissibility(flux, shock)
    if not report.lax:
        raise ProfileError("Lax condition violated: need u_minus > u_plus")
    if require_admissible and not report.admissible:
        raise ProfileError("; ".join(report.messages()))
    verify_g2_bound(flux, shock)
    if half_width is None:
        half_width = default_half_width(flux, shock, tol)
    if spacing is None:
        spacing = 0.02 / (flux.a * shock.eps)
    m = int(math.ceil(half_width / spacing))
    xi = center + spacing * np.arange(-m, m + 1)
    closed = flux.is_burgers if numeric is None else not numeric

    if closed:
        k = 0.5 * flux.a * shock.eps
        u = shock.midpoint - 0.5 * shock.eps * np.tanh(k * (xi - center))
        du = -0.5 * shock.eps * k / np.cosh(k * (xi - center)) ** 2
        edge_dev = 0.5 * shock.eps * (1.0 - math.tanh(k * half_width))
        prof = ShockProfile(flux, shock, xi, u, du, True, center)
    else:
        u = _integrate(flux, shock, spacing, m, tol)
        # past the point where u -/+ u± is lost to rounding the exponential tails take over
        floor = 1e3 * np.spacing(max(abs(shock.u_minus), abs(shock.u_plus), shock.eps))
        keep = (shock.u_minus - u > floor) & (u - shock.u_plus > floor)
        xi, u = xi[keep], u[keep]
        prof = ShockProfile(flux, shock, xi, u, np.zeros_like(u), False, center)
        du = prof.ode_rhs(u)
        if np.any(du >= 0.0):
            raise ProfileError("profile lost strict monotonicity; refine tolerance")
        spline = CubicHermiteSpline(xi, u, _fritsch_carlson(xi, u, du))
        prof = ShockProfile(flux, shock, xi, u, du, False, center, spline)
        edge_dev = max(shock.u_minus - u[0], u[-1] - shock.u_plus)
    if edge_dev >= tol * shock.eps:
        raise ProfileWidthError(
            f"half_width={half_width:g} too small: profile is still {edge_dev:.3e} "
            f"away from the end states (need < {tol * shock.eps:.3e})")
    return prof


def _integrate(flux, shock, spacing, m, tol):
    um, up, sig = shock.u_minus, shock.u_plus, shock.sigma
    s_nodes = spacing * np.arange(m + 1)
    atol = tol * shock.eps * 1e-6
    rtol = min(1e-12, tol * 1e-2)

    def right(_, d):  # d = u - u+
        v = up + d
        return flux.f1(v) - flux.f1(up) - sig * d

    def left(_, e):  # e = u- - u at xi = center - s
        v = um - e
        return flux.f1(v) - flux.f1(um) + sig * e

    kw = dict(method="DOP853", t_eval=s_nodes, rtol=rtol, atol=atol)
    r = solve_ivp(right, (0.0, s_nodes[-1]), [0.5 * shock.eps], **kw)
    l = solve_ivp(left, (0.0, s_nodes[-1]), [0.5 * shock.eps], **kw)
    if not (r.success and l.success):
        raise ProfileError(f"profile integration failed: {r.message} / {l.message}")
    u_right = up + r.y[0]
    u_left = um - l.y[0][::-1]
    return np.concatenate([u_left[:-1], u_right])


def _trapezoid(y, h):
    return h * (np.sum(y) - 0.5 * (y[0] + y[-1]))


def profile_l2_of_derivative(p: ShockProfile, refine: int = 1) -> float:
    """``||u'||_{L^2(R)}`` by trapezoid on the tabulation plus analytic tails."""
    h = (p.xi[1] - p.xi[0]) / refine
    n = (len(p.xi) - 1) * refine + 1
    x = p.xi[0] + h * np.arange(n)
    du = p.derivative(x)
    lam_m, lam_p = p.tail_rates
    tails = 0.5 * du[0] ** 2 / lam_m + 0.5 * du[-1] ** 2 / abs(lam_p)
    return math.sqrt(_trapezoid(du * du, h) + tails)


@dataclass(frozen=True)
class BetaConstants:
    beta1: float
    beta2: float

    @property
    def beta(self) -> float:
        return min(self.beta1, self.beta2)


def beta_constants(p: ShockProfile) -> BetaConstants:
    """The two unit-window overlap integrals of ``u'`` that bound the shift.

    The inner integral over the window is done exactly
    (``int_{x-1}^{x} u' = u(x) - u(x-1)``), leaving a 1D trapezoid.
    """
    x, h = p.xi, p.xi[1] - p.xi[0]
    du = p.derivative(x)
    ux = p.value(x)
    b1 = 2.0 * _trapezoid(du * (ux - p.value(x - 1.0)), h)
    b2 = 2.0 * _trapezoid(du * (p.value(x + 1.0) - ux), h)
    if not (b1 > 0 and b2 > 0):
        raise ProfileError(f"nonpositive beta constants ({b1:g}, {b2:g}); widen the profile")
    return BetaConstants(float(b1), float(b2))


def write_profile_csv(p: ShockProfile, directory: str | Path) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = (directory / "profile_u.csv", directory / "profile_du.csv")
    for path, col, values in zip(paths, ("u", "du"), (p.u, p.du)):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", col])
            for a, b in zip(p.xi, values):
                w.writerow([repr(float(a)), repr(float(b))])
    return paths
