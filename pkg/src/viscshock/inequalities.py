"""Standalone numerical verifiers for the functional inequalities behind the decay proof."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .flux import FluxSpec, ScalarFunction, ShockData, check_admissibility
from .grid import Field, Grid, gradient_sq_integral, integrate
from .profile import ShockProfile, solve_profile


class InequalityError(ValueError):
    pass


# quadrature on [0, 1] ------------------------------------------------------------

def gauss_legendre_panels(panels: int = 64, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class SampledFunction1D:
    """A function on ``[0, 1]`` sampled at quadrature nodes, with its derivative."""

    nodes: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    weights: np.ndarray
    analytic_derivative: bool = True

    def __post_init__(self):
        for name in ("nodes", "values", "derivative", "weights"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise InequalityError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.nodes) <= 0):
            raise InequalityError("nodes must be strictly increasing")
        if not (self.nodes.shape == self.values.shape == self.derivative.shape
                == self.weights.shape):
            raise InequalityError("nodes, values, derivative and weights must align")

    @classmethod
    def from_callable(cls, f: Callable, df: Optional[Callable] = None,
                      panels: int = 64) -> "SampledFunction1D":
        z, w = gauss_legendre_panels(panels)
        if df is None:
            h = 1e-6
            d = (f(z + h) - f(z - h)) / (2 * h)
            return cls(z, f(z), d, w, analytic_derivative=False)
        return cls(z, f(z), df(z), w, analytic_derivative=True)

    @classmethod
    def from_samples(cls, x, y, panels: int = 64) -> "SampledFunction1D":
        """Resample scattered data on ``[0, 1]`` through a cubic spline."""
        spl = CubicSpline(np.asarray(x, float), np.asarray(y, float))
        z, w = gauss_legendre_panels(panels)
        return cls(z, spl(z), spl(z, 1), w, analytic_derivative=False)

    def integral(self, g) -> float:
        return float(np.dot(self.weights, g))


def poincare_weighted_check(f: SampledFunction1D) -> tuple[float, float]:
    """Both sides of ``int |f - mean f|^2 <= (1/2) int z(1-z)|f'|^2`` on ``[0, 1]``."""
    z = f.nodes
    mean = f.integral(f.values)
    lhs = f.integral((f.values - mean) ** 2)
    rhs = 0.5 * f.integral(z * (1.0 - z) * f.derivative**2)
    return lhs, rhs


# slab interpolation inequality ------------------------------------------------------

def gn_theta(k: int) -> float:
    return (k + 1.0) / (k + 3.0)


@dataclass(frozen=True)
class GNResult:
    lhs: float
    rhs: float
    theta_terms: list = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.nan


def gn_slab_check(f: Field) -> GNResult:
    """``||f||_2`` against ``sum_k ||grad f||^theta_k ||f||_1^(1 - theta_k)``, ``k < n``."""
    l2 = math.sqrt(integrate(Field(f.grid, f.values**2)))
    l1 = integrate(Field(f.grid, np.abs(f.values)))
    g = math.sqrt(gradient_sq_integral(f))
    terms = [g ** gn_theta(k) * l1 ** (1.0 - gn_theta(k)) for k in range(f.grid.n_dims)]
    return GNResult(l2, float(sum(terms)), terms)


GN_GRID = Grid(L=40.0, n_xi=1601, n_dims=2, n_t=16)


def gn_corpus(grid: Grid = GN_GRID) -> dict[str, np.ndarray]:
    """Gaussians, compact bumps and modulated bumps at dilations 1/4, 1 and 4."""
    x2, xi = grid.coords()
    out = {}
    for mu in (0.25, 1.0, 4.0):
        s = xi / mu
        gauss = np.exp(-0.5 * s**2) * np.ones_like(x2)
        b = np.zeros_like(s)
        m = np.abs(s / 3.0) < 1
        b[m] = np.exp(1.0 - 1.0 / (1.0 - (s[m] / 3.0) ** 2))
        out[f"gaussian_mu{mu:g}"] = gauss
        out[f"bump_mu{mu:g}"] = b * np.ones_like(x2)
        out[f"modulated_bump_mu{mu:g}"] = b * (1.0 + np.cos(2 * np.pi * x2))
    return {k: np.ascontiguousarray(np.broadcast_to(v, grid.shape)) for k, v in out.items()}


@lru_cache(maxsize=None)
def gn_constant_estimate() -> float:
    """Empirical surrogate for the unspecified interpolation constant: sup of corpus ratios."""
    return max(gn_slab_check(Field(GN_GRID, v)).ratio for v in gn_corpus().values())


# paired runs -----------------------------------------------------------------------

def l1_contraction_paired_check(run_a, run_b, rel_tol: float = 1e-9) -> dict:
    """``||u(t) - v(t)||_L1`` at every shared sample of two runs kept with their fields."""
    if run_a.grid != run_b.grid or run_a.plan != run_b.plan:
        raise InequalityError("paired runs must share grid and time stepping")
    if len(run_a.fields) != len(run_b.fields) or not run_a.fields:
        raise InequalityError("paired runs must keep the same number of sampled fields")
    grid = run_a.grid
    t = [r.t for r in run_a.records]
    d = np.array([integrate(Field(grid, np.abs(u - v))) for u, v in zip(run_a.fields, run_b.fields)])
    scale = max(d[0], 1e-300)
    bounded = bool(np.all(d <= d[0] * (1 + rel_tol) + 1e-14))
    inc = np.diff(d)
    monotone = bool(np.all(inc <= rel_tol * scale + 1e-14))
    return {"lemma": "l1_contraction", "passed": bounded and monotone, "bounded": bounded,
            "monotone": monotone, "t": t, "distance": d.tolist(),
            "max_increment": float(np.max(inc)) if len(inc) else 0.0,
            "initial": float(d[0]), "final": float(d[-1])}


# profile sandwich -------------------------------------------------------------------

def dzdxi_sandwich_check(profile: ShockProfile, flux: FluxSpec, rel_tol: float = 1e-10) -> dict:
    """Two-sided bound of ``dz/dxi = -u'/eps`` by multiples of ``eps z(1-z)``.

    ``z = (u- - u)/eps`` runs from 0 to 1 across the profile. The check is
    flagged degenerate rather than asserted when ``g2_bound >= 2a``.
    """
    eps = profile.shock.eps
    xi = profile.xi
    u = profile.value(xi)
    z = (profile.shock.u_minus - u) / eps
    dz = -profile.derivative(xi) / eps
    base = eps * z * (1.0 - z)
    lo = 0.5 * (2.0 * flux.a - flux.g2_bound) * base
    hi = 0.5 * (2.0 * flux.a + flux.g2_bound) * base
    scale = float(np.max(np.abs(dz)))
    slack = rel_tol * scale
    degenerate = flux.g2_bound >= 2.0 * flux.a
    lower_ok = bool(np.all(dz >= lo - slack))
    upper_ok = bool(np.all(dz <= hi + slack))
    out = {"lemma": "dzdxi_sandwich", "degenerate": degenerate,
           "lower_margin": float(np.min(dz - lo)), "upper_margin": float(np.min(hi - dz)),
           "lhs": float(np.min(dz - lo)), "rhs": float(np.min(hi - dz)),
           "passed": (lower_ok and upper_ok) or degenerate}
    if flux.is_burgers:
        out["identity_error"] = float(np.max(np.abs(dz - flux.a * base)))
        out["passed"] = out["passed"] and out["identity_error"] <= rel_tol
    return out


# suite --------------------------------------------------------------------------------

def _trig_poly(rng: np.random.Generator, degree: int = 6):
    a = rng.normal(size=degree + 1) / (1.0 + np.arange(degree + 1))
    b = rng.normal(size=degree + 1) / (1.0 + np.arange(degree + 1))
    k = 2 * np.pi * np.arange(degree + 1)

    def f(z):
        z = np.asarray(z)[..., None]
        return np.sum(a * np.cos(k * z) + b * np.sin(k * z), axis=-1)

    def df(z):
        z = np.asarray(z)[..., None]
        return np.sum(k * (-a * np.sin(k * z) + b * np.cos(k * z)), axis=-1)

    return f, df


def sandwich_fixtures() -> dict[str, tuple[FluxSpec, ShockData]]:
    fx = {}

    def add(name, flux, um, up):
        fx[name] = (flux, ShockData.from_states(flux, um, up))

    add("burgers_a0.5_eps1", FluxSpec.burgers(0.5), 1.0, 0.0)
    add("burgers_a1_eps2", FluxSpec.burgers(1.0), 1.0, -1.0)
    add("burgers_a0.5_eps5", FluxSpec.burgers(0.5), 2.5, -2.5)
    add("sin_k0.05", FluxSpec(0.5, ScalarFunction((), 0.05), 0.05), 1.0, 0.0)
    add("sin_k0.1_w2", FluxSpec(0.5, ScalarFunction((), 0.025, 2.0), 0.1), 1.0, -0.5)
    add("cubic_c0.01", FluxSpec(0.5, ScalarFunction((0, 0, 0, 0.01)), 0.18), 1.0, 0.0)
    return fx


@dataclass
class LemmaSuiteReport:
    entries: list = field(default_factory=list)

    def add(self, lemma: str, fixture: str, lhs: float, rhs: float, margin: float,
            passed: bool, **extra) -> None:
        self.entries.append({"lemma": lemma, "fixture": fixture, "lhs": float(lhs),
                             "rhs": float(rhs), "margin": float(margin),
                             "passed": bool(passed), **extra})

    @property
    def failures(self) -> list:
        return [e for e in self.entries if not e["passed"]]

    @property
    def passed(self) -> bool:
        return bool(self.entries) and not self.failures

    def as_dict(self) -> dict:
        return {"n_checks": len(self.entries), "n_failed": len(self.failures),
                "passed": self.passed, "entries": self.entries}


LEMMA_GROUPS = ("poincare", "gn", "sandwich")


def run_lemma_suite(n_random: int = 1000, seed: int = 0, *, skip: Iterable[str] = (),
                    inject_broken: bool = False, poincare_tol: float = 1e-8) -> LemmaSuiteReport:
    """Full corpus of lemma fixtures; ``inject_broken`` adds a deliberately failing one."""
    skip = set(skip)
    unknown = skip - set(LEMMA_GROUPS)
    if unknown:
        raise InequalityError(f"unknown lemma groups {sorted(unknown)}")
    rep = LemmaSuiteReport()
    if "poincare" not in skip:
        f = SampledFunction1D.from_callable(lambda z: z, lambda z: np.ones_like(z))
        lhs, rhs = poincare_weighted_check(f)
        ok = abs(lhs - 1 / 12) <= 1e-8 and abs(rhs - 1 / 12) <= 1e-8
        rep.add("poincare", "affine_equality", lhs, rhs, rhs - lhs, ok)
        f = SampledFunction1D.from_callable(lambda z: z**2, lambda z: 2 * z)
        lhs, rhs = poincare_weighted_check(f)
        rep.add("poincare", "square", lhs, rhs, rhs - lhs, rhs - lhs >= -poincare_tol)
        rng = np.random.default_rng(seed)
        worst = math.inf
        for i in range(n_random):
            fn, dfn = _trig_poly(rng)
            lhs, rhs = poincare_weighted_check(SampledFunction1D.from_callable(fn, dfn))
            worst = min(worst, rhs - lhs)
            if rhs - lhs < -poincare_tol:
                rep.add("poincare", f"trig_{i}", lhs, rhs, rhs - lhs, False)
        if n_random:
            rep.add("poincare", f"trig_corpus_{n_random}", math.nan, math.nan, worst,
                    worst >= -poincare_tol)
        if inject_broken:
            f = SampledFunction1D.from_callable(lambda z: z, lambda z: np.ones_like(z))
            lhs, rhs = poincare_weighted_check(f)
            rhs *= 0.5
            rep.add("poincare", "injected_broken_half_rhs", lhs, rhs, rhs - lhs,
                    rhs - lhs >= -poincare_tol)
    if "gn" not in skip:
        corpus = gn_corpus()
        ratios = {}
        for name, v in corpus.items():
            r = gn_slab_check(Field(GN_GRID, v))
            ratios[name] = r.ratio
            drift = max(abs(gn_slab_check(Field(GN_GRID, lam * v)).ratio / r.ratio - 1.0)
                        for lam in (1e-3, 7.3, 1e3))
            ok = math.isfinite(r.ratio) and r.ratio < 10.0 and drift <= 1e-12
            rep.add("gn", name, r.lhs, r.rhs, r.rhs - r.lhs, ok,
                    ratio=r.ratio, scale_drift=drift)
        c = max(ratios.values())
        rep.add("gn", "empirical_constant", c, math.nan, math.nan, math.isfinite(c),
                ratio=c)
    if "sandwich" not in skip:
        for name, (flux, shock) in sandwich_fixtures().items():
            if not check_admissibility(flux, shock).admissible:
                continue
            prof = solve_profile(flux, shock)
            r = dzdxi_sandwich_check(prof, flux)
            rep.add("sandwich", name, r["lower_margin"], r["upper_margin"],
                    min(r["lower_margin"], r["upper_margin"]), r["passed"],
                    identity_error=r.get("identity_error"))
    return rep


__all__ = [
    "SampledFunction1D", "poincare_weighted_check", "gn_slab_check", "GNResult",
    "gn_constant_estimate", "gn_corpus", "l1_contraction_paired_check",
    "dzdxi_sandwich_check", "run_lemma_suite", "LemmaSuiteReport", "gauss_legendre_panels",
    "InequalityError", "LEMMA_GROUPS",
]
