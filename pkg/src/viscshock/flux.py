"""Admissible fluxes, shock data and relative functionals.

The normal flux is ``f1(u) = a*u**2 + g(u)``. Every scalar flux in this
package is a :class:`ScalarFunction`, i.e. a polynomial plus an optional
sine term, which keeps closed-form derivatives available and lets the
compiled kernels evaluate the same function without Python callbacks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

STRENGTH_CONSTANT = 8.0 * math.pi


class FluxError(ValueError):
    """Raised for malformed fluxes or violated flux hypotheses."""


class DegenerateShockError(FluxError):
    """Raised when the two end states coincide."""


@dataclass(frozen=True)
class ScalarFunction:
    """``h(u) = sum_k coeffs[k] * u**k + amp * sin(freq * u + phase)``."""

    coeffs: tuple[float, ...] = ()
    amp: float = 0.0
    freq: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        for v in (*self.coeffs, self.amp, self.freq, self.phase):
            if not math.isfinite(v):
                raise FluxError("flux parameters must be finite")

    @property
    def is_zero(self) -> bool:
        return self.amp == 0.0 and all(c == 0.0 for c in self.coeffs)

    def _poly(self, u, order):
        c = np.asarray(self.coeffs, dtype=float)
        for _ in range(order):
            c = c[1:] * np.arange(1, len(c))
        return np.polynomial.polynomial.polyval(u, c) if len(c) else np.zeros_like(u, dtype=float)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = self._poly(u, 0)
        if self.amp:
            out = out + self.amp * np.sin(self.freq * u + self.phase)
        return out

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        out = self._poly(u, 1)
        if self.amp:
            out = out + self.amp * self.freq * np.cos(self.freq * u + self.phase)
        return out

    def deriv2(self, u):
        u = np.asarray(u, dtype=float)
        out = self._poly(u, 2)
        if self.amp:
            out = out - self.amp * self.freq**2 * np.sin(self.freq * u + self.phase)
        return out

    def packed(self) -> tuple[np.ndarray, float, float, float]:
        """Parameters in the layout the compiled kernels expect."""
        c = np.asarray(self.coeffs if self.coeffs else (0.0,), dtype=np.float64)
        return c, float(self.amp), float(self.freq), float(self.phase)

    def shifted_by_quadratic(self, a: float) -> "ScalarFunction":
        c = list(self.coeffs) + [0.0] * max(0, 3 - len(self.coeffs))
        c[2] += a
        return ScalarFunction(tuple(c), self.amp, self.freq, self.phase)


def quadratic(a: float) -> ScalarFunction:
    return ScalarFunction((0.0, 0.0, float(a)))


@dataclass(frozen=True)
class FluxSpec:
    """Flux vector ``F = (f1, f2, ..., fn)`` with ``f1 = a u^2 + g``.

    ``g2_bound`` is the user-asserted bound on ``|g''|``; it is certified by
    dense sampling on the dynamic range before any profile or run is built
    (see :func:`verify_g2_bound`). ``transverse`` lists ``f2, ..., fn``;
    missing directions default to ``a*u**2``.
    """

    a: float
    g: ScalarFunction = field(default_factory=ScalarFunction)
    g2_bound: float = 0.0
    transverse: tuple[ScalarFunction, ...] = ()

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise FluxError(f"coefficient a must be positive, got {self.a}")
        if not (self.g2_bound >= 0 and math.isfinite(self.g2_bound)):
            raise FluxError(f"g2_bound must be a nonnegative number, got {self.g2_bound}")
        object.__setattr__(self, "transverse", tuple(self.transverse))

    @classmethod
    def burgers(cls, a: float = 0.5, transverse: Sequence[ScalarFunction] = ()) -> "FluxSpec":
        return cls(a=a, g=ScalarFunction(), g2_bound=0.0, transverse=tuple(transverse))

    @property
    def is_burgers(self) -> bool:
        return self.g.is_zero

    @property
    def normal(self) -> ScalarFunction:
        """``f1`` as a single :class:`ScalarFunction`."""
        return self.g.shifted_by_quadratic(self.a)

    def f1(self, u):
        u = np.asarray(u, dtype=float)
        return self.a * u * u + self.g(u)

    def df1(self, u):
        u = np.asarray(u, dtype=float)
        return 2.0 * self.a * u + self.g.deriv(u)

    def d2f1(self, u):
        return 2.0 * self.a + self.g.deriv2(u)

    def transverse_fluxes(self, n_dims: int) -> tuple[ScalarFunction, ...]:
        if len(self.transverse) > n_dims - 1:
            raise FluxError(
                f"{len(self.transverse)} transverse fluxes given for n={n_dims}")
        pad = (quadratic(self.a),) * (n_dims - 1 - len(self.transverse))
        return self.transverse + pad

    @property
    def shift_gain(self) -> float:
        """``2a + ||g''||``, the constant that recurs in every estimate."""
        return 2.0 * self.a + self.g2_bound


@dataclass(frozen=True)
class ShockData:
    u_minus: float
    u_plus: float
    eps: float
    sigma: float

    @classmethod
    def from_states(cls, flux: FluxSpec, u_minus: float, u_plus: float) -> "ShockData":
        sigma = rankine_hugoniot(flux, u_minus, u_plus)
        return cls(float(u_minus), float(u_plus), float(u_minus) - float(u_plus), sigma)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.u_minus + self.u_plus)


def rankine_hugoniot(flux: FluxSpec, u_minus: float, u_plus: float) -> float:
    if u_minus == u_plus:
        raise DegenerateShockError("end states coincide; no shock to speak of")
    return float((flux.f1(u_minus) - flux.f1(u_plus)) / (u_minus - u_plus))


@dataclass(frozen=True)
class AdmissibilityReport:
    lax: bool
    flux_hyp: bool
    strength_hyp: bool
    eps: float
    g2_bound: float
    flux_threshold: float
    strength_threshold: float

    @property
    def admissible(self) -> bool:
        return self.lax and self.flux_hyp and self.strength_hyp

    def messages(self) -> list[str]:
        out = []
        if not self.lax:
            out.append("Lax condition violated: need u_minus > u_plus")
        if not self.flux_hyp:
            out.append(f"flux hypothesis violated: g2_bound={self.g2_bound:g} "
                       f">= (2/3)a={self.flux_threshold:g}")
        if not self.strength_hyp:
            out.append(f"shock too strong: eps={self.eps:g} >= "
                       f"8*pi/(2a+g2_bound)={self.strength_threshold:g}")
        return out

    def as_dict(self) -> dict:
        return {
            "lax": self.lax, "flux_hyp": self.flux_hyp, "strength_hyp": self.strength_hyp,
            "admissible": self.admissible, "eps": self.eps, "g2_bound": self.g2_bound,
            "flux_threshold": self.flux_threshold, "strength_threshold": self.strength_threshold,
        }


def check_admissibility(flux: FluxSpec, shock: ShockData) -> AdmissibilityReport:
    flux_threshold = 2.0 * flux.a / 3.0
    strength_threshold = STRENGTH_CONSTANT / flux.shift_gain
    return AdmissibilityReport(
        lax=shock.u_minus > shock.u_plus,
        flux_hyp=flux.g2_bound < flux_threshold,
        strength_hyp=shock.eps < strength_threshold,
        eps=shock.eps,
        g2_bound=flux.g2_bound,
        flux_threshold=flux_threshold,
        strength_threshold=strength_threshold,
    )


def sampled_g2_max(flux: FluxSpec, lo: float, hi: float, n: int = 20001) -> float:
    u = np.linspace(lo, hi, n)
    return float(np.max(np.abs(flux.g.deriv2(u))))


def verify_g2_bound(flux: FluxSpec, shock: ShockData, n: int = 20001) -> float:
    """Sample ``|g''|`` on ``[u+ - 1, u- + 1]``; raise if the asserted bound fails."""
    lo = min(shock.u_plus, shock.u_minus) - 1.0
    hi = max(shock.u_plus, shock.u_minus) + 1.0
    worst = sampled_g2_max(flux, lo, hi, n)
    if worst > flux.g2_bound * (1 + 1e-12) + 1e-300:
        raise FluxError(f"asserted g2_bound={flux.g2_bound:g} is violated: "
                        f"sampled max |g''| = {worst:g} on [{lo:g}, {hi:g}]")
    return worst


def check_transverse(flux: FluxSpec, n_dims: int, lo: float, hi: float) -> None:
    """Finite-slope sanity check of the transverse fluxes on the range."""
    u = np.linspace(lo, hi, 2001)
    for k, fk in enumerate(flux.transverse_fluxes(n_dims), start=2):
        if not np.all(np.isfinite(fk.deriv(u))):
            raise FluxError(f"transverse flux f{k} is not Lipschitz on [{lo:g}, {hi:g}]")


def relative_quantity(func: Callable, deriv: Callable, u, v):
    """``G(u|v) = G(u) - G(v) - G'(v)(u - v)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return func(u) - func(v) - deriv(v) * (u - v)


def relative_flux_f1(flux: FluxSpec, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return flux.a * (u - v) ** 2 + relative_quantity(flux.g, flux.g.deriv, u, v)
