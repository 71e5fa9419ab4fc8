"""Truncated slab ``[-L, L] x T^{n-1}`` with torus period 1.

Arrays are laid out as ``(N_t, ..., N_t, N_xi)``: torus axes first, ``xi``
last and fastest varying. The two ``xi`` end nodes carry the Dirichlet
far-field values and are never evolved, so every operator below returns
zero there.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flux import FluxSpec


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    L: float
    n_xi: int
    n_dims: int = 2
    n_t: int = 16

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise GridError("L must be positive")
        if self.n_xi < 5:
            raise GridError("need at least 5 nodes in xi")
        if self.n_dims < 2:
            raise GridError("n_dims must be >= 2")
        if self.n_t < 3:
            raise GridError("need at least 3 nodes per torus direction")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_t,) * (self.n_dims - 1) + (self.n_xi,)

    @property
    def h_xi(self) -> float:
        return 2.0 * self.L / (self.n_xi - 1)

    @property
    def h_t(self) -> float:
        return 1.0 / self.n_t

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n_xi)

    @property
    def xt(self) -> np.ndarray:
        return np.arange(self.n_t) * self.h_t

    @property
    def xi_weights(self) -> np.ndarray:
        w = np.full(self.n_xi, self.h_xi)
        w[0] = w[-1] = 0.5 * self.h_xi
        return w

    @property
    def torus_cell(self) -> float:
        return self.h_t ** (self.n_dims - 1)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays ``[x2, ..., xn, xi]``."""
        axes = [self.xt] * (self.n_dims - 1) + [self.xi]
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def broadcast_xi(self, row: np.ndarray) -> np.ndarray:
        return np.broadcast_to(row, self.shape).copy()

    def metadata(self) -> dict:
        return {"L": self.L, "n_xi": self.n_xi, "n_dims": self.n_dims, "n_t": self.n_t,
                "h_xi": self.h_xi, "h_t": self.h_t, "torus_period": 1.0,
                "layout": "row-major, torus axes first, xi fastest",
                "shape": list(self.shape)}

    @classmethod
    def from_metadata(cls, meta: dict) -> "Grid":
        return cls(float(meta["L"]), int(meta["n_xi"]), int(meta["n_dims"]), int(meta["n_t"]))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise GridError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains NaN or Inf")
        object.__setattr__(self, "values", v)


def _check(f: Field, grid: Grid | None) -> np.ndarray:
    if grid is not None and f.grid != grid:
        raise GridError("field lives on a different grid")
    return f.values


def integrate_array(grid: Grid, values: np.ndarray) -> float:
    return float(np.sum(values @ grid.xi_weights) * grid.torus_cell)


def integrate(f: Field, grid: Grid | None = None) -> float:
    """Trapezoid in ``xi`` times the uniform (exact for trig modes) torus rule."""
    return integrate_array(f.grid, _check(f, grid))


def gradient_sq_array(grid: Grid, v: np.ndarray) -> float:
    gx = np.gradient(v, grid.h_xi, axis=-1, edge_order=2)
    total = gx * gx
    for ax in range(grid.n_dims - 1):
        gt = (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2.0 * grid.h_t)
        total += gt * gt
    return integrate_array(grid, total)


def gradient_sq_integral(f: Field, grid: Grid | None = None) -> float:
    """``int |grad f|^2`` with centered differences, one-sided at the xi ends."""
    return gradient_sq_array(f.grid, _check(f, grid))


def laplacian(f: Field) -> Field:
    g, v = f.grid, f.values
    out = np.zeros_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / g.h_xi**2
    for ax in range(g.n_dims - 1):
        lap = (np.roll(v, -1, axis=ax) - 2.0 * v + np.roll(v, 1, axis=ax)) / g.h_t**2
        out[..., 1:-1] += lap[..., 1:-1]
    return Field(g, out)


def mc_limiter(a, b):
    """Monotonized-central slope limiter."""
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(
        0.5 * np.abs(a + b), 2.0 * np.minimum(np.abs(a), np.abs(b)))


def _llf(fun, dfun, ul, ur, uc_l, uc_r):
    lam = np.maximum(np.abs(dfun(uc_l)), np.abs(dfun(uc_r)))
    return 0.5 * (fun(ul) + fun(ur)) - 0.5 * lam * (ur - ul)


def divergence_flux(flux: FluxSpec, f: Field, frame_speed: float = 0.0) -> Field:
    """Conservative ``d/dxi (f1(u) - s u) + sum_k d/dx_k f_k(u)``.

    Local Lax-Friedrichs interface fluxes with MC-limited linear
    reconstruction; the dissipation speed is the larger neighbouring node
    value of ``|f_i'|``. Reconstruction slopes vanish at the Dirichlet nodes.
    """
    g, v = f.grid, f.values
    out = np.zeros_like(v)

    def f_xi(u):
        return flux.f1(u) - frame_speed * u

    def df_xi(u):
        return flux.df1(u) - frame_speed

    slope = np.zeros_like(v)
    slope[..., 1:-1] = mc_limiter(v[..., 1:-1] - v[..., :-2], v[..., 2:] - v[..., 1:-1])
    ul = v[..., :-1] + 0.5 * slope[..., :-1]
    ur = v[..., 1:] - 0.5 * slope[..., 1:]
    H = _llf(f_xi, df_xi, ul, ur, v[..., :-1], v[..., 1:])
    out[..., 1:-1] = (H[..., 1:] - H[..., :-1]) / g.h_xi

    for ax, fk in enumerate(flux.transverse_fluxes(g.n_dims)):
        vp = np.roll(v, -1, axis=ax)
        s = mc_limiter(v - np.roll(v, 1, axis=ax), vp - v)
        ul = v + 0.5 * s
        ur = vp - 0.5 * np.roll(s, -1, axis=ax)
        H = _llf(fk, fk.deriv, ul, ur, v, vp)
        d = (H - np.roll(H, 1, axis=ax)) / g.h_t
        out[..., 1:-1] += d[..., 1:-1]
    return Field(g, out)


# persistence -----------------------------------------------------------------

def write_snapshot(path_stem: str | Path, f: Field, extra: dict | None = None) -> Path:
    """Raw little-endian float64 block plus a JSON sidecar with grid metadata."""
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(f.values, dtype="<f8").tofile(stem.with_suffix(".bin"))
    meta = {"grid": f.grid.metadata(), "dtype": "<f8", **(extra or {})}
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return stem.with_suffix(".bin")


def read_snapshot(path: str | Path) -> tuple[Field, dict]:
    p = Path(path)
    meta = json.loads(p.with_suffix(".json").read_text())
    grid = Grid.from_metadata(meta["grid"])
    data = np.fromfile(p.with_suffix(".bin"), dtype="<f8")
    if data.size != math.prod(grid.shape):
        raise GridError(f"snapshot {p} has {data.size} values, expected {math.prod(grid.shape)}")
    return Field(grid, data.reshape(grid.shape)), meta


def write_field_csv(f: Field, path: str | Path) -> None:
    """Long-format ``x2, xi, u`` rows; only for n = 2."""
    if f.grid.n_dims != 2:
        raise GridError("CSV export is only defined for n = 2 slices")
    xt, xi = f.grid.xt, f.grid.xi
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x2", "xi", "u"])
        for j, x2 in enumerate(xt):
            for i, x1 in enumerate(xi):
                w.writerow([repr(float(x2)), repr(float(x1)), repr(float(f.values[j, i]))])


__all__ = [
    "Grid", "Field", "GridError", "integrate", "integrate_array", "gradient_sq_integral",
    "gradient_sq_array", "laplacian", "divergence_flux", "mc_limiter", "write_snapshot",
    "read_snapshot", "write_field_csv",
]
