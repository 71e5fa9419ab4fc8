"""Compiled stencil kernels for the moving-frame right-hand side.

These fuse the operators of :mod:`viscshock.grid` (MC-limited LLF transport
plus the centered Laplacian) into single passes over memory. They must agree
with the NumPy reference operators to rounding; see ``tests/test_kernels.py``.

Fluxes reach the kernels as a degree-4 polynomial (five scalar
coefficients) plus an optional sine term, so the inner loops are straight-line
code that LLVM can vectorize.
"""
from __future__ import annotations

import numpy as np
from numba import njit

MAX_DEGREE = 4


def pack_coefficients(coeffs) -> np.ndarray:
    c = np.zeros(MAX_DEGREE + 1)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(coeffs) > MAX_DEGREE + 1 and np.any(coeffs[MAX_DEGREE + 1:] != 0):
        raise ValueError(f"compiled kernels support polynomial fluxes up to degree {MAX_DEGREE}")
    c[:min(len(coeffs), MAX_DEGREE + 1)] = coeffs[:MAX_DEGREE + 1]
    return c


@njit(cache=True, inline="always", fastmath=True)
def _poly(u, c0, c1, c2, c3, c4):
    return c0 + u * (c1 + u * (c2 + u * (c3 + u * c4)))


@njit(cache=True, inline="always", fastmath=True)
def _dpoly(u, c1, c2, c3, c4):
    return c1 + u * (2.0 * c2 + u * (3.0 * c3 + u * 4.0 * c4))


@njit(cache=True, inline="always", fastmath=True)
def _mc(a, b):
    s = 0.5 * (np.sign(a) + np.sign(b))
    return s * min(0.5 * abs(a + b), 2.0 * abs(a), 2.0 * abs(b))


@njit(cache=True, fastmath=True)
def _node_terms(row, lam, sl, c, amp, fr, ph, sigma):
    """Per-node speed ``|f' - sigma|`` and MC slopes of one xi-line (zero at the ends)."""
    n = row.shape[0]
    c1, c2, c3, c4 = c[1], c[2], c[3], c[4]
    for i in range(n):
        lam[i] = _dpoly(row[i], c1, c2, c3, c4)
    if amp != 0.0:
        for i in range(n):
            lam[i] += amp * fr * np.cos(fr * row[i] + ph)
    for i in range(n):
        lam[i] = abs(lam[i] - sigma)
    for i in range(1, n - 1):
        sl[i] = _mc(row[i] - row[i - 1], row[i + 1] - row[i])
    sl[0] = 0.0
    sl[n - 1] = 0.0


@njit(cache=True, fastmath=True)
def xi_rhs(u, out, hx, c, amp, fr, ph, sigma, src):
    """Rows of ``u`` are xi-lines; writes the xi part of the RHS minus ``src``."""
    m, nx = u.shape
    ihx = 1.0 / hx
    c0, c1, c2, c3, c4 = c[0], c[1], c[2], c[3], c[4]
    slope = np.empty(nx)
    lam = np.empty(nx)
    ul = np.empty(nx - 1)
    ur = np.empty(nx - 1)
    H = np.empty(nx - 1)
    for r in range(m):
        row = u[r]
        _node_terms(row, lam, slope, c, amp, fr, ph, sigma)
        for i in range(nx - 1):
            ul[i] = row[i] + 0.5 * slope[i]
            ur[i] = row[i + 1] - 0.5 * slope[i + 1]
        for i in range(nx - 1):
            a, b = ul[i], ur[i]
            fl = _poly(a, c0, c1, c2, c3, c4) - sigma * a
            fr_ = _poly(b, c0, c1, c2, c3, c4) - sigma * b
            sp = max(lam[i], lam[i + 1])
            H[i] = 0.5 * (fl + fr_) - 0.5 * sp * (b - a) - (row[i + 1] - row[i]) * ihx
        if amp != 0.0:
            for i in range(nx - 1):
                H[i] += 0.5 * amp * (np.sin(fr * ul[i] + ph) + np.sin(fr * ur[i] + ph))
        o = out[r]
        o[0] = 0.0
        o[nx - 1] = 0.0
        for i in range(1, nx - 1):
            o[i] = (H[i - 1] - H[i]) * ihx - src[i]


@njit(cache=True, inline="always", fastmath=True)
def _line_terms(r0, r1, r2, lam, sl, c1, c2, c3, c4, amp, fr, ph):
    """Speed ``|f'|`` and MC slope on the middle of three consecutive torus lines."""
    q_n = r1.shape[0]
    for q in range(q_n):
        lam[q] = _dpoly(r1[q], c1, c2, c3, c4)
    if amp != 0.0:
        for q in range(q_n):
            lam[q] += amp * fr * np.cos(fr * r1[q] + ph)
    for q in range(q_n):
        lam[q] = abs(lam[q])
        sl[q] = _mc(r1[q] - r0[q], r2[q] - r1[q])


@njit(cache=True, fastmath=True)
def torus_add(u, out, ht, c, amp, fr, ph):
    """Add the periodic-direction part; ``u`` viewed as ``(P, N, Q)``, periodic in N.

    Sweeps the periodic index once with line-sized rolling buffers so the
    working set stays in cache.
    """
    p_n, n, q_n = u.shape
    iht = 1.0 / ht
    c0, c1, c2, c3, c4 = c[0], c[1], c[2], c[3], c[4]
    lam_a = np.empty(q_n)
    lam_b = np.empty(q_n)
    sl_a = np.empty(q_n)
    sl_b = np.empty(q_n)
    h_first = np.empty(q_n)
    h_prev = np.empty(q_n)
    h = np.empty(q_n)
    ul = np.empty(q_n)
    ur = np.empty(q_n)
    for p in range(p_n):
        up = u[p]
        op = out[p]
        _line_terms(up[n - 1], up[0], up[1], lam_a, sl_a, c1, c2, c3, c4, amp, fr, ph)
        for j in range(n):
            jp = j + 1 if j < n - 1 else 0
            jpp = jp + 1 if jp < n - 1 else 0
            r1, r2 = up[j], up[jp]
            _line_terms(r1, r2, up[jpp], lam_b, sl_b, c1, c2, c3, c4, amp, fr, ph)
            for q in range(q_n):
                ul[q] = r1[q] + 0.5 * sl_a[q]
                ur[q] = r2[q] - 0.5 * sl_b[q]
            for q in range(q_n):
                a, b = ul[q], ur[q]
                flux = 0.5 * (_poly(a, c0, c1, c2, c3, c4) + _poly(b, c0, c1, c2, c3, c4))
                sp = max(lam_a[q], lam_b[q])
                h[q] = flux - 0.5 * sp * (b - a) - (r2[q] - r1[q]) * iht
            if amp != 0.0:
                for q in range(q_n):
                    h[q] += 0.5 * amp * (np.sin(fr * ul[q] + ph) + np.sin(fr * ur[q] + ph))
            if j == 0:
                h_first[:] = h
            else:
                o = op[j]
                for q in range(q_n):
                    o[q] += (h_prev[q] - h[q]) * iht
            h_prev, h = h, h_prev
            lam_a, lam_b = lam_b, lam_a
            sl_a, sl_b = sl_b, sl_a
        # h_prev now holds the flux at n - 1/2, the left neighbour of line 0
        o = op[0]
        for q in range(q_n):
            o[q] += (h_prev[q] - h_first[q]) * iht


@njit(cache=True, fastmath={"reassoc", "nsz", "arcp", "contract"})
def stage(out, y0, y, r, c0, c1, dt, left, right, colsum):
    """``out = c0*y0 + c1*(y + dt*r)`` with Dirichlet ends.

    Also accumulates the sum over rows into ``colsum`` (the torus mean times
    the row count); NaN or Inf anywhere in ``out`` propagates into it.
    """
    m, nx = out.shape
    colsum[:] = 0.0
    for k in range(m):
        o, a, b, d = out[k], y0[k], y[k], r[k]
        for i in range(nx):
            o[i] = c0 * a[i] + c1 * (b[i] + dt * d[i])
        o[0] = left
        o[nx - 1] = right
        for i in range(nx):
            colsum[i] += o[i]
