"""The ten acceptance criteria, one test each, at the stated tolerances.

Each test records a one-line verdict; ``conftest.py`` prints them all in the
terminal summary so the pass/fail table survives output capturing.
"""
import math

import numpy as np
import pytest

from viscshock import diagnostics as dg
from viscshock.dynamics import SimState, Solver, shift_rhs, stable_dt
from viscshock.flux import FluxSpec, ShockData
from viscshock.grid import Field, Grid, integrate, read_snapshot
from viscshock.inequalities import l1_contraction_paired_check, run_lemma_suite
from viscshock.profile import beta_constants, solve_profile

ACCEPTANCE_LINES: dict[int, str] = {}

# reference values (mpmath, 30 digits)
DU_L2_BURGERS = 12 ** -0.5
BETA_BURGERS = 0.165290076040832803411250103058


def report(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def series(res, name):
    return np.array([getattr(r, name) for r in res.records])


def test_criterion_01_contraction(main_run):
    assert main_run.ok, main_run.message
    l2, t = series(main_run, "l2_dist"), series(main_run, "t")
    tol = main_run.tol_residual
    excess = np.diff(l2) - tol * np.diff(t)
    ok = bool(np.all(excess <= 0))
    report(1, ok, f"max increment {np.max(np.diff(l2)):.3e}, allowance tol*dt = "
                  f"{tol * np.diff(t).max():.3e}, samples {len(l2)}")
    assert ok


def test_criterion_02_dissipation(refined_pair):
    coarse, fine = refined_pair
    alpha = dg.compute_alpha(FluxSpec.burgers(0.5), 1.0)
    r_fine = series(fine, "dissipation_residual")[1:]
    r_coarse = series(coarse, "dissipation_residual")[1:]
    bound_ok = bool(np.all(r_fine <= fine.tol_residual))
    # the refinement clause concerns the positive part of the residual, the only
    # part that could come from discretization; a residual that never becomes
    # positive at either resolution satisfies it trivially
    pos_fine, pos_coarse = max(r_fine.max(), 0.0), max(r_coarse.max(), 0.0)
    refine_ok = pos_fine <= pos_coarse / 3.0
    ok = alpha == 1.0 and bound_ok and refine_ok
    report(2, ok, f"alpha={alpha:g}, max residual 1601: {r_fine.max():.3e} (tol "
                  f"{fine.tol_residual:.3e}), 801: {r_coarse.max():.3e}, positive parts "
                  f"{pos_coarse:.1e} -> {pos_fine:.1e}")
    assert alpha == 1.0 and bound_ok and refine_ok


def test_criterion_03_decay_envelope(main_run):
    t, l2 = series(main_run, "t"), series(main_run, "l2_dist")
    m = (t >= 1.0 - 1e-9) & (t <= 50.0 + 1e-9)
    env = t[m] ** 0.25 * l2[m]
    ratio = env.max() / env[0]
    slope = np.polyfit(np.log(t[m]), np.log(l2[m]), 1)[0]
    ok = ratio <= 1.05 and slope <= -0.25 + 0.05
    report(3, ok, f"envelope max/initial = {ratio:.4f}, fitted slope = {slope:.4f}")
    assert ratio <= 1.05
    assert slope <= -0.2


def test_criterion_04_shift_derivative(main_run, burgers, burgers_profile):
    flux, shock = burgers
    snaps = sorted((main_run.out_dir / "snapshots").glob("*.bin"))
    assert len(snaps) >= 4
    gain = (2 * flux.a + flux.g2_bound) / (2 * shock.eps)
    worst = 0.0
    for p in snaps:
        f, meta = read_snapshot(p)
        X = meta["X"]
        d = f.values - burgers_profile.value(f.grid.xi - X)
        l2 = math.sqrt(integrate(Field(f.grid, d * d)))
        xdot = shift_rhs(SimState(f, meta["t"], X, 0.0, 0), burgers_profile, flux)
        assert xdot == pytest.approx(meta["Xdot"], rel=1e-12, abs=1e-300)
        bound = gain * l2 * DU_L2_BURGERS
        worst = max(worst, abs(xdot) / bound if bound > 0 else 0.0)
    cs_ok = worst <= 1 + 1e-12
    t, xd = series(main_run, "t"), np.abs(series(main_run, "Xdot"))
    m = t >= 1.0
    slope = np.polyfit(np.log(t[m]), np.log(xd[m]), 1)[0]
    per_sample = np.abs(series(main_run, "Xdot")) <= \
        gain * series(main_run, "l2_dist") * DU_L2_BURGERS * (1 + 1e-12)
    ok = cs_ok and bool(per_sample.all()) and slope <= -0.2
    report(4, ok, f"{len(snaps)} snapshots, max |Xdot|/bound = {worst:.4f}, all "
                  f"{per_sample.size} samples bounded: {bool(per_sample.all())}, "
                  f"|Xdot| slope = {slope:.4f}")
    assert cs_ok and per_sample.all()
    assert slope <= -0.2


def test_criterion_05_shift_bound(main_run, burgers_profile):
    b = beta_constants(burgers_profile)
    assert b.beta == pytest.approx(BETA_BURGERS, rel=1e-8)
    c = main_run.constants
    bound = (c.l2_0**2 + 4 * c.eps * c.l1_0) / b.beta + 1
    X = np.abs(series(main_run, "X"))
    ok = bool(np.all(X <= bound))
    report(5, ok, f"max |X| = {X.max():.4e} <= bound {bound:.4f} (beta = {b.beta:.6f})")
    assert ok


def test_criterion_06_lemma_suite():
    rep = run_lemma_suite(n_random=1000, seed=0)
    by = {(e["lemma"], e["fixture"]): e for e in rep.entries}
    aff = by[("poincare", "affine_equality")]
    affine_ok = abs(aff["lhs"] - 1 / 12) <= 1e-8 and abs(aff["rhs"] - 1 / 12) <= 1e-8
    trig = by[("poincare", "trig_corpus_1000")]
    trig_ok = trig["margin"] >= -1e-8
    gn = [e for e in rep.entries if e["lemma"] == "gn" and e["fixture"] != "empirical_constant"]
    gn_ok = all(e["passed"] and e["scale_drift"] <= 1e-12 for e in gn)
    sw = [e for e in rep.entries if e["lemma"] == "sandwich"]
    sw_ok = bool(sw) and all(e["passed"] for e in sw)
    ident = [e["identity_error"] for e in sw if e.get("identity_error") is not None]
    ident_ok = bool(ident) and max(ident) <= 1e-10
    ok = affine_ok and trig_ok and gn_ok and sw_ok and ident_ok and rep.passed
    report(6, ok, f"affine ({aff['lhs']:.12f}, {aff['rhs']:.12f}); worst trig margin "
                  f"{trig['margin']:.3e}; GN max ratio "
                  f"{max(e['ratio'] for e in gn):.4f} over {len(gn)} fixtures; sandwich "
                  f"{len(sw)} fixtures, identity error {max(ident):.1e}")
    assert ok


def test_criterion_07_l1_contraction(paired_runs):
    a, b, p = paired_runs["a"], paired_runs["b"], paired_runs["profile"]
    checks = [l1_contraction_paired_check(a, b), l1_contraction_paired_check(a, p),
              l1_contraction_paired_check(b, p)]
    ok = all(c["passed"] for c in checks)
    detail = "; ".join(f"{c['initial']:.4f} -> {c['final']:.4f} (max step "
                       f"{c['max_increment']:.1e})" for c in checks)
    report(7, ok, f"3 pairs: {detail}")
    assert ok


def test_criterion_08_conservation_max_principle(main_run):
    c = main_run.constants
    mass = series(main_run, "mass")
    drift = np.max(np.abs(mass - mass[0]))
    energy = c.l2_0**2
    linf = series(main_run, "linf").max()
    ok = drift <= 1e-8 * energy and linf <= c.linf_0 + 1e-10
    report(8, ok, f"mass drift {drift:.3e} <= {1e-8 * energy:.3e}; max |u| {linf:.12f} "
                  f"vs initial {c.linf_0:.12f}")
    assert drift <= 1e-8 * energy
    assert linf <= c.linf_0 + 1e-10


def test_criterion_09_steady_state(burgers, burgers_profile):
    flux, shock = burgers
    g = Grid(40.0, 1601, 2, 64)
    row = burgers_profile.value(g.xi)
    row[0], row[-1] = shock.u_minus, shock.u_plus
    u0 = Field(g, g.broadcast_xi(row))
    s = Solver(g, flux, burgers_profile, u0)
    dt = stable_dt(g, s.op.max_speeds(0.0, 1.0))
    worst_l2, worst_x = 0.0, 0.0
    for k in range(1000):
        s.step(dt)
        if k % 100 == 99:
            d = s.u - burgers_profile.value(g.xi - s.X)
            worst_l2 = max(worst_l2, math.sqrt(integrate(Field(g, d * d))))
            worst_x = max(worst_x, abs(s.X))
    ok = worst_l2 <= 1e-8 and worst_x <= 1e-10
    report(9, ok, f"1000 steps of dt={dt:.3e}: max L2 distance {worst_l2:.3e}, max |X| {worst_x:.3e}")
    assert ok


def test_criterion_10_shifted_profile(shifted_run):
    assert shifted_run.ok, shifted_run.message
    X = series(shifted_run, "X")
    s = 2.0
    gaps = np.abs(X - s)
    monotone = bool(np.all(np.diff(gaps) <= 1e-12))
    final = gaps[-1]
    ok = monotone and final <= 0.05
    report(10, ok, f"X: {X[0]:.4f} -> {X[-1]:.5f}, |X - s| non-increasing: {monotone}, "
                   f"final |X - s| = {final:.4f}")
    assert ok
