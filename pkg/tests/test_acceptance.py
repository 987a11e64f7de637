"""Quantitative acceptance checks, one test per criterion.

Every test records a PASS/FAIL line with its measured numbers; the lines are
printed in the terminal summary by conftest.
"""

import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from ssprofile import demo
from ssprofile.continuation import (bootstrap_monitor, find_bootstrap_constants, fit_asymptotics,
                                    measure_envelopes, verify_chain)
from ssprofile.core import BoundaryData, PhysicalParams, build_grid, forced_theta0_value
from ssprofile.errors import BallExit, Infeasible, NoConvergence
from ssprofile.expander import check_smallness, picard_solve
from ssprofile.residual import residual_expander, residual_shrinker
from ssprofile.shrinker import (VERDICT_HYPOTHESES, VERDICT_NONEXISTENCE, audit_shrinker,
                                build_matrix_A, cutoff, diagonalize,
                                hardy_sides, profile_from_samples, quadratic_form_terms)

from conftest import ACCEPTANCE, contraction_grid


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# 1 -------------------------------------------------------------------------

def test_criterion_01_trivial_state_exact():
    t0 = time.perf_counter()
    worst = 0.0
    for d, c in [(3, 1.0), (4, 1e-3), (5, 7.5)]:
        params = PhysicalParams.degenerate(d=d, alpha=0.4)
        grid = build_grid(0.01, 100.0, 200, 400, 1.03)
        r = grid.nodes
        prof = profile_from_samples(r, np.full_like(r, c), np.zeros_like(r), np.zeros_like(r),
                                    np.zeros_like(r), np.zeros_like(r))
        for fn in (residual_expander, residual_shrinker):
            rep = fn(prof, params)
            worst = max(worst, *rep.max_abs.values())
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-12 and elapsed < 1.0,
           f"max |residual| = {worst:.2e} (<= 1e-12), runtime {elapsed:.3f} s (< 1 s)")


# 2 -------------------------------------------------------------------------

def test_criterion_02_near_origin(demo_inner):
    _, inner, _ = demo_inner
    params, bd = demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY
    r = inner.r
    first = r <= 10.0 * r[0]
    slope = np.polyfit(np.log(r[first]), inner.log_p[first], 1)[0]
    target = params.d * bd.a_slope / (0.5 - bd.a_slope)
    slope_err = abs(slope / target - 1.0)
    up_err = abs(inner.u_prime[0] / bd.a_slope - 1.0)
    # the deviation is far below one ulp of Theta0, so use the solver's own deviation field
    ratio = np.abs(inner.startup["th_dev"])[first] / r[first] ** 2
    bounded = bool(np.all(np.isfinite(ratio)) and ratio[0] <= 2.0 * np.max(ratio[-3:]) + 1e-300)
    record(2, slope_err <= 0.01 and up_err <= 1e-4 and bounded,
           f"slope rel err {slope_err:.1e} (<= 1e-2), U'(0) rel err {up_err:.1e} (<= 1e-4), "
           f"sup |Theta-Theta0|/r^2 on first decade {np.max(ratio):.2e}")


# 3 -------------------------------------------------------------------------

def test_criterion_03_contraction(contraction_run):
    params, bd = demo.CONTRACTION_PARAMS, demo.CONTRACTION_BOUNDARY
    assert check_smallness(params, bd).passed
    _, history = contraction_run
    ratios = [h.contraction_estimate for h in history[1:]]
    monotone = all(b <= a for a, b in zip(ratios, ratios[1:]))
    ok = len(ratios) >= 5 and max(ratios) < 1.0 and monotone

    lp, lb = demo.LINEAR_PARAMS, demo.LINEAR_BOUNDARY
    assert lb.theta0 == pytest.approx(forced_theta0_value(lp, lb.a_slope))
    picard_solve(lp, lb, contraction_grid())
    try:
        picard_solve(lp, lb.replace(theta0=1.1 * lb.theta0), contraction_grid())
        control = "converged"
    except (BallExit, NoConvergence) as exc:
        control = type(exc).__name__
    record(3, ok and control != "converged",
           f"{len(ratios)} ratios {ratios[0]:.2e} -> {ratios[-1]:.2e}, monotone={monotone}; "
           f"alpha=1 with Theta0 +10%: {control}")


# 4 -------------------------------------------------------------------------

def test_criterion_04_envelopes_and_bootstrap(demo_global):
    params, bd = demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY
    env = measure_envelopes(demo_global, params, bd)
    consts = find_bootstrap_constants(params, bd)
    _, mon = bootstrap_monitor(demo_global, consts, bd, params)
    finite = all(math.isfinite(v) for v in env.values())
    ok = (finite and env["P_lower"] > 0 and env["Theta_min"] > 0
          and mon["z_delta"] <= 0.5 and mon["z_sup"] <= 0.5 and mon["verdict"])
    cu, ct = env["U'"], env["Theta'"]
    record(4, ok,
           f"C_P in [{env['P_lower']:.3g}, {env['P_upper']:.3g}], C_U {env['U']:.3g}, "
           f"C_U' {cu:.3g}, C_Theta {env['Theta']:.3g}, "
           f"C_Theta' {ct:.3g}; Z(delta) {mon['z_delta']:.3g}, "
           f"sup Z {mon['z_sup']:.3g} (<= 0.5)")


# 5 -------------------------------------------------------------------------

def test_criterion_05_asymptotics(demo_global):
    r_max = demo_global.r[-1]
    fit = fit_asymptotics(demo_global, (0.6 * r_max, r_max))
    rates = (fit.rate_p, fit.rate_u, fit.rate_theta)
    ok = (all(abs(x - 2.0) <= 0.1 for x in rates)
          and fit.p_inf > 0 and fit.u_inf > 0 and fit.theta_inf > 0)
    record(5, ok, "rates " + ", ".join(f"{x:.5f}" for x in rates)
           + f" (2 +- 5%); P_inf {fit.p_inf:.3g}, U_inf {fit.u_inf:.3g}, "
           f"Theta_inf {fit.theta_inf:.3g}")


# 6 -------------------------------------------------------------------------

def test_criterion_06_residual_and_refinement(demo_global, demo_global_coarse):
    params, bd = demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY
    window = (2.0 * bd.delta, 0.5 * demo_global.r[-1])
    fine = residual_expander(demo_global, params, window).max_rel
    coarse = residual_expander(demo_global_coarse, params, window).max_rel
    # equations already at rounding level on the coarse grid cannot improve further
    factors = {k: coarse[k] / fine[k] for k in fine if coarse[k] > 1e-12}
    ok = max(fine.values()) <= 1e-5 and all(f >= 3.0 for f in factors.values()) and factors
    record(6, ok, "max rel " + ", ".join(f"{k} {v:.2e}" for k, v in fine.items())
           + " (<= 1e-5); halving factors "
           + ", ".join(f"{k} {v:.2f}" for k, v in factors.items()) + " (>= 3)")


# 7 -------------------------------------------------------------------------

def test_criterion_07_quadratic_form_algebra(rng):
    n = 10_000
    a12 = -rng.uniform(1e-3, 3.0, n)
    a21 = -rng.uniform(1e-3, 3.0, n)
    x, y = -rng.uniform(0.0, 4.0, n), -rng.uniform(0.0, 4.0, n)
    a11, a22 = np.maximum(x, y), np.minimum(x, y) - 1e-3
    disc, lmin, lmax, q12, q21, dd = diagonalize(a11, a12, a21, a22)
    vec = rng.normal(size=(4, n))
    e_gap = -np.exp(-lmin) * np.expm1(-np.sqrt(disc))
    terms = quadratic_form_terms(np.exp(-lmin), np.exp(-lmax), q12, q21, *vec, e_gap=e_gap)
    worst = 0.0
    for i in range(n):
        w = expm(np.array([[a11[i], a12[i]], [a21[i], a22[i]]]))
        direct = vec[2:, i] @ w @ vec[:2, i]
        scale = np.abs(w).max() * np.abs(vec[:, i]).max() ** 2
        worst = max(worst, abs(terms["value"][i] - direct) / scale)

    facts_ok = True
    for params, kw in demo.VALID_CANDIDATES:
        prof = demo.make_candidate(kw)
        mA = build_matrix_A(prof, params)
        f = mA.facts(strict_offdiag=mA.r > mA.r[0])
        keys = ["a12<0", "a21<0", "disc>0", "|D|>=1", "1/2<=1+q12q21/D<=1"]
        facts_ok &= all(f[k] for k in keys)
    record(7, worst <= 1e-12 and facts_ok,
           f"max rel deviation from expm on {n} nodes {worst:.1e} (<= 1e-12); "
           f"nodewise facts on {len(demo.VALID_CANDIDATES)} profiles: {facts_ok}")


# 8 -------------------------------------------------------------------------

def test_criterion_08_nonexistence_audit():
    margins, slowest = [], 0.0
    for params, kw in demo.VALID_CANDIDATES:
        prof = demo.make_candidate(kw, nodes=2048)
        t0 = time.perf_counter()
        rep = audit_shrinker(prof, params, kw["eps"])
        slowest = max(slowest, time.perf_counter() - t0)
        assert rep.verdict == VERDICT_NONEXISTENCE, rep.message
        led = rep.ledger
        assert led.lhs >= led.lhs_lower and led.rhs <= led.rhs_upper
        assert led.lhs_lower > led.rhs_upper and rep.margin > 0
        margins.append(rep.relative_margin)
    named = 0
    for params, kw, expected in demo.VIOLATING_CANDIDATES:
        rep = audit_shrinker(demo.make_candidate(kw, nodes=2048), params, kw["eps"])
        named += rep.verdict == VERDICT_HYPOTHESES and expected in rep.violated
    ok = len(margins) >= 5 and named >= 3 and named == len(demo.VIOLATING_CANDIDATES)
    ok = ok and slowest < 10.0
    record(8, ok, f"{len(margins)} candidates with margin, relative margins "
           f"{min(margins):.3f}..{max(margins):.3f}; {named}/"
           f"{len(demo.VIOLATING_CANDIDATES)} violations named; slowest audit {slowest:.3f} s")


# 9 -------------------------------------------------------------------------

def test_criterion_09_hardy(rng):
    r = np.geomspace(1e-4, 50.0, 4000)
    violations, worst = 0, 0.0
    for d in (3, 4, 5):
        for _ in range(100):
            # random smooth Theta: a sum of Gaussians plus a rational tail
            c = rng.uniform(-1.0, 1.0, 4)
            w = rng.uniform(0.3, 3.0, 4)
            th = sum(ci * np.exp(-(r / wi) ** 2) for ci, wi in zip(c, w))
            thp = sum(-2.0 * ci * r / wi ** 2 * np.exp(-(r / wi) ** 2) for ci, wi in zip(c, w))
            eps = rng.uniform(0.5, 3.0)
            chi, dchi = cutoff(r, eps)
            f, fp = chi * th, dchi * th + chi * thp
            left, right = hardy_sides(r, f, fp, d)
            ratio = left / right
            worst = max(worst, ratio)
            violations += ratio > 1.0
    record(9, violations == 0, f"300 trials over d = 3, 4, 5: {violations} violations, "
           f"largest LHS/RHS {worst:.3f}")


# 10 ------------------------------------------------------------------------

def test_criterion_10_constants():
    params, bd = demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY
    consts = find_bootstrap_constants(params, bd)
    ok_feasible = not verify_chain(consts, params, bd)
    big = BoundaryData(0.4, bd.delta, bd.p_delta, bd.theta0, bd.eps_norm)
    try:
        find_bootstrap_constants(params, big)
        tightest = None
    except Infeasible as exc:
        tightest = exc.tightest
    record(10, ok_feasible and tightest is not None,
           f"demo: M1 {consts.m1:.0e}, M1' {consts.m1p:.0e}, M2 {consts.m2:.0e} "
           f"(slack {consts.slack:.2f} decades); A = 0.4 infeasible, tightest '{tightest}'")
