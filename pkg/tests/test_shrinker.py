import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.special import erf

from ssprofile import demo
from ssprofile.core import PhysicalParams, build_grid
from ssprofile.errors import DivergentRatio, InvalidArgument
from ssprofile.shrinker import (VERDICT_HYPOTHESES, VERDICT_NONEXISTENCE, VERDICT_TRIVIAL,
                                audit_shrinker, build_matrix_A, check_cavitation, cutoff,
                                diagonalize, energy_ledger, hardy_constant, hardy_sides,
                                hypothesis_suprema, profile_from_samples, quadratic_form_terms,
                                synthetic_candidate)

PARAMS = demo.SHRINKER_PARAMS


# cavitation -----------------------------------------------------------------

def test_cavitation_constant_density():
    r = np.geomspace(1e-4, 10.0, 400)
    cav = check_cavitation(r, np.full_like(r, 0.3), 1.0, 0.5)
    assert cav.ratio_moment == pytest.approx(2.0, rel=1e-10)
    assert cav.ratio_mass == pytest.approx(1.0, rel=1e-10)
    assert cav.p_eps == 0.3


@given(k=st.floats(0.1, 4.0), alpha=st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_cavitation_power_law(k, alpha):
    r = np.geomspace(1e-4, 10.0, 400)
    cav = check_cavitation(r, r ** k, 1.0, alpha)
    m = k * (1.0 - alpha)
    assert cav.ratio_moment == pytest.approx((m + 2.0) / (m + 1.0), rel=1e-9)
    assert cav.ratio_mass == pytest.approx((m + 1.0) / (k + 1.0), rel=1e-9)


def test_cavitation_vacuum_interval_diverges():
    r = np.geomspace(1e-4, 10.0, 400)
    p = np.where(r < 0.1, 0.0, r - 0.1)
    with pytest.raises(DivergentRatio):
        check_cavitation(r, p, 1.0, 0.5)
    with pytest.raises(InvalidArgument):
        check_cavitation(r, np.ones_like(r), 100.0, 0.5)


# the integrating-factor matrix ------------------------------------------------

def gaussian_candidate(n=1500):
    g = build_grid(1.0, 20.0, 500, n, 1.0)
    r = g.nodes
    th = 1e-4 * np.exp(-r * r)
    z = np.zeros_like(r)
    return profile_from_samples(r, np.full_like(r, 1e-6), z, th, z, -2.0 * r * th)


def test_matrix_entries_closed_form():
    prof = gaussian_candidate()
    r = prof.r
    mA = build_matrix_A(prof, PARAMS)
    c, cv, kap, gas_r, soft = PARAMS.visc, PARAMS.c_v, PARAMS.kappa, PARAMS.gas_r, 1e-3
    assert np.allclose(mA.a11, -(cv / kap) * 1e-6 * r * r / 4.0, rtol=1e-10)
    assert np.allclose(mA.a12, -(gas_r / kap) * 1e-10 * math.sqrt(math.pi) / 2 * erf(r),
                       rtol=1e-4)
    assert np.allclose(mA.a21, -(gas_r / c) * soft * r, rtol=1e-10)
    assert np.allclose(mA.a22, -(1.0 / c) * soft * r * r / 4.0, rtol=1e-10)


def test_weight_matrix_is_expm():
    params, kw = demo.VALID_CANDIDATES[0]
    mA = build_matrix_A(demo.make_candidate(kw), params)
    w = mA.weight_matrix()
    a = mA.matrix()
    idx = np.linspace(0, len(mA.r) - 1, 200).astype(int)
    for i in idx:
        ref = expm(a[i])
        assert np.allclose(w[i], ref, rtol=1e-10, atol=1e-14 * np.abs(ref).max())


def test_rows_of_Q_are_left_eigenvectors(rng):
    a12, a21 = -rng.uniform(0.1, 2.0, 50), -rng.uniform(0.1, 2.0, 50)
    a11, a22 = -rng.uniform(0, 1, 50), -rng.uniform(1, 3, 50)
    disc, lmin, lmax, q12, q21, dd = diagonalize(a11, a12, a21, a22)
    for i in range(50):
        a = np.array([[a11[i], a12[i]], [a21[i], a22[i]]])
        q = np.array([[1.0, q12[i]], [q21[i], 1.0]])
        lam = np.diag([-lmin[i], -lmax[i]])
        assert np.allclose(q @ a, lam @ q, atol=1e-13)
        assert np.allclose(np.linalg.inv(q) @ lam @ q, a, atol=1e-13)
    assert np.allclose(dd, 1.0 - q12 * q21)


def test_triangular_case():
    disc, lmin, lmax, q12, q21, dd = diagonalize(-0.5, 0.0, -0.3, -2.0)
    assert float(q12) == 0.0 and float(dd) == 1.0
    assert float(lmin) == pytest.approx(0.5) and float(lmax) == pytest.approx(2.0)
    assert float(q21) == pytest.approx(0.3 / 1.5)


def test_negative_discriminant_rejected():
    with pytest.raises(InvalidArgument):
        diagonalize(0.0, 1.0, -1.0, 0.0)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_quadratic_form_symmetry(vec):
    disc, lmin, lmax, q12, q21, _ = diagonalize(-0.2, -0.7, -1.1, -1.9)
    a, b, c, d = vec
    t = quadratic_form_terms(np.exp(-lmin), np.exp(-lmax), q12, q21, a, b, c, d)
    assert t["value"] == pytest.approx(t["ac"] * a * c + t["bd"] * b * d + t["bc"] * b * c
                                       + t["ad"] * a * d, abs=1e-12)
    # bilinear in the two vectors
    t2 = quadratic_form_terms(np.exp(-lmin), np.exp(-lmax), q12, q21, 2 * a, 2 * b, c, d)
    assert t2["value"] == pytest.approx(2 * t["value"], abs=1e-12)


def test_matrix_facts_on_candidates():
    for params, kw in demo.VALID_CANDIDATES:
        prof = demo.make_candidate(kw)
        mA = build_matrix_A(prof, params)
        assert all(mA.facts(strict_offdiag=prof.theta > 0).values())


# cutoff and Hardy ---------------------------------------------------------------

def test_cutoff_partition():
    r = np.linspace(0.0, 5.0, 5001)
    chi, dchi = cutoff(r, 1.0)
    assert np.all(chi[r <= 1.0] == 1.0) and np.all(chi[r >= 2.0] == 0.0)
    assert np.all((chi >= 0) & (chi <= 1)) and np.all(np.diff(chi) <= 0)
    assert np.max(np.abs(dchi)) <= 1.5 + 1e-12
    assert np.allclose(np.gradient(chi, r), dchi, atol=5e-3)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_hardy_near_sharp(d):
    assert hardy_constant(d) == pytest.approx((2.0 / (d - 2)) ** 2)
    # r^{-(d-2)/2 + s} with a cutoff approaches equality as s -> 0
    r = np.geomspace(1e-8, 4.0, 6000)
    s = 0.01
    chi, dchi = cutoff(r, 1.0)
    g = r ** (-(d - 2) / 2 + s)
    gp = (-(d - 2) / 2 + s) * g / r
    lhs, rhs = hardy_sides(r, chi * g, dchi * g + chi * gp, d)
    assert 0.8 < lhs / rhs <= 1.0


# ledger and verdicts --------------------------------------------------------------

def test_zero_candidate_is_trivial():
    params, prof, eps = demo.zero_candidate()
    rep = audit_shrinker(prof, params, eps)
    assert rep.verdict == VERDICT_TRIVIAL and rep.trivial
    assert rep.message.startswith("trivial")


def test_valid_candidates_contradict():
    for params, kw in demo.VALID_CANDIDATES:
        rep = audit_shrinker(demo.make_candidate(kw), params, kw["eps"])
        led = rep.ledger
        assert rep.verdict == VERDICT_NONEXISTENCE, rep.message
        assert led.lhs >= led.lhs_lower and led.rhs <= led.rhs_upper
        assert rep.margin > led.tail_budget


def test_violations_named():
    for params, kw, name in demo.VIOLATING_CANDIDATES:
        rep = audit_shrinker(demo.make_candidate(kw), params, kw["eps"])
        assert rep.verdict == VERDICT_HYPOTHESES and name in rep.violated
        assert name in rep.message


def test_ledger_scales_quadratically():
    params, kw = demo.VALID_CANDIDATES[0]
    base = demo.make_candidate(kw)
    small = demo.make_candidate({**kw, "theta_a": kw["theta_a"] / 10, "u_a": kw["u_a"] / 10})
    a = energy_ledger(base, build_matrix_A(base, params), params, kw["eps"])
    b = energy_ledger(small, build_matrix_A(small, params), params, kw["eps"])
    assert b.lhs / a.lhs == pytest.approx(1e-2, rel=1e-3)


@given(k=st.floats(0.5, 3.0), eps=st.floats(0.5, 2.0), th=st.floats(1e-6, 5e-4),
       ratio=st.floats(-0.9, 0.9))
@settings(max_examples=25, deadline=None)
def test_small_candidates_always_contradict(k, eps, th, ratio):
    kw = dict(p_inf=1e-6, cav_exponent=k, eps=eps, theta_a=th, u_a=ratio * th)
    rep = audit_shrinker(demo.make_candidate(kw, 1024), PARAMS, eps)
    assert rep.verdict == VERDICT_NONEXISTENCE, rep.message


def test_params_outside_audit_scope():
    prof = synthetic_candidate(1e-6, 2.0, 1.0, 1e-4, 1e-4)
    with pytest.raises(InvalidArgument, match="c_v"):
        audit_shrinker(prof, PhysicalParams.degenerate(alpha=0.5, c_v=5.0), 1.0)
    with pytest.raises(InvalidArgument, match="alpha"):
        audit_shrinker(prof, PhysicalParams(3, 1.0, 0.5, 1.0, 1.0, 1.0, 0.0), 1.0)


def test_hypothesis_suprema_values():
    prof = demo.make_candidate(demo.VALID_CANDIDATES[0][1])
    sups = hypothesis_suprema(prof, PARAMS, 1.0)
    assert sups["<r>^2 Theta"] == pytest.approx(1e-4, rel=1e-12)
    assert sups["|U/(r Theta)|"] == pytest.approx(1e-4, rel=1e-10)
