import numpy as np
import pytest

from ssprofile import demo
from ssprofile.continuation import (chain_slacks, envelope_curves, extend_global,
                                    find_bootstrap_constants, fit_asymptotics,
                                    mass_identity_gap, measure_envelopes, verify_chain)
from ssprofile.core import ProfileTriple, build_grid
from ssprofile.errors import FitDegenerate, Infeasible, InvalidArgument

PARAMS, BD = demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY


def test_chain_constants_feasible_with_slack():
    c = find_bootstrap_constants(PARAMS, BD)
    assert verify_chain(c, PARAMS, BD) == []
    sl = chain_slacks(c.m1, c.m1p, c.m2, PARAMS, BD)
    assert len(sl) == 13
    assert min(sl.values()) == pytest.approx(c.slack, abs=1e-9)
    assert sl[c.tightest] == pytest.approx(c.slack, abs=1e-9)


def test_chain_infeasible_names_tightest():
    with pytest.raises(Infeasible) as info:
        find_bootstrap_constants(PARAMS, BD.replace(a_slope=0.4))
    assert info.value.tightest == "A << M1"


def test_shrinking_constants_breaks_chain():
    c = find_bootstrap_constants(PARAMS, BD)
    assert verify_chain(type(c)(c.m1 * 1e-8, c.m1p, c.m2, c.slack, c.tightest), PARAMS, BD)


def test_global_profile_shape(demo_global):
    r = demo_global.r
    assert np.all(np.diff(r) > 0) and r[-1] == pytest.approx(demo.EXPANDER_GRID["r_max"])
    assert np.all(demo_global.p > 0) and np.all(demo_global.theta > 0)
    assert np.all(0.5 * r - demo_global.u > 0)
    # the density is nondecreasing: the flow expands out of a near vacuum
    assert np.all(np.diff(demo_global.log_p) >= -1e-14)


def test_mass_identity(demo_global):
    assert mass_identity_gap(demo_global, PARAMS) < 1e-9


def test_envelopes_single_constants(demo_global):
    env = measure_envelopes(demo_global, PARAMS, BD)
    curves = envelope_curves(demo_global.r, PARAMS, BD)
    assert np.all(np.abs(demo_global.u) <= env["U"] * curves["U"] * (1 + 1e-12))
    assert np.all(demo_global.p >= env["P_lower"] * curves["P"] * (1 - 1e-12))
    assert np.all(demo_global.p <= env["P_upper"] * curves["P"] * (1 + 1e-12))
    assert env["P_upper"] / env["P_lower"] < 10.0


def test_numba_and_numpy_continuations_agree(demo_inner):
    grid, inner, _ = demo_inner
    outer = grid.outer[:600]
    a = extend_global(inner, PARAMS, BD, outer_nodes=outer, use_numba=True)
    b = extend_global(inner, PARAMS, BD, outer_nodes=outer, use_numba=False)
    for name in ("p", "u", "theta", "u_prime", "theta_prime"):
        assert np.allclose(getattr(a, name), getattr(b, name), rtol=1e-12, atol=0.0), name


def test_extend_requires_outer_start(demo_inner):
    grid, inner, _ = demo_inner
    with pytest.raises(InvalidArgument):
        extend_global(inner, PARAMS, BD, outer_nodes=grid.outer[1:])


def synthetic_tail(n=400):
    g = build_grid(1.0, 100.0, 16, n, 1.0)
    r = g.nodes
    p = 2.0 + 3.0 / r ** 2
    u = (1.0 + 1.0 / r ** 2) / r
    th = (0.5 + 2.0 / r ** 2) / r ** 2
    return ProfileTriple(g, p, u, th, np.gradient(u, r), np.gradient(th, r), {})


def test_fit_recovers_known_tail():
    prof = synthetic_tail()
    fit = fit_asymptotics(prof, (20.0, 100.0))
    assert fit.p_inf == pytest.approx(2.0, rel=1e-10)
    assert fit.u_inf == pytest.approx(1.0, rel=1e-10)
    assert fit.theta_inf == pytest.approx(0.5, rel=1e-10)
    for rate in (fit.rate_p, fit.rate_u, fit.rate_theta):
        assert rate == pytest.approx(2.0, abs=0.05)


def test_fit_window_checks():
    prof = synthetic_tail()
    with pytest.raises(InvalidArgument):
        fit_asymptotics(prof, (50.0, 100.0))
    with pytest.raises(FitDegenerate):
        fit_asymptotics(synthetic_tail(16), (25.0, 100.0))
