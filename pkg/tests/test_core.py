import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ssprofile.core import (BoundaryData, PhysicalParams, ProfileTriple, build_grid,
                            cumulative_integral, decay_integral, differentiate,
                            forced_theta0_value, profile_to_csv, read_profile_csv,
                            write_profile_csv)
from ssprofile.errors import InvalidArgument, StartupDivergence


def test_params_validation():
    PhysicalParams.degenerate(d=4, alpha=0.3)
    with pytest.raises(InvalidArgument, match="lambda0"):
        PhysicalParams(3, 0.5, 1.0, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(InvalidArgument, match="alpha"):
        PhysicalParams.degenerate(alpha=1.5)
    with pytest.raises(InvalidArgument):
        PhysicalParams.degenerate(d=2)
    with pytest.raises(InvalidArgument):
        PhysicalParams(3, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0)


def test_boundary_checks():
    p = PhysicalParams(3, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0)
    good = BoundaryData(1e-3, 1e-2, 1e-2, forced_theta0_value(p, 1e-3), 0.5)
    good.check(p)
    with pytest.raises(InvalidArgument, match="theta0"):
        good.replace(theta0=1.1 * good.theta0).check(p)
    good.replace(theta0=1.1 * good.theta0).check(p, forced_theta0=False)
    with pytest.raises(InvalidArgument, match="eps_norm"):
        BoundaryData(1e-3, 1e-2, 1e-2, 1e-3, 0.9).check(PhysicalParams.degenerate(alpha=0.5))
    with pytest.raises(InvalidArgument):
        BoundaryData(0.5, 1e-2, 1e-2, 1e-3, 0.5)


def test_grid_layout():
    g = build_grid(0.01, 100.0, 64, 128, 1.05)
    r = g.nodes
    assert len(r) == 192 and g.inner_count == 64
    assert r[63] == 0.01 and r[-1] == 100.0
    h = np.diff(np.concatenate(([0.0], g.inner)))
    assert np.allclose(h[1:] / h[:-1], 1.05)
    assert np.allclose(np.diff(np.log(g.outer)), math.log(100.0 / 0.01) / 128)


def test_hybrid_grid_spacing_saturates():
    g = build_grid(1e-3, 1e4, 32, 2000, 1.0, outer_length=100.0)
    s = np.log(g.outer) + g.outer / 100.0
    assert np.allclose(np.diff(s), np.diff(s)[0], rtol=1e-9)
    h = np.diff(g.outer)
    # spacing bounded by about length * ds beyond the crossover
    assert h[-1] < 1.01 * 100.0 * np.diff(s)[0]


def test_grid_halved_and_refined():
    g = build_grid(0.01, 10.0, 64, 64, 1.02)
    assert g.halved().nodes[-1] == 10.0 and 0.01 in g.halved().nodes
    f = g.refined()
    assert len(f) == 2 * len(g) - 1 and np.all(f.nodes[::2] == g.nodes)


def test_grid_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        build_grid(0.01, 10.0, 8, 64, 1.02)
    with pytest.raises(InvalidArgument):
        build_grid(0.01, 10.0, 64, 64, 3.0)


@given(k=st.floats(-0.9, 4.0), m=st.sampled_from([0.0, 1.0, 2.0, 4.0]))
@settings(max_examples=60, deadline=None)
def test_power_law_integrals_are_exact(k, m):
    r = np.geomspace(1e-6, 3.0, 80)
    F, rep = cumulative_integral(r ** k, r, weight=m)
    exact = r ** (k + m + 1.0) / (k + m + 1.0)
    assert np.allclose(F, exact, rtol=1e-10)
    assert rep.err_est <= 1e-9 * abs(exact[-1])


@given(c=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-6), w=st.floats(-1.0, 3.0))
@settings(max_examples=40, deadline=None)
def test_integral_is_homogeneous_and_monotone(c, w):
    # power-law interpolation makes the rule nonlinear in f, but it is 1-homogeneous
    r = np.geomspace(1e-3, 5.0, 200)
    f = np.sin(r) + 2.0
    F = cumulative_integral(f, r, w)[0]
    assert np.allclose(cumulative_integral(c * f, r, w)[0], c * F, rtol=1e-13)
    assert np.all(np.diff(F) > 0)


def test_quadrature_converges_within_estimate():
    exact, _ = quad(lambda s: np.cos(s) * (2 + s), 0.0, 4.0)
    errs = []
    for n in (400, 800, 1600):
        r = np.linspace(1e-3, 4.0, n)
        F, rep = cumulative_integral(np.cos(r) * (2 + r), r, startup_exponent=0.0)
        errs.append(abs(F[-1] - exact))
        assert errs[-1] <= rep.err_est
    assert errs[0] / errs[-1] > 8.0


def test_startup_divergence():
    r = np.geomspace(1e-4, 1.0, 40)
    with pytest.raises(StartupDivergence):
        cumulative_integral(r ** -2.0, r)
    with pytest.raises(InvalidArgument):
        cumulative_integral(np.full(40, np.nan), r)


def test_decay_integral_matches_quad():
    errs = []
    for n in (3000, 6000):
        r = np.linspace(1e-3, 6.0, n)
        got = decay_integral(r, 2.0, np.cos(r), r ** 2)
        worst = 0.0
        for frac in (0.2, 0.5, 1.0):
            i = int(frac * (n - 1))
            ri = r[i]
            ref, _ = quad(lambda s: s ** 2 * np.cos(s) * math.exp(s * s - ri * ri), r[0], ri,
                          limit=200, epsabs=1e-13, epsrel=1e-12)
            worst = max(worst, abs(got[i] - ref) / abs(ref))
        errs.append(worst)
    assert errs[0] < 1e-4 and errs[0] / errs[1] > 3.5


def test_differentiate_second_order():
    errs = []
    for n in (100, 200):
        r = np.geomspace(0.1, 3.0, n)
        errs.append(np.max(np.abs(differentiate(np.sin(r), r) - np.cos(r))))
    assert errs[0] / errs[1] > 3.5


def test_profile_csv_round_trip(tmp_path):
    g = build_grid(0.1, 10.0, 32, 32, 1.01)
    r = g.nodes
    prof = ProfileTriple(g, 1 + r, 0.1 * r, 1 / (1 + r), 0.1 + 0 * r, -1 / (1 + r) ** 2, {},
                         np.ones_like(r), np.log1p(r))
    path = tmp_path / "p.csv"
    write_profile_csv(prof, path)
    back = read_profile_csv(path, delta=0.1)
    for name in ("p", "u", "theta", "u_prime", "theta_prime", "p_prime", "log_p"):
        assert np.array_equal(getattr(back, name), getattr(prof, name)), name
    assert back.grid.inner_count == 32
    assert profile_to_csv(back) == path.read_text()
