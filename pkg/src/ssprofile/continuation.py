"""Continuation past delta, the bootstrap monitor and far-field fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ProfileTriple, RadialGrid
from .errors import (DenominatorVanishing, FitDegenerate, Infeasible, IntegrationFailure,
                     InvalidArgument)

MUCH_LESS = 0.1


@dataclass(frozen=True)
class BootstrapConstants:
    m1: float
    m1p: float
    m2: float
    slack: float = math.nan
    tightest: str = ""


@dataclass(frozen=True)
class AsymptoticFit:
    p_inf: float
    u_inf: float
    theta_inf: float
    rate_p: float
    rate_u: float
    rate_theta: float
    fit_window: tuple
    residuals: dict


# ---------------------------------------------------------------------------
# constant chain
# ---------------------------------------------------------------------------

def chain_inequalities(m1, m1p, m2, params, bd):
    """Every inequality of the constant chain as name -> (lhs, rhs, limit).

    Each holds when lhs <= limit * rhs. ``limit`` is MUCH_LESS for the
    "much smaller than" relations and 1 for the plain ones. Arguments may be
    numpy arrays (broadcast together).
    """
    a, pd, t0, dl = bd.a_slope, bd.p_delta, bd.theta0, bd.delta
    al = params.alpha
    pw = pd ** (1.0 - al)
    log_term = math.log(1.0 / (dl * dl * pw))
    pos = m1 ** 3 / pd ** (1.0 - 2.0 * al) + m1 * m1p / pw
    ml = MUCH_LESS
    return {
        "M2 << M1": (m2, m1, ml),
        "M1 << M1'": (m1, m1p, ml),
        "M1' << 1": (m1p, 1.0, ml),
        "A << M1": (a, m1, ml),
        "Theta0 << M2": (t0, m2, ml),
        "A^2 << P_delta M2": (a * a, pd * m2, ml),
        "M1' log(1/(delta^2 P_delta^(1-alpha))) <= 1": (m1p * log_term, 1.0, 1.0),
        "(P_delta^(1-alpha)/A) M1' <= 1": (pw * m1p, a, 1.0),
        "M2 << M1 P_delta^(1/2+alpha)": (m2, m1 * pd ** (0.5 + al), ml),
        "M1 M1' << P_delta M2": (m1 * m1p, pd * m2, ml),
        "M1^3 << P_delta^(1-2alpha) Theta0": (m1 ** 3, pd ** (1.0 - 2.0 * al) * t0, ml),
        "M1 M1' << Theta0 P_delta^(1-alpha)": (m1 * m1p, t0 * pw, ml),
        "positivity: M1^3/P^(1-2alpha) + M1 M1'/P^(1-alpha) << Theta0": (pos, t0, ml),
    }


def chain_slacks(m1, m1p, m2, params, bd):
    """log10 slack of each inequality (>= 0 means it holds)."""
    out = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        for name, (lhs, rhs, lim) in chain_inequalities(m1, m1p, m2, params, bd).items():
            out[name] = np.log10(lim * np.asarray(rhs, dtype=float)) - np.log10(
                np.asarray(lhs, dtype=float))
    return out


def verify_chain(consts, params, bd):
    """Names of violated inequalities (empty when the triple is admissible)."""
    sl = chain_slacks(consts.m1, consts.m1p, consts.m2, params, bd)
    return [k for k, v in sl.items() if not (float(v) >= -1e-12)]


def find_bootstrap_constants(params, bd, per_decade=4, lowest=-60.0):
    """Log-lattice search for (M1, M1', M2) maximising the smallest slack.

    Ties go to the lexicographically first lattice point (largest M1', then
    M1, then M2), so the result is deterministic.
    """
    exps = np.arange(0.0, lowest - 1e-9, -1.0 / per_decade)
    grid = 10.0 ** exps
    best = None
    for m1p in grid:
        m1 = grid[grid <= MUCH_LESS * m1p * (1 + 1e-12)]
        if m1.size == 0:
            continue
        m1g, m2g = np.meshgrid(m1, grid, indexing="ij")
        sl = chain_slacks(m1g, m1p, m2g, params, bd)
        names = list(sl)
        stack = np.stack([np.broadcast_to(sl[n], m1g.shape) for n in names])
        stack = np.where(np.isnan(stack), -np.inf, stack)
        worst = stack.min(axis=0)
        idx = np.unravel_index(int(np.argmax(worst)), worst.shape)
        val = float(worst[idx])
        if best is None or val > best[0] + 1e-12:
            k = int(np.argmin(stack[(slice(None),) + idx]))
            best = (val, float(m1p), float(m1g[idx]), float(m2g[idx]), names[k])
    if best is None:
        raise Infeasible("empty lattice")
    val, m1p, m1, m2, tight = best
    if val < 0.0:
        raise Infeasible(f"no admissible (M1, M1', M2) on the lattice; tightest violated "
                         f"inequality: {tight} (log10 shortfall {-val:.3g})", tightest=tight)
    return BootstrapConstants(m1, m1p, m2, val, tight)


# ---------------------------------------------------------------------------
# bootstrap monitor
# ---------------------------------------------------------------------------

def bootstrap_terms(profile, consts, bd, params):
    r = profile.r
    d = params.d
    su = (1.0 + bd.p_delta ** (0.5 - 0.5 * params.alpha) * r) ** 2
    st = (1.0 + math.sqrt(bd.p_delta) * r) ** 2
    u = profile.u
    div = profile.u_prime + (d - 1) * u / r
    return {
        "U": su * np.abs(u) / (consts.m1 * r),
        "U'+(d-1)U/r": su * np.abs(div) / consts.m1p,
        "Theta": st * profile.theta / consts.m2,
        "Theta'": st * np.abs(profile.theta_prime) / (consts.m2 * bd.p_delta * r),
    }


def bootstrap_monitor(profile, consts, bd, params):
    """Running supremum Z(r) and the verdict Z(delta) <= 1/2 and sup Z <= 1/2."""
    terms = bootstrap_terms(profile, consts, bd, params)
    total = sum(terms.values())
    z = np.maximum.accumulate(total)
    r = profile.r
    i_delta = int(np.searchsorted(r, bd.delta * (1 - 1e-12)))
    i_delta = min(i_delta, len(r) - 1)
    z_delta = float(z[i_delta])
    z_sup = float(z[-1])
    return z, {"z_delta": z_delta, "z_sup": z_sup,
               "verdict": bool(z_delta <= 0.5 and z_sup <= 0.5),
               "dominant": max(terms, key=lambda k: float(np.max(terms[k])))}


# ---------------------------------------------------------------------------
# forward integration
# ---------------------------------------------------------------------------

def characteristic_scales(bd, r_max):
    a = max(bd.a_slope, 1e-300)
    t0 = max(bd.theta0, 1e-300)
    return np.array([1.0, a * max(r_max, 1.0), a, t0, t0 / bd.delta])


def extend_global(inner, params, bd, r_max=None, outer_nodes=None, rtol=1e-10,
                  blowup_factor=1e6, use_numba=None):
    """Continue an inner profile from delta to r_max with Dormand-Prince 5(4).

    Either ``outer_nodes`` (starting at delta) or ``r_max`` must be given;
    with only r_max a 512-node log-uniform outer grid is used.
    """
    r_in = inner.r
    delta = float(r_in[-1])
    if outer_nodes is None:
        if r_max is None:
            raise InvalidArgument("give r_max or outer_nodes")
        outer_nodes = delta * np.exp(np.linspace(0.0, math.log(r_max / delta), 513))
        outer_nodes[-1] = r_max
    outer_nodes = np.asarray(outer_nodes, dtype=float)
    if abs(outer_nodes[0] - delta) > 1e-12 * delta:
        raise InvalidArgument("outer grid must start at delta")
    q0 = 0.0 if inner.log_p is None else float(inner.log_p[-1])
    y0 = np.array([q0, inner.u[-1], inner.u_prime[-1], inner.theta[-1], inner.theta_prime[-1]])
    if 0.5 * delta - y0[1] <= 0.0:
        raise DenominatorVanishing("r/2 - U <= 0 at delta", r=delta)
    p_ref = float(inner.p[-1] / math.exp(q0))
    prm = params.as_array(p_ref)
    scales = characteristic_scales(bd, float(outer_nodes[-1]))
    k = float(inner.p_prime[-1] * delta / inner.p[-1]) if inner.p_prime is not None else 1.0
    scale0 = scales.copy()
    scale0[0] = max(abs(k), 1e-300)
    blowup = blowup_factor * scales
    blowup[0] = 700.0
    ys, status, r_stop, steps = _kernels.integrate_expander(outer_nodes, y0, prm, rtol,
                                                           scale0, blowup, use_numba)
    if status == 1:
        raise DenominatorVanishing("r/2 - U reached zero during continuation", r=float(r_stop))
    if status == 2:
        raise IntegrationFailure(f"blow-up detected at r = {r_stop:.6g}", r=float(r_stop),
                                 kind="blow-up")
    rr = outer_nodes
    q = ys[:, 0]
    u, up, th, thp = ys[:, 1], ys[:, 2], ys[:, 3], ys[:, 4]
    p = p_ref * np.exp(q)
    pp = p * (up + (params.d - 1) * u / rr) / (0.5 * rr - u)
    nodes = np.concatenate((r_in, rr[1:]))
    grid = RadialGrid(nodes, len(r_in), 1.0, float(rr[-1]))

    def cat(a_in, a_out):
        return np.concatenate((a_in, a_out[1:]))

    startup = dict(inner.startup)
    startup["ode_steps"] = int(steps)
    return ProfileTriple(grid, cat(inner.p, p), cat(inner.u, u), cat(inner.theta, th),
                         cat(inner.u_prime, up), cat(inner.theta_prime, thp), startup,
                         cat(inner.p_prime, pp), cat(inner.log_p, q))


# ---------------------------------------------------------------------------
# envelopes and asymptotics
# ---------------------------------------------------------------------------

def envelope_curves(r, params, bd):
    """Bound curves of the global estimates, without their constants."""
    al = params.alpha
    a = bd.a_slope
    su = 1.0 + bd.p_delta ** (0.5 - 0.5 * al) * r
    st = 1.0 + math.sqrt(bd.p_delta) * r
    expo = 2.0 * params.d * a / (1.0 - 2.0 * a)
    return {
        "P": bd.p_delta * np.minimum(1.0, (r / bd.delta) ** expo),
        "U": a * r / su ** 2,
        "U'": a / su ** 2,
        "Theta": 1.0 / st ** 2,
        "Theta'": math.sqrt(bd.p_delta) * r / st ** 2,
    }


def measure_envelopes(profile, params, bd):
    """Measured constants C with |X| <= C * envelope at every node; P gets a two-sided pair."""
    r = profile.r
    env = envelope_curves(r, params, bd)
    ratio_p = profile.p / env["P"]
    out = {
        "P_lower": float(np.min(ratio_p)),
        "P_upper": float(np.max(ratio_p)),
        "U": float(np.max(np.abs(profile.u) / env["U"])),
        "U'": float(np.max(np.abs(profile.u_prime) / env["U'"])),
        "Theta": float(np.max(profile.theta / env["Theta"])),
        "Theta'": float(np.max(np.abs(profile.theta_prime) / env["Theta'"])),
        "Theta_min": float(np.min(profile.theta)),
    }
    return out


def _line_fit(x, y):
    mat = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(mat, y, rcond=None)
    return coef


def _fit_one(r, vals):
    """Fit vals ~ c0 + c1 r^-2 + c2 r^-4; the rate comes from a log-log fit of vals - c0."""
    mat = np.vstack([np.ones_like(r), r ** -2.0, r ** -4.0]).T
    scale = np.max(np.abs(vals)) or 1.0
    coef, *_ = np.linalg.lstsq(mat, vals / scale, rcond=None)
    coef = coef * scale
    resid = vals - mat @ coef
    dev = vals - coef[0]
    if np.all(dev == 0.0):
        return float(coef[0]), math.nan, 0.0
    with np.errstate(divide="ignore"):
        ok = np.abs(dev) > 0
        slope = _line_fit(np.log(r[ok]), np.log(np.abs(dev[ok])))[1]
    rel = float(np.max(np.abs(resid)) / (np.max(np.abs(vals)) or 1.0))
    return float(coef[0]), float(-slope), rel


def fit_asymptotics(profile, fit_window=None):
    r = profile.r
    if fit_window is None:
        fit_window = (0.6 * r[-1], r[-1])
    lo, hi = fit_window
    if hi < 4.0 * lo and fit_window != (0.6 * r[-1], r[-1]):
        raise InvalidArgument("fit window needs r_hi >= 4 r_lo")
    sel = (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    if int(np.sum(sel)) < 8:
        raise FitDegenerate(f"fit window [{lo:.4g}, {hi:.4g}] holds fewer than 8 nodes")
    rw = r[sel]
    if profile.log_p is not None:
        # fit on ln P, whose deviation carries full precision; convert back
        p_ref = float(profile.p[-1] / math.exp(profile.log_p[-1]))
        c_q, rate_p, res_p = _fit_one(rw, profile.log_p[sel])
        p_inf = p_ref * math.exp(c_q)
    else:
        p_inf, rate_p, res_p = _fit_one(rw, profile.p[sel])
    u_inf, rate_u, res_u = _fit_one(rw, rw * profile.u[sel])
    t_inf, rate_t, res_t = _fit_one(rw, rw ** 2 * profile.theta[sel])
    return AsymptoticFit(p_inf, u_inf, t_inf, rate_p, rate_u, rate_t, (float(lo), float(hi)),
                         {"P": res_p, "U": res_u, "Theta": res_t})


def mass_identity_gap(profile, params):
    """max |ln P(r) - ln P(delta) - int_delta^r (U'+(d-1)U/s)/(s/2-U) ds| beyond delta."""
    i_d = profile.grid.inner_count - 1
    r = profile.r[i_d:]
    u = profile.u[i_d:]
    div = profile.u_prime[i_d:] + (params.d - 1) * u / r
    f = div / (0.5 * r - u)
    v = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(r) * (f[1:] + f[:-1]))))
    lp = np.log(profile.p[i_d:])
    return float(np.max(np.abs((lp - lp[0]) - v)))
