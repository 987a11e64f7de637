"""Pointwise residuals of the expander and shrinker profile equations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import columns_csv, differentiate
from .errors import DenominatorVanishing

_TINY = 1e-300


@dataclass(frozen=True, eq=False)
class ResidualReport:
    r: np.ndarray
    eq_mass: np.ndarray
    eq_momentum: np.ndarray
    eq_energy: np.ndarray
    rel_mass: np.ndarray
    rel_momentum: np.ndarray
    rel_energy: np.ndarray
    max_rel: dict
    max_abs: dict
    window: tuple

    def to_csv(self):
        return columns_csv(["r", "res_mass", "res_mom", "res_energy"],
                           [self.r, self.eq_mass, self.eq_momentum, self.eq_energy])

    def summary(self):
        return {"max_rel": dict(self.max_rel), "max_abs": dict(self.max_abs),
                "window": list(self.window)}


def _density_slope(profile):
    if profile.p_prime is not None:
        return profile.p_prime
    if profile.log_p is not None:
        return profile.p * differentiate(profile.log_p, profile.r)
    return profile.p * differentiate(np.log(profile.p), profile.r)


def _assemble(terms):
    stack = np.vstack(terms)
    total = stack.sum(axis=0)
    scale = np.max(np.abs(stack), axis=0)
    rel = np.where(scale > _TINY, np.abs(total) / np.where(scale > _TINY, scale, 1.0),
                   np.abs(total))
    return total, rel


def _terms(profile, params, sign):
    """Additive terms of mass, momentum and energy equations; sign = -1 expander, +1 shrinker."""
    r = profile.r
    d = params.d
    al = params.alpha
    c = params.visc
    lam = params.lambda0
    cv, kap, gas_r = params.c_v, params.kappa, params.gas_r
    p = profile.p
    u = profile.u
    up = profile.u_prime
    th = profile.theta
    thp = profile.theta_prime
    pp = _density_slope(profile)
    upp = differentiate(up, r)
    thpp = differentiate(thp, r)
    pa = p ** al
    div = up + (d - 1) * u / r
    gap = 0.5 * r + sign * u
    if np.any(gap <= 0.0):
        i = int(np.argmin(gap))
        raise DenominatorVanishing("r/2 -/+ U <= 0", r=float(r[i]))
    s = sign  # drift terms carry -1/2 for expanders, +1/2 for shrinkers
    mass = [s * 0.5 * r * pp, pp * u, p * up, p * (d - 1) * u / r]

    if sign < 0:
        pa_p = al * p ** (al - 1.0) * pp
        visc_extra = [-c * pa_p * up, -lam * pa_p * (d - 1) * u / r]
        visc_extra_e = [-c * pa_p * up * u, -lam * pa_p * (d - 1) * u * u / r]
    else:
        fac = al * div / gap * pa
        visc_extra = [c * fac * up, lam * fac * (d - 1) * u / r]
        visc_extra_e = [c * fac * up * u, lam * fac * (d - 1) * u * u / r]

    lap = [upp, (d - 1) * up / r, -(d - 1) * u / (r * r)]
    mom = ([s * 0.5 * p * u, s * 0.5 * r * pp * u, s * 0.5 * r * p * up,
            pp * u * u, 2.0 * p * u * up, (d - 1) * p * u * u / r,
            gas_r * pp * th, gas_r * p * thp]
           + [-c * pa * t for t in lap] + visc_extra)

    e = 0.5 * u * u + cv * th
    ep = u * up + cv * thp
    h = u * p * (e + gas_r * th)
    hp = up * p * (e + gas_r * th) + u * pp * (e + gas_r * th) + u * p * (ep + gas_r * thp)
    energy = ([s * p * e, s * 0.5 * r * pp * e, s * 0.5 * r * p * ep, hp, (d - 1) * h / r,
               -kap * thpp, -kap * (d - 1) * thp / r,
               -2.0 * params.mu0 * pa * up * up,
               -2.0 * params.mu0 * pa * (d - 1) * u * u / (r * r),
               -lam * pa * div * div]
              + [-c * pa * t * u for t in lap] + visc_extra_e)
    return mass, mom, energy


def _report(profile, params, sign, window):
    r = profile.r
    mass, mom, energy = _terms(profile, params, sign)
    out = [_assemble(t) for t in (mass, mom, energy)]
    lo, hi = (r[0], r[-1]) if window is None else window
    sel = np.zeros(len(r), dtype=bool)
    sel[1:-1] = True
    sel &= (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    names = ("mass", "momentum", "energy")
    max_rel = {n: float(np.max(o[1][sel])) if sel.any() else 0.0 for n, o in zip(names, out)}
    max_abs = {n: float(np.max(np.abs(o[0][sel]))) if sel.any() else 0.0
               for n, o in zip(names, out)}
    return ResidualReport(r, out[0][0], out[1][0], out[2][0], out[0][1], out[1][1], out[2][1],
                          max_rel, max_abs, (float(lo), float(hi)))


def residual_expander(profile, params, window=None):
    return _report(profile, params, -1.0, window)


def residual_shrinker(profile, params, window=None):
    return _report(profile, params, 1.0, window)
