"""Shrinker non-existence audit.

Builds the integrating-factor matrix A(r) for a candidate shrinker profile,
diagonalizes it, checks the bounds used to control the off-diagonal parts and
assembles the weighted energy ledger LHS >= LHS_lower > RHS_upper >= RHS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (ProfileTriple, RadialGrid, build_grid, cumulative_integral,
                   differentiate)
from .errors import DivergentRatio, InvalidArgument

TRIVIAL_TOL = 1e-10
DEFAULT_THRESHOLD = 1e-3

VERDICT_TRIVIAL = "trivial"
VERDICT_NONEXISTENCE = "no-shrinker"
VERDICT_HYPOTHESES = "hypotheses-fail"
VERDICT_INCONCLUSIVE = "inconclusive"

_MESSAGES = {
    VERDICT_TRIVIAL: "trivial: consistent with theorem",
    VERDICT_NONEXISTENCE: "no such shrinker: contradiction established numerically",
    VERDICT_HYPOTHESES: "hypotheses fail",
    VERDICT_INCONCLUSIVE: "inconclusive: ledger ordering not established",
}


# ---------------------------------------------------------------------------
# cavitation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CavitationCheck:
    eps: float
    p_eps: float
    lambda_cap: float
    ratio_moment: float
    ratio_mass: float


def _cavitation_ratios(r, p, alpha):
    soft = p ** (1.0 - alpha)
    i_soft, _ = cumulative_integral(soft, r, weight="1")
    i_soft_r, _ = cumulative_integral(soft, r, weight="r")
    i_p, _ = cumulative_integral(p, r, weight="1")
    with np.errstate(divide="ignore", invalid="ignore"):
        first = r * i_soft / i_soft_r
        second = i_p / (p ** alpha * i_soft)
    return first, second


def check_cavitation(r, p, eps, alpha):
    """Lambda = sup over (0, eps) of both cavitation ratios, and P_eps = inf of P on [eps, oo).

    Raises DivergentRatio when a ratio is undefined or keeps growing when the
    grid is refined (compared against the every-other-node subgrid).
    """
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (r[0] < eps <= r[-1]):
        raise InvalidArgument(f"eps={eps} must lie inside the grid")
    far = r >= eps * (1.0 - 1e-12)
    if np.any(p[far] <= 0.0):
        raise InvalidArgument("P must be positive on [eps, r_max]")
    if np.any(p < 0.0):
        raise InvalidArgument("P must be nonnegative")
    near = r < eps * (1.0 - 1e-12)
    first, second = _cavitation_ratios(r, p, alpha)
    if not near.any():
        raise InvalidArgument("no grid nodes below eps")
    if not (np.all(np.isfinite(first[near])) and np.all(np.isfinite(second[near]))):
        raise DivergentRatio("cavitation ratio undefined on (0, eps): P vanishes there")
    sup1 = float(np.max(first[near]))
    sup2 = float(np.max(second[near]))
    idx = np.arange(0, len(r), 2)
    c1, c2 = _cavitation_ratios(r[idx], p[idx], alpha)
    coarse = near[idx]
    coarse_sup = max(float(np.max(c1[coarse])), float(np.max(c2[coarse])))
    fine_sup = max(sup1, sup2)
    if fine_sup > 1e3 and fine_sup > 1.5 * coarse_sup:
        raise DivergentRatio(f"cavitation ratio grows under refinement ({coarse_sup:.3g} -> "
                             f"{fine_sup:.3g})")
    return CavitationCheck(float(eps), float(np.min(p[far])), fine_sup, sup1, sup2)


# ---------------------------------------------------------------------------
# the integrating-factor matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatrixA:
    r: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    disc: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    q12: np.ndarray
    q21: np.ndarray
    d_factor: np.ndarray

    @property
    def e_min(self):
        return np.exp(-self.lambda_min)

    @property
    def e_max(self):
        return np.exp(-self.lambda_max)

    @property
    def e_gap(self):
        """e_min - e_max without cancellation (lambda_max - lambda_min = sqrt(disc))."""
        return -self.e_min * np.expm1(-np.sqrt(self.disc))

    def matrix(self):
        """A(r) as an (n, 2, 2) array."""
        out = np.empty((len(self.r), 2, 2))
        out[:, 0, 0], out[:, 0, 1] = self.a11, self.a12
        out[:, 1, 0], out[:, 1, 1] = self.a21, self.a22
        return out

    def weight_matrix(self):
        """exp(A(r)) = Q^{-1} diag(e^{-lambda_min}, e^{-lambda_max}) Q, built by matrix products.

        Written as e_max I + (e_min - e_max) Q^{-1} diag(1, 0) Q so that nodes
        with nearly equal eigenvalues and a large q entry keep full precision.
        """
        n = len(self.r)
        q = np.empty((n, 2, 2))
        q[:, 0, 0], q[:, 0, 1], q[:, 1, 0], q[:, 1, 1] = 1.0, self.q12, self.q21, 1.0
        qinv = np.empty((n, 2, 2))
        qinv[:, 0, 0], qinv[:, 0, 1] = 1.0, -self.q12
        qinv[:, 1, 0], qinv[:, 1, 1] = -self.q21, 1.0
        qinv /= self.d_factor[:, None, None]
        e1 = np.zeros((n, 2, 2))
        e1[:, 0, 0] = 1.0
        out = self.e_gap[:, None, None] * (qinv @ e1 @ q)
        out[:, 0, 0] += self.e_max
        out[:, 1, 1] += self.e_max
        return out

    def facts(self, strict_offdiag=None):
        """Nodewise sign facts; off-diagonal strictness only where ``strict_offdiag`` is True."""
        strict = np.ones(len(self.r), bool) if strict_offdiag is None else strict_offdiag
        prod = self.q12 * self.q21
        diag = 1.0 + prod / self.d_factor
        return {
            "a12<0": bool(np.all(np.where(strict, self.a12 < 0.0, self.a12 <= 0.0))),
            "a21<0": bool(np.all(self.a21 < 0.0)),
            "disc>0": bool(np.all(self.disc > 0.0)),
            "lambda_max>lambda_min": bool(np.all(self.lambda_max > self.lambda_min)),
            "|D|>=1": bool(np.all(np.abs(self.d_factor) >= 1.0 - 1e-14)),
            "a22<a11": bool(np.all(self.a22 < self.a11)),
            "1/2<=1+q12q21/D<=1": bool(np.all((diag >= 0.5 - 1e-14) & (diag <= 1.0 + 1e-14))),
            "0<-q12q21<=1": bool(np.all(np.where(strict, -prod > 0.0, -prod >= 0.0)
                                     & (-prod <= 1.0 + 1e-14))),
        }


def _require_shrinker_params(params):
    if params.alpha >= 1.0:
        raise InvalidArgument("alpha: the shrinker audit covers 0 < alpha < 1 only")
    if params.visc <= 0.0:
        raise InvalidArgument("2*mu0 + lambda0 must be positive")
    if params.c_v > params.kappa / params.visc:
        raise InvalidArgument(
            f"c_v: need c_v <= kappa/(2*mu0 + lambda0) = {params.kappa / params.visc!r}")


def diagonalize(a11, a12, a21, a22):
    """Eigen-decomposition A = Q^{-1} diag(-lambda_min, -lambda_max) Q with unit-diagonal Q.

    Rows of Q are left eigenvectors. The off-diagonal entries use the
    cancellation-free forms q12 = 2 a12 / (a11 - a22 + sqrt(disc)) and
    q21 = -2 a21 / (a11 - a22 + sqrt(disc)).
    """
    a11, a12, a21, a22 = (np.asarray(x, dtype=float) for x in (a11, a12, a21, a22))
    gap = a11 - a22
    disc = gap * gap + 4.0 * a12 * a21
    if np.any(disc < 0.0):
        raise InvalidArgument("eigen-degenerate: negative discriminant")
    s = np.sqrt(disc)
    lam_max = -0.5 * (a11 + a22 - s)
    lam_min = -0.5 * (a11 + a22 + s)
    den = gap + s
    safe = np.where(den > 0.0, den, 1.0)
    q12 = np.where(den > 0.0, 2.0 * a12 / safe, 0.0)
    q21 = np.where(den > 0.0, -2.0 * a21 / safe, 0.0)
    return disc, lam_min, lam_max, q12, q21, 1.0 - q12 * q21


def build_matrix_A(profile, params):
    _require_shrinker_params(params)
    r = profile.r
    p, u, th = profile.p, profile.u, profile.theta
    gap = 0.5 * r + u
    if np.any(gap <= 0.0):
        raise InvalidArgument("candidate violates r/2 + U > 0")
    c = params.visc
    soft = p ** (1.0 - params.alpha)
    a11 = -(params.c_v / params.kappa) * cumulative_integral(p * gap, r)[0]
    a12 = -(params.gas_r / params.kappa) * cumulative_integral(p * th, r)[0]
    a21 = -(params.gas_r / c) * cumulative_integral(soft, r)[0]
    a22 = -(1.0 / c) * cumulative_integral(soft * gap, r)[0]
    disc, lmin, lmax, q12, q21, dd = diagonalize(a11, a12, a21, a22)
    return MatrixA(r, a11, a12, a21, a22, disc, lmin, lmax, q12, q21, dd)


def quadratic_form_terms(e_min, e_max, q12, q21, a, b, c, d, e_gap=None):
    """<Q^{-1} diag(e_min, e_max) Q (a, b), (c, d)> split into its four coefficients.

    Works on scalars or arrays. ``e_gap`` is e_min - e_max when known more
    accurately than the difference (see MatrixA.e_gap). Returns a dict with the
    coefficients of ac, bd, bc, ad and the assembled value.
    """
    dd = 1.0 - q12 * q21
    k = q12 * q21 / dd
    gap = e_min - e_max if e_gap is None else e_gap
    c_ac = e_min + k * gap
    c_bd = e_max - k * gap
    c_bc = gap * q12 / dd
    c_ad = -gap * q21 / dd
    value = c_ac * a * c + c_bd * b * d + c_bc * b * c + c_ad * a * d
    return {"ac": c_ac, "bd": c_bd, "bc": c_bc, "ad": c_ad, "value": value}


def cutoff(r, eps):
    """C^1 cubic smoothstep: 1 on [0, eps], 0 beyond 2 eps, |chi'| <= 1.5/eps."""
    t = np.clip((np.asarray(r, dtype=float) - eps) / eps, 0.0, 1.0)
    chi = 1.0 - t * t * (3.0 - 2.0 * t)
    dchi = -6.0 * t * (1.0 - t) / eps
    return chi, dchi


# ---------------------------------------------------------------------------
# bounds on Q, the cavitation ratio and the velocity
# ---------------------------------------------------------------------------

def _ratio(num, den):
    num = np.abs(np.asarray(num, dtype=float))
    den = np.abs(np.asarray(den, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0),
                       np.where(num > 0.0, np.inf, 0.0))
    return out


def velocity_bound(profile):
    """b = sup |U/r|."""
    return float(np.max(np.abs(profile.u / profile.r)))


def verify_q_bounds(mA, cav, profile, params):
    """Check each bound on q12, q21, D, disc and lambda_min nodewise.

    Returns {name: {"value": worst observed/bound ratio, "pass": bool}}. A
    ratio <= 1 means the bound holds at every node.
    """
    r = mA.r
    c = params.visc
    b = velocity_bound(profile)
    near = r < cav.eps
    sup_pa_th = float(np.max(profile.p ** params.alpha * profile.theta))
    out = {}

    def put(name, observed, bound):
        ratio = _ratio(observed, bound)
        worst = float(np.max(ratio)) if ratio.size else 0.0
        out[name] = {"value": worst, "pass": bool(worst <= 1.0 + 1e-9)}

    if b >= 0.5:
        out["b<1/2"] = {"value": b, "pass": False}
        return out
    out["b<1/2"] = {"value": b, "pass": True}
    put("q12 far", mA.q12, 2.0 * c * params.gas_r * cav.lambda_cap * sup_pa_th
        / (params.kappa * (0.5 - b) * r))
    put("q21 far", mA.q21, 2.0 * params.gas_r * cav.lambda_cap / ((0.5 - b) * r))
    put("q12 near", mA.q12, np.full_like(r, math.sqrt(c / params.kappa * sup_pa_th)))
    put("|D|>=1", np.ones_like(r), np.abs(mA.d_factor))
    put("exp(sqrt(disc))<=2 on (0,eps)", np.exp(np.sqrt(mA.disc[near])),
        np.full(int(near.sum()), 2.0))
    put("exp(lambda_min)<=2 on (0,eps)", np.exp(mA.lambda_min[near]),
        np.full(int(near.sum()), 2.0))
    put("c_v remark", np.full_like(r, params.c_v),
        0.5 * params.kappa / (c * profile.p ** params.alpha))
    return out


def hardy_constant(d):
    return (2.0 / (d - 2.0)) ** 2


def hardy_sides(r, f, f_prime, d):
    """(int (f/r)^2 r^{d-1} dr, C' int f'^2 r^{d-1} dr) for f vanishing at the far end."""
    lhs = cumulative_integral((f / r) ** 2, r, weight="r^{d-1}", d=d)[0][-1]
    rhs = hardy_constant(d) * cumulative_integral(f_prime ** 2, r, weight="r^{d-1}", d=d)[0][-1]
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# energy ledger
# ---------------------------------------------------------------------------

def _radial(values, r, d):
    """Cumulative int_0^r values s^{d-1} ds (the radial volume measure without |S^{d-1}|)."""
    f = np.asarray(values, dtype=float)
    return cumulative_integral(f, r, weight="r^{d-1}", d=d, startup_exponent=_startup(r, f))[0]


def _startup(r, f):
    # integrands here are smooth at the origin; guard against sign flips and zeros
    if f[0] != 0.0 and f[1] != 0.0 and f[0] * f[1] > 0.0:
        return max(math.log(f[1] / f[0]) / math.log(r[1] / r[0]), -0.5)
    return 0.0


def _tail(values, r, d):
    """Estimate of int_{r_max}^oo from the log-log slope of the last two samples."""
    g = np.abs(np.asarray(values[-2:], dtype=float)) * r[-2:] ** (d - 1)
    if g[-1] == 0.0:
        return 0.0
    if g[-2] == 0.0:
        return math.inf
    k = -math.log(g[-1] / g[-2]) / math.log(r[-1] / r[-2])
    if k <= 1.05:
        return math.inf
    return float(g[-1] * r[-1] / (k - 1.0))


class _Integrator:
    """Integrals over (0, eps) and (eps, r_max) with a running tail budget."""

    def __init__(self, r, d, eps):
        self.r, self.d, self.eps = r, d, eps
        self.tail = 0.0

    def split(self, values):
        F = _radial(values, self.r, self.d)
        at_eps = float(np.interp(self.eps, self.r, F))
        self.tail += _tail(values, self.r, self.d)
        return at_eps, float(F[-1]) - at_eps

    def total(self, values):
        a, b = self.split(values)
        return a + b


@dataclass
class EnergyLedger:
    lhs1: float
    lhs2: float
    lhs_lower: float
    rhs1: float
    rhs2: float
    rhs3: float
    rhs_upper: float
    sub_integrals: dict
    hardy_constant: float
    tail_budget: float
    lower_ok: bool = True
    upper_ok: bool = True

    @property
    def lhs(self):
        return self.lhs1 + self.lhs2

    @property
    def rhs(self):
        return self.rhs1 + self.rhs2 + self.rhs3

    def as_dict(self):
        return {"lhs1": self.lhs1, "lhs2": self.lhs2, "lhs_lower": self.lhs_lower,
                "rhs1": self.rhs1, "rhs2": self.rhs2, "rhs3": self.rhs3,
                "rhs_upper": self.rhs_upper, "sub_integrals": dict(self.sub_integrals),
                "hardy_constant": self.hardy_constant, "tail_budget": self.tail_budget,
                "lhs>=lhs_lower": self.lower_ok, "rhs<=rhs_upper": self.upper_ok}


def evaluate_LHS(profile, mA, eps, d):
    """Exact weighted Dirichlet form split at eps, and its a priori lower bound."""
    ig = _Integrator(mA.r, d, eps)
    tp, up = profile.theta_prime, profile.u_prime
    qf = quadratic_form_terms(mA.e_min, mA.e_max, mA.q12, mA.q21, tp, up, tp, up, mA.e_gap)
    lhs1, lhs2 = ig.split(qf["value"])
    near_lo, _ = ig.split(mA.e_max * (tp * tp + up * up))
    _, far_th = ig.split(mA.e_min * tp * tp)
    _, far_u = ig.split(mA.e_max * up * up)
    lower = near_lo + 0.25 * (far_th + far_u)
    return lhs1, lhs2, lower, ig.tail


def _nonlinear_terms(profile, params):
    r, p, u, th = profile.r, profile.p, profile.u, profile.theta
    up = profile.u_prime
    d, al, kap = params.d, params.alpha, params.kappa
    pa = p ** al
    div = up + (d - 1) * u / r
    drift = al * div / (0.5 * r + u)
    n1 = (-(params.gas_r / kap) * p * th * (d - 1) * u / r
          + 2.0 * params.mu0 * pa / kap * (up * up + (d - 1) * u * u / (r * r))
          + params.lambda0 * pa / kap * div * div
          - params.visc * pa / kap * drift * up * u
          - params.lambda0 * pa / kap * drift * (d - 1) * u * u / r)
    n2 = -drift * up - params.lambda0 / params.visc * drift * (d - 1) * u / r
    return n1, n2


def evaluate_RHS(profile, mA, params, eps):
    """Every sub-integral of the three right-hand-side parts, plus the a priori upper bound."""
    r, p, u, th = profile.r, profile.p, profile.u, profile.theta
    d = params.d
    ig = _Integrator(r, d, eps)
    e1, e2 = mA.e_min, mA.e_max
    dd = mA.d_factor
    qf = quadratic_form_terms(e1, e2, mA.q12, mA.q21, 1.0, 1.0, 1.0, 1.0, mA.e_gap)
    m11, m22, m12, m21 = qf["ac"], qf["bd"], qf["bc"], qf["ad"]
    soft = p ** (1.0 - params.alpha) / params.visc  # P/(2 mu + lambda)
    chi, _ = cutoff(r, eps)
    cv_k = params.c_v / params.kappa

    sub = {}
    sub["R11"] = ig.total(-m22 * (d - 1) * u * u / (r * r))
    r12 = -m12 * (d - 1) * u * th / (r * r)
    sub["R12s"] = ig.total(chi * chi * r12)
    sub["R12l"] = ig.total((1.0 - chi * chi) * r12)
    sub["R12"] = ig.total(r12)
    sub["R21_theta"] = ig.total(-cv_k * m11 * p * th * th)
    sub["R21_u"] = ig.total(-0.5 * m22 * soft * u * u)
    sub["R22"] = ig.total(-(cv_k * m21 * p + 0.5 * m12 * soft) * u * th)
    r23 = e1 * mA.q12 / dd * soft * u * th
    sub["R23s"], sub["R23l"] = ig.split(r23)
    n1, n2 = _nonlinear_terms(profile, params)
    sub["N1"] = ig.total((m11 * th + m21 * u) * n1)
    sub["N2"] = ig.total((m12 * th + m22 * u) * n2)

    rhs1 = sub["R11"] + sub["R12"]
    rhs2 = sub["R21_theta"] + sub["R21_u"] + sub["R22"]
    rhs3 = sub["N1"] + sub["N2"]
    tp, up = profile.theta_prime, profile.u_prime
    upper = (ig.total(e1 * tp * tp) + ig.total(e2 * up * up)
             - ig.total(e2 * soft * u * u)) / 20.0 - 0.25 * cv_k * ig.total(e1 * p * th * th)
    return rhs1, rhs2, rhs3, upper, sub, ig.tail


def energy_ledger(profile, mA, params, eps):
    lhs1, lhs2, lower, tail_l = evaluate_LHS(profile, mA, eps, params.d)
    rhs1, rhs2, rhs3, upper, sub, tail_r = evaluate_RHS(profile, mA, params, eps)
    scale = max(abs(lhs1 + lhs2), abs(lower), abs(upper), 1e-300)
    led = EnergyLedger(lhs1, lhs2, lower, rhs1, rhs2, rhs3, upper, sub,
                       hardy_constant(params.d), tail_l + tail_r)
    led.lower_ok = bool(led.lhs >= lower - 1e-12 * scale)
    led.upper_ok = bool(led.rhs <= upper + 1e-12 * scale)
    return led


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

HYP_THETA = "<r>^2 Theta"
HYP_DENSITY = "P^(1-alpha)"
HYP_RATIO = "|U/(r Theta)|"
HYP_SLOPE_RATIO = "|U'/(r Theta')| on r>eps"


def hypothesis_suprema(profile, params, eps):
    """The four suprema of the smallness hypothesis, keyed by name."""
    r = profile.r
    far = r > eps
    return {
        HYP_THETA: float(np.max((1.0 + r * r) * profile.theta)),
        HYP_DENSITY: float(np.max(profile.p ** (1.0 - params.alpha))),
        HYP_RATIO: float(np.max(_ratio(profile.u, r * profile.theta))),
        HYP_SLOPE_RATIO: float(np.max(_ratio(profile.u_prime[far],
                                             r[far] * profile.theta_prime[far])))
        if far.any() else 0.0,
    }


def is_trivial(profile, tol=TRIVIAL_TOL):
    p = profile.p
    return bool(np.max(np.abs(profile.u)) <= tol and np.max(np.abs(profile.theta)) <= tol
                and np.max(p) - np.min(p) <= tol * max(np.max(np.abs(p)), 1.0))


@dataclass
class AuditReport:
    hypotheses: list
    cavitation: CavitationCheck | None
    q_bounds: dict
    facts: dict
    ledger: EnergyLedger
    verdict: str
    violated: list
    margin: float
    relative_margin: float
    trivial: bool
    extras: dict = field(default_factory=dict)

    @property
    def message(self):
        msg = _MESSAGES[self.verdict]
        if self.violated:
            msg += ": " + ", ".join(self.violated)
        return msg

    def as_dict(self):
        cav = None
        if self.cavitation is not None:
            c = self.cavitation
            cav = {"eps": c.eps, "p_eps": c.p_eps, "lambda_cap": c.lambda_cap,
                   "ratio_moment": c.ratio_moment, "ratio_mass": c.ratio_mass}
        return {"hypotheses": self.hypotheses, "cavitation": cav, "q_bounds": self.q_bounds,
                "matrix_facts": self.facts, "ledger": self.ledger.as_dict(),
                "verdict": self.verdict, "message": self.message, "violated": self.violated,
                "margin": self.margin, "relative_margin": self.relative_margin,
                "trivial": self.trivial, **self.extras}


def audit_shrinker(profile, params, eps, smallness_threshold=DEFAULT_THRESHOLD):
    """Run every hypothesis check and the energy ledger on a shrinker candidate."""
    _require_shrinker_params(params)
    if smallness_threshold <= 0.0:
        raise InvalidArgument("smallness_threshold must be positive")
    r = profile.r
    if np.any(0.5 * r + profile.u <= 0.0):
        raise InvalidArgument("candidate violates r/2 + U > 0")

    sups = hypothesis_suprema(profile, params, eps)
    hyps = [{"name": k, "value": v, "threshold": smallness_threshold,
             "pass": bool(v <= smallness_threshold)} for k, v in sups.items()]
    violated = [h["name"] for h in hyps if not h["pass"]]

    try:
        cav = check_cavitation(r, profile.p, eps, params.alpha)
    except DivergentRatio:
        cav = None
        violated.append("cavitation Lambda")

    mA = build_matrix_A(profile, params)
    facts = mA.facts(strict_offdiag=profile.theta > 0.0)
    q_bounds = verify_q_bounds(mA, cav, profile, params) if cav is not None else {}
    violated += [k for k, v in q_bounds.items() if not v["pass"]]
    violated += [f"matrix fact {k}" for k, v in facts.items() if not v]

    ledger = energy_ledger(profile, mA, params, eps)
    margin = ledger.lhs_lower - ledger.rhs_upper
    rel = margin / max(abs(ledger.lhs_lower), 1e-300) if ledger.lhs_lower != 0.0 else 0.0
    trivial = is_trivial(profile)

    if violated:
        verdict = VERDICT_HYPOTHESES
    elif trivial:
        verdict = VERDICT_TRIVIAL
    elif (ledger.lower_ok and ledger.upper_ok and margin > 0.0
          and ledger.tail_budget < margin):
        verdict = VERDICT_NONEXISTENCE
    else:
        verdict = VERDICT_INCONCLUSIVE
    return AuditReport(hyps, cav, q_bounds, facts, ledger, verdict, violated,
                       float(margin), float(rel), trivial,
                       {"b": velocity_bound(profile),
                        "hypothesis_sum": float(sum(sups.values()))})


# ---------------------------------------------------------------------------
# synthetic candidates
# ---------------------------------------------------------------------------

def candidate_grid(eps, r_max=1e4, inner=512, outer=1536, grading=1.02):
    return build_grid(eps, r_max, inner, outer, grading)


def synthetic_candidate(p_inf, cav_exponent, eps, theta_a, u_a, grid=None,
                        p_scale=None):
    """Cavitating P with Theta = theta_a/(1 + r^2) and U = u_a r Theta.

    P = p_inf rho^k/(1 + rho^k) with rho = r/p_scale (p_scale defaults to
    eps); k = 0 gives the constant density p_inf.
    """
    g = candidate_grid(eps) if grid is None else grid
    r = g.nodes if isinstance(g, RadialGrid) else np.asarray(g, dtype=float)
    s = eps if p_scale is None else p_scale
    k = float(cav_exponent)
    if k == 0.0:
        p = np.full_like(r, p_inf)
        pp = np.zeros_like(r)
    else:
        rho = (r / s) ** k
        p = p_inf * rho / (1.0 + rho)
        pp = p_inf * k * rho / (r * (1.0 + rho) ** 2)
    th = theta_a / (1.0 + r * r)
    thp = -2.0 * theta_a * r / (1.0 + r * r) ** 2
    u = u_a * r * th
    up = u_a * (th + r * thp)
    grid_obj = g if isinstance(g, RadialGrid) else RadialGrid(r, 1, 1.0, float(r[-1]))
    return ProfileTriple(grid_obj, p, u, th, up, thp,
                         {"kind": "synthetic", "p_inf": p_inf, "cav_exponent": k,
                          "eps": eps, "theta_a": theta_a, "u_a": u_a}, pp, None)


def profile_from_samples(r, p, u, theta, u_prime=None, theta_prime=None):
    """Wrap sampled candidate fields; missing derivatives are differentiated numerically."""
    r = np.asarray(r, dtype=float)
    up = differentiate(u, r) if u_prime is None else np.asarray(u_prime, dtype=float)
    tp = differentiate(theta, r) if theta_prime is None else np.asarray(theta_prime, dtype=float)
    grid = RadialGrid(r, 1, 1.0, float(r[-1]))
    return ProfileTriple(grid, np.asarray(p, float), np.asarray(u, float),
                         np.asarray(theta, float), up, tp, {"kind": "samples"})
