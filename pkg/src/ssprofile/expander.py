"""Fixed-point construction of expander profiles on the inner interval (0, delta].

The iterate is stored as deviations from the ball centre (A r, Theta0):

    x        = U/r - A
    up_dev   = U' - A
    uor_p    = (U/r)'
    th_dev   = Theta - Theta0
    th_p     = Theta'

which keeps every difference between iterates free of cancellation, even
when A and Theta0 are many orders of magnitude apart. The density is carried
as q = ln(P / P_delta); P' is never differenced but read off the mass
equation, P'/P = (U' + (d-1)U/r) / (r/2 - U).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (KernelSet, ProfileTriple, RadialGrid, REGIME_DEGENERATE,
                   REGIME_LINEAR, cumulative_integral, decay_integral)
from .errors import (BallExit, DenominatorVanishing, InvalidArgument, NoConvergence,
                     NonfiniteOutput)

CONTRACTION_FAIL = 0.95


@dataclass(frozen=True, eq=False)
class InnerState:
    r: np.ndarray
    a: float
    theta0: float
    x: np.ndarray
    up_dev: np.ndarray
    uor_p: np.ndarray
    th_dev: np.ndarray
    th_p: np.ndarray

    @property
    def u(self):
        return self.r * (self.a + self.x)

    @property
    def u_prime(self):
        return self.a + self.up_dev

    @property
    def theta(self):
        return self.theta0 + self.th_dev

    def minus(self, other):
        """Field-wise difference, as an InnerState centred at zero."""
        return InnerState(self.r, 0.0, 0.0, self.x - other.x, self.up_dev - other.up_dev,
                          self.uor_p - other.uor_p, self.th_dev - other.th_dev,
                          self.th_p - other.th_p)


def seed_state(r, bd):
    """The ball centre (A r, Theta0)."""
    z = np.zeros_like(r)
    return InnerState(r, bd.a_slope, bd.theta0, z, z.copy(), z.copy(), z.copy(), z.copy())


def state_from_fields(r, bd, u, u_prime, theta, theta_prime, uor_prime=None):
    x = u / r - bd.a_slope
    if uor_prime is None:
        uor_prime = (u_prime - u / r) / r
    return InnerState(r, bd.a_slope, bd.theta0, x, u_prime - bd.a_slope, uor_prime,
                      theta - bd.theta0, theta_prime)


@dataclass(frozen=True)
class IterationState:
    iterate_index: int
    norm_distance: float
    contraction_estimate: float
    ball_distance: float
    u: np.ndarray | None = None
    theta: np.ndarray | None = None

    def as_record(self):
        c = self.contraction_estimate
        return {"iter": self.iterate_index, "distance": self.norm_distance,
                "contraction": None if not math.isfinite(c) else c}


@dataclass(frozen=True)
class SmallnessReport:
    terms: dict
    composite_alpha_lt_1: float
    composite_alpha_eq_1: float
    regime: str
    threshold: float
    passed: bool
    division_flag: bool

    @property
    def composite(self):
        if self.regime == REGIME_DEGENERATE:
            return self.composite_alpha_lt_1
        return self.composite_alpha_eq_1


def check_smallness(params, bd, threshold=0.1):
    a, dl, pd, t0 = bd.a_slope, bd.delta, bd.p_delta, bd.theta0
    pw = pd ** (1.0 - params.alpha)
    division = t0 == 0.0
    if division:
        ratio_terms = {"P^(1-a)*Theta0/A": pw * t0 / a if a > 0 else 0.0,
                       "A*delta/Theta0": math.inf if a > 0 else 0.0,
                       "A^2/Theta0": math.inf if a > 0 else 0.0}
    else:
        ratio_terms = {"P^(1-a)*Theta0/A": pw * t0 / a if a > 0 else math.inf,
                       "A*delta/Theta0": a * dl / t0,
                       "A^2/Theta0": a * a / t0}
    terms = {"A": a, "P_delta": pd, "delta": dl, "P^(1-a)*delta^2": pw * dl * dl}
    terms.update(ratio_terms)
    terms["P_delta*A"] = pd * a
    lt1 = float(sum(terms.values()))
    eq1 = a * math.log(1.0 / dl) + pd + dl if dl < 1.0 else math.inf
    regime = params.regime
    comp = lt1 if regime == REGIME_DEGENERATE else eq1
    div_flag = division and regime == REGIME_DEGENERATE
    return SmallnessReport(terms, lt1, eq1, regime, threshold,
                           bool(comp < threshold and not div_flag), div_flag)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _geometry(state, bd, params):
    r = state.r
    a = bd.a_slope
    w = a + state.x                       # U/r
    gap = 0.5 - w                         # (r/2 - U)/r
    if np.any(gap <= 0.0):
        i = int(np.argmin(gap))
        raise DenominatorVanishing("r/2 - U <= 0 on the inner grid", r=float(r[i]))
    d = params.d
    div = d * a + state.up_dev + (d - 1) * state.x     # U' + (d-1)U/r
    rqp = div / gap                                     # r q'
    return w, gap, div, rqp


def compute_V(state, grid_r, bd, params):
    """q = V - V(delta) = ln(P/P_delta) at the inner nodes, together with r*q'."""
    _, _, _, rqp = _geometry(state, bd, params)
    raw = decay_integral(grid_r, -1.0, rqp, np.zeros_like(grid_r))
    return raw - raw[-1], rqp


def compute_Vtilde(state, grid_r, bd, params):
    """V~ from 0, with the closed-form piece below r_0 for U/r = A + x0 (r/r0)**g."""
    _, gap, _, _ = _geometry(state, bd, params)
    phi = grid_r * state.uor_p / gap
    x0 = float(state.x[0])
    start = -math.log1p(-x0 / (0.5 - bd.a_slope))
    vt = decay_integral(grid_r, -1.0, phi, np.zeros_like(grid_r), start)
    return vt, state.uor_p / gap


def compute_W(p, grid_r, params, k_loc=0.0):
    """W = (1/(2mu0+lambda0)) int_0^r P**(1-alpha) s/2 ds."""
    if params.alpha == 1.0:
        return grid_r ** 2 / (4.0 * params.visc)
    pw = p ** (1.0 - params.alpha)
    start = pw[0] * grid_r[0] ** 2 / (2.0 + (1.0 - params.alpha) * k_loc)
    out = decay_integral(grid_r, 1.0, pw, np.zeros_like(grid_r), start)
    return out / (2.0 * params.visc)


def compute_Z(p, grid_r, params, k_loc=0.0):
    """Z = (C_V/kappa) int_0^r P s/2 ds."""
    start = p[0] * grid_r[0] ** 2 / (2.0 + k_loc)
    out = decay_integral(grid_r, 1.0, p, np.zeros_like(grid_r), start)
    return 0.5 * params.c_v / params.kappa * out


def _bracket(state, p, rqp, bd, params):
    """Integrand of F_U, split into the 1/r-singular vacuum part and the rest (times r)."""
    r = state.r
    d, al, gas_r = params.d, params.alpha, params.gas_r
    w = bd.a_slope + state.x
    pw = p ** (1.0 - al)
    u = r * w
    up = state.u_prime
    th = state.theta
    # each term multiplied by r so the m = -1 kernel sees a bounded integrand
    t1 = -0.5 * al * r * r * pw * d * w * w / (0.5 - w)
    t2 = pw * (rqp * r * w * w * r + 2.0 * u * up * r)
    t3 = (d - 1) * pw * w * w * r * r
    t4_reg = gas_r * pw * state.th_p * r
    t4_sing = gas_r * pw * rqp * th
    return t1 + t2 + t3 + t4_reg, t4_sing


def compute_F_U(state, kernels_vt, p, rqp, bd, params):
    """F_U and F_U' in the degenerate regime; returns (F_U - d c A, F_U')."""
    r = state.r
    al = params.alpha
    c = params.visc
    d = params.d
    a = bd.a_slope
    vt, vt_p = kernels_vt
    reg, sing = _bracket(state, p, rqp, bd, params)
    k_loc = float(rqp[0])
    start = reg[0] / (2.0 + (1.0 - al) * k_loc)
    if k_loc > 0.0:
        # int_0^r0 R P^(1-alpha) q' Theta = R Theta P^(1-alpha)/(1-alpha) for vacuum at 0
        start += params.gas_r * p[0] ** (1.0 - al) * state.theta[0] / (1.0 - al)
    integral = decay_integral(r, -1.0, reg + sing, al * vt, start)
    fu_dev = c * d * a * np.expm1(-al * vt) + integral
    fu = c * d * a + fu_dev
    g = (reg + sing) / r
    fu_p = -al * vt_p * fu + g
    return fu_dev, fu_p


def compute_F_U_alpha1(state, p, q, rqp, bd, params):
    """F_U - d c A and F_U' in the alpha = 1 regime."""
    r = state.r
    d = params.d
    w = bd.a_slope + state.x
    u = r * w
    k_loc = float(rqp[0])
    phi1 = (d - 1) * w * w
    i1 = decay_integral(r, 1.0, phi1, q, phi1[0] * r[0] ** 2 / (2.0 + k_loc))
    phi2 = (d - 1) * rqp * w
    start2 = (d - 1) * w[0] if k_loc > 0.0 else 0.0
    i2 = decay_integral(r, -1.0, phi2, q, start2)
    fu = params.gas_r * state.theta + u * u + i1 + 2.0 * params.mu0 * i2
    fu_p = (params.gas_r * state.th_p + 2.0 * u * state.u_prime
            + (-rqp / r * i1 + (d - 1) * u * u / r)
            + 2.0 * params.mu0 * (-rqp / r * i2 + rqp / r * (d - 1) * w))
    return fu - params.visc * d * bd.a_slope, fu_p


def _u_from_forcing(state, fu_dev, fu_p, w_fun, w_p, bd, params):
    """Solve c (r^{d-1} e^W U)' = r^{d-1} e^W F_U for the new (x, U', (U/r)')."""
    r = state.r
    d = params.d
    c = params.visc
    a = bd.a_slope
    fu = c * d * a + fu_dev
    phi = r * (w_p * fu + fu_p)                  # integrand times r, m = d - 1
    start = phi[0] * r[0] ** d / d
    jr = decay_integral(r, float(d - 1), phi, w_fun, start)   # e^{-W} J
    tail = jr / r ** d
    x_new = fu_dev / (c * d) - tail / (c * d)
    u_over_r = a + x_new
    uor_p = tail / (c * r) - w_p * u_over_r
    up_dev = fu_dev / c - (d - 1) * x_new - w_p * r * u_over_r
    return x_new, up_dev, uor_p


def _dissipation(p, w, up, div, params):
    pa = p ** params.alpha
    d = params.d
    return (2.0 * params.mu0 * pa * (up * up + (d - 1) * w * w)
            + params.lambda0 * pa * div * div)


def theta_source(state, p, bd, params):
    """Right side Q of kappa*(r^{d-1} e^Z Theta')' = r^{d-1} e^Z Q."""
    w, _, div, _ = _geometry(state, bd, params)
    r = state.r
    th = state.theta
    up = state.u_prime
    cv = params.c_v
    return (-cv * p * th + cv * p * r * w * state.th_p + params.gas_r * p * th * div
            - _dissipation(p, w, up, div, params))


def _theta_from_source(state, q_src, z, bd, params):
    r = state.r
    d = params.d
    start = q_src[0] * r[0] ** d / d
    g = decay_integral(r, float(d - 1), q_src, z, start)
    th_p = g / (params.kappa * r ** (d - 1))
    th_dev, _ = cumulative_integral(th_p, r, "1", startup_exponent=1.0)
    return th_dev, th_p


def compute_F_Theta(state, p, z_fun, bd, params):
    """Forcing F_Theta in the Theta representation with the (d-2) r^{2-d} kernel.

    With Y = Theta + U^2/(2 C_V) that representation is equivalent to
    kappa Y' + (d-2) kappa (Y - Theta0)/r + (r/2) P C_V Y = F_Theta, which is
    evaluated here from the state, so plugging it back reproduces Theta.
    """
    r = state.r
    d = params.d
    cv, kap = params.c_v, params.kappa
    u = state.u
    up = state.u_prime
    y_dev = state.th_dev + u * u / (2.0 * cv)
    return (kap * state.th_p + kap * u * up / cv + (d - 2) * kap * y_dev / r
            + 0.5 * r * p * cv * (state.theta + u * u / (2.0 * cv)))


def compute_F_Theta_displayed(state, p, bd, params):
    """The alternative closed-form forcing built from U, P, Theta and U' alone."""
    r = state.r
    d = params.d
    cv, kap, gas_r = params.c_v, params.kappa, params.gas_r
    c, lam = params.visc, params.lambda0
    u = state.u
    up = state.u_prime
    th = state.theta
    pa = p ** params.alpha
    flux = u * p * (0.5 * u * u + cv * th) + u * p * gas_r * th
    i_flux, _ = cumulative_integral(flux, r, "1", startup_exponent=1.0)
    i_visc, _ = cumulative_integral(pa * u * up, r, "1", startup_exponent=1.0)
    i_lam, _ = cumulative_integral(pa * u * u / r, r, "1", startup_exponent=1.0)
    return (flux + (d - 2) / r * i_flux
            - c * (pa * u * up + (d - 2) / r * i_visc)
            - lam * (d - 1) * (pa * u * u / r + (d - 2) / r * i_lam)
            + kap / cv * (u * up + (d - 2) / (2.0 * r) * u * u))


def theta_from_F_Theta(r, f_theta, p, u, z_fun, bd, params):
    """Theta from the (d-2) r^{2-d}-kernel representation for a given forcing."""
    d = params.d
    k = decay_integral(r, float(d - 3), np.ones_like(r), z_fun,
                       r[0] ** (d - 2) / (d - 2))
    j_start = f_theta[0] * r[0] ** (d - 1) / d
    j = decay_integral(r, float(d - 2), f_theta, z_fun, j_start)
    return ((d - 2) * bd.theta0 * k / r ** (d - 2) - u * u / (2.0 * params.c_v)
            + j / (params.kappa * r ** (d - 2)))


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhiResult:
    state: InnerState
    p: np.ndarray
    q: np.ndarray
    p_prime: np.ndarray
    kernels: KernelSet
    slope: float


def _density(state, bd, params):
    q, rqp = compute_V(state, state.r, bd, params)
    p = bd.p_delta * np.exp(q)
    return q, rqp, p


def apply_Phi(state, params, bd, regime=None, slope_tol=1e-6):
    """One application of the fixed-point map to an inner state."""
    regime = regime or params.regime
    r = state.r
    q, rqp, p = _density(state, bd, params)
    k_loc = float(rqp[0])
    d = params.d
    if regime == REGIME_DEGENERATE:
        vt, vt_p = compute_Vtilde(state, r, bd, params)
        w_fun = compute_W(p, r, params, k_loc)
        fu_dev, fu_p = compute_F_U(state, (vt, vt_p), p, rqp, bd, params)
    else:
        vt = None
        w_fun = compute_W(p, r, params)
        fu_dev, fu_p = compute_F_U_alpha1(state, p, q, rqp, bd, params)
        a = bd.a_slope
        slope = (params.gas_r * bd.theta0
                 + 2.0 * params.mu0 * (d - 1) * (a + state.x[0])) / (params.visc * d)
        if a > 0.0 and abs(slope / a - 1.0) > slope_tol:
            raise BallExit(
                f"startup slope constraint: the map sends U'(0) = A = {a!r} to {slope!r}; "
                "Theta0 must equal (2 mu0 + d lambda0) A / R")
    w_p = r * p ** (1.0 - params.alpha) / (2.0 * params.visc)
    x_new, up_dev, uor_p = _u_from_forcing(state, fu_dev, fu_p, w_fun, w_p, bd, params)
    z = compute_Z(p, r, params, k_loc)
    q_src = theta_source(state, p, bd, params)
    th_dev, th_p = _theta_from_source(state, q_src, z, bd, params)
    new = InnerState(r, bd.a_slope, bd.theta0, x_new, up_dev, uor_p, th_dev, th_p)
    for name in ("x", "up_dev", "uor_p", "th_dev", "th_p"):
        if not np.all(np.isfinite(getattr(new, name))):
            raise NonfiniteOutput(f"map produced non-finite {name}; check grid and parameters")
    fu = params.visc * d * bd.a_slope + fu_dev
    f_theta = compute_F_Theta(state, p, z, bd, params)
    kern = KernelSet(q, vt, w_fun, z, fu, f_theta, regime)
    p_prime = p * rqp / r
    slope = bd.a_slope + float(x_new[0])
    return PhiResult(new, p, q, p_prime, kern, slope)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def norm_weights(r, bd, params, regime=None):
    regime = regime or params.regime
    if regime == REGIME_DEGENERATE:
        a, t0 = bd.a_slope, bd.theta0
        expo = (1.0 - params.alpha - bd.eps_norm) * params.d * a
        pw = bd.p_delta ** (1.0 - params.alpha)
        wq = a * r * (r / bd.delta) ** (-expo) / (pw * t0)
        return {"u_over_r": 1.0, "u_prime": 1.0, "uor_prime": wq,
                "theta": a / t0, "theta_prime_over_r": a / t0}
    return {"u_over_r": 1.0, "u_prime": 0.0, "uor_prime": r ** (1.0 - bd.eps_norm),
            "theta": 1.0, "theta_prime_over_r": 1.0}


def norm_Edelta(state, bd, params, regime=None, centre=None):
    """Weighted sup norm of ``state`` (or of state - centre) over the inner nodes."""
    s = state if centre is None else state.minus(centre)
    r = s.r
    wts = norm_weights(r, bd, params, regime)
    if centre is None:
        u_over_r = np.abs(s.a + s.x)
        up = np.abs(s.a + s.up_dev)
        th = np.abs(s.theta0 + s.th_dev)
    else:
        u_over_r, up, th = np.abs(s.x), np.abs(s.up_dev), np.abs(s.th_dev)
    total = (wts["u_over_r"] * u_over_r + wts["u_prime"] * up
             + wts["uor_prime"] * np.abs(s.uor_p)
             + wts["theta"] * th + wts["theta_prime_over_r"] * np.abs(s.th_p) / r)
    return float(np.max(total))


def norm_of_fields(r, u, u_prime, theta, theta_prime, bd, params, regime=None, uor_prime=None):
    """Norm of an explicit (U, Theta) pair sampled on ``r``."""
    if uor_prime is None:
        uor_prime = (u_prime - u / r) / r
    s = InnerState(r, 0.0, 0.0, u / r, u_prime, uor_prime, theta, theta_prime)
    return norm_Edelta(s, bd, params, regime)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def picard_solve(params, bd, grid, tol=1e-13, max_iter=60, smallness_threshold=0.1,
                 enforce_smallness=True, keep_fields=False, seed=None):
    """Iterate the map from the ball centre until successive iterates are within ``tol``.

    ``tol`` is relative to A (absolute when A = 0). Returns the inner
    ProfileTriple and the iteration history.
    """
    regime = params.regime
    bd.check(params, forced_theta0=False)
    if regime == REGIME_DEGENERATE and bd.theta0 == 0.0:
        raise InvalidArgument("theta0 must be positive when alpha < 1")
    rep = check_smallness(params, bd, smallness_threshold)
    if enforce_smallness and not rep.passed:
        raise InvalidArgument(
            f"smallness fails: composite {rep.composite:.6g} >= {smallness_threshold}")
    r = grid.inner if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    centre = seed_state(r, bd)
    cur = centre if seed is None else seed
    scale = bd.a_slope if bd.a_slope > 0 else 1.0
    radius = 0.5 * bd.a_slope
    history = []
    prev_dist = math.nan
    bad = 0
    res = None
    for it in range(1, max_iter + 1):
        try:
            res = apply_Phi(cur, params, bd, regime)
        except BallExit as exc:
            exc.history = history
            raise
        dist = norm_Edelta(res.state, bd, params, regime, centre=cur)
        ball = norm_Edelta(res.state, bd, params, regime, centre=centre)
        ratio = dist / prev_dist if prev_dist > 0 else math.nan
        history.append(IterationState(it, dist, ratio, ball,
                                      res.state.u if keep_fields else None,
                                      res.state.theta if keep_fields else None))
        if bd.a_slope > 0 and ball > radius:
            raise BallExit(f"iterate {it} left the ball: distance {ball:.6g} > A/2 = {radius:.6g}",
                           history)
        cur = res.state
        if dist <= tol * scale:
            break
        if math.isfinite(ratio) and ratio >= CONTRACTION_FAIL and dist > 1e3 * tol * scale:
            bad += 1
            if bad >= 2:
                raise NoConvergence(
                    f"contraction ratio {ratio:.4g} >= {CONTRACTION_FAIL} twice in a row", history)
        else:
            bad = 0
        prev_dist = dist
    else:
        last = history[-1].contraction_estimate if history else math.nan
        raise NoConvergence(f"no convergence in {max_iter} iterations "
                            f"(last contraction estimate {last:.4g})", history)
    # final consistent fields: one more evaluation on the converged iterate
    res = apply_Phi(cur, params, bd, regime)
    return profile_from_result(res, grid, bd), history


def profile_from_result(res, grid, bd):
    s = res.state
    r = s.r
    if isinstance(grid, RadialGrid):
        g = RadialGrid(r.copy(), len(r), grid.grading, float(r[-1]))
    else:
        g = RadialGrid(r.copy(), len(r), 1.0, float(r[-1]))
    startup = {"p_exponent": float(res.p_prime[0] * r[0] / res.p[0]),
               "u_slope": bd.a_slope, "theta0": bd.theta0,
               "x": s.x.copy(), "uor_prime": s.uor_p.copy(), "th_dev": s.th_dev.copy()}
    return ProfileTriple(g, res.p.copy(), s.u, s.theta, s.u_prime, s.th_p.copy(),
                         startup, res.p_prime.copy(), res.q.copy())


def contraction_probe(params, bd, grid, amplitude=0.25, n_pairs=3, rng=None):
    """Measured Lipschitz ratios ||Phi(x1) - Phi(x2)|| / ||x1 - x2|| for random ball pairs."""
    rng = np.random.default_rng(0) if rng is None else rng
    r = grid.inner if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    ratios = []
    for _ in range(n_pairs):
        pair = [_random_ball_state(r, bd, params, amplitude, rng) for _ in range(2)]
        out = [apply_Phi(s, params, bd).state for s in pair]
        num = norm_Edelta(out[0], bd, params, centre=out[1])
        den = norm_Edelta(pair[0], bd, params, centre=pair[1])
        ratios.append(num / den)
    return ratios


def _random_ball_state(r, bd, params, amplitude, rng):
    """Smooth element of the ball around (A r, Theta0) with norm distance ~ amplitude*A."""
    a, t0 = bd.a_slope, bd.theta0
    rr = r / bd.delta
    c1, c2 = rng.uniform(-1.0, 1.0, size=2)
    # U/r - A = c1*eta*(r/delta)^2, Theta - Theta0 = c2*eta'*(r/delta)^2
    base = InnerState(r, a, t0, np.zeros_like(r), np.zeros_like(r), np.zeros_like(r),
                      np.zeros_like(r), np.zeros_like(r))
    x = c1 * rr ** 2
    uor_p = 2.0 * c1 * rr / bd.delta
    up_dev = 3.0 * c1 * rr ** 2
    th = c2 * rr ** 2
    th_p = 2.0 * c2 * rr / bd.delta
    unit = InnerState(r, 0.0, 0.0, x, up_dev, uor_p, th, th_p)
    zero = InnerState(r, 0.0, 0.0, *(np.zeros_like(r) for _ in range(5)))
    n = norm_Edelta(unit, bd, params, centre=zero)
    s = amplitude * a / n
    return replace(base, x=s * x, up_dev=s * up_dev, uor_p=s * uor_p, th_dev=s * th,
                   th_p=s * th_p)


__all__ = [
    "InnerState", "IterationState", "SmallnessReport", "PhiResult", "apply_Phi",
    "check_smallness", "compute_F_Theta", "compute_F_Theta_displayed", "compute_F_U",
    "compute_F_U_alpha1", "compute_V", "compute_Vtilde", "compute_W", "compute_Z",
    "contraction_probe", "norm_Edelta", "norm_of_fields", "picard_solve", "seed_state",
    "state_from_fields", "theta_from_F_Theta", "theta_source",
]
