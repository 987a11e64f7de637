"""Hot numeric kernels.

Two inner loops dominate runtime: the first-order linear recurrence behind
every exponentially-weighted cumulative integral, and the embedded
Runge-Kutta march that continues a profile past the matching radius. Both
are compiled with numba when available. Setting ``SSPROFILE_NUMBA=0`` in the
environment selects the pure-numpy / pure-Python path instead; results agree
to rounding.
"""

import math
import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


def numba_enabled():
    flag = os.environ.get("SSPROFILE_NUMBA", "1").strip().lower()
    return _HAVE_NUMBA and flag not in ("0", "false", "no", "off")


def _njit(func):
    if not _HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


# ---------------------------------------------------------------------------
# segment moments
# ---------------------------------------------------------------------------

def _power_integral(a, b, e):
    # vectorised int_a^b s**e ds, e may be -1
    if e == -1.0:
        return np.log(b / a)
    return (b ** (e + 1.0) - a ** (e + 1.0)) / (e + 1.0)


def segment_weights(r, m):
    """Weights (wa, wb) with int_{r_i}^{r_i+1} s**m psi(s) ds = wa*psi_i + wb*psi_i+1.

    psi is the linear interpolant between the two endpoint values; the power
    ``s**m`` is integrated exactly, so power-law weights cost no accuracy on
    geometrically graded grids.
    """
    a = r[:-1]
    b = r[1:]
    h = b - a
    if m == 0:
        half = 0.5 * h
        return half, half.copy()
    m0 = _power_integral(a, b, float(m))
    m1 = _power_integral(a, b, float(m) + 1.0)
    wb = (m1 - a * m0) / h
    wa = m0 - wb
    return wa, wb


# ---------------------------------------------------------------------------
# linear recurrence  I[i+1] = exp(-dL[i]) * I[i] + s[i]
# ---------------------------------------------------------------------------

def _recurrence_loop(dL, s, i0):
    n = s.shape[0] + 1
    out = np.empty(n)
    out[0] = i0
    acc = i0
    for i in range(n - 1):
        acc = math.exp(-dL[i]) * acc + s[i]
        out[i + 1] = acc
    return out


_recurrence_jit = _njit(_recurrence_loop)

_BLOCK_SPAN = 300.0


def _recurrence_numpy(dL, s, i0):
    # Closed form inside blocks where the accumulated exponent stays below
    # _BLOCK_SPAN, so exp() neither overflows nor underflows.
    n = s.shape[0] + 1
    out = np.empty(n)
    out[0] = i0
    G = np.concatenate(([0.0], np.cumsum(dL)))
    start = 0
    acc = i0
    while start < n - 1:
        rel = np.abs(G[start + 1:] - G[start])
        over = np.nonzero(rel > _BLOCK_SPAN)[0]
        stop = n - 1 if over.size == 0 else max(start + 1, start + over[0])
        g = G[start + 1:stop + 1] - G[start]
        terms = s[start:stop] * np.exp(g)
        out[start + 1:stop + 1] = np.exp(-g) * (acc + np.cumsum(terms))
        acc = out[stop]
        start = stop
    return out


def linear_recurrence(dL, s, i0, use_numba=None):
    dL = np.ascontiguousarray(dL, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba:
        return _recurrence_jit(dL, s, float(i0))
    return _recurrence_numpy(dL, s, float(i0))


# ---------------------------------------------------------------------------
# expander ODE system, state y = (q, U, U', Theta, Theta'), q = ln(P / P_delta)
# ---------------------------------------------------------------------------

def _expander_rhs(r, y, prm, out):
    d = prm[0]
    alpha = prm[1]
    cv = prm[2]
    kappa = prm[3]
    gas_r = prm[4]
    mu0 = prm[5]
    lam0 = prm[6]
    p_delta = prm[7]

    q = y[0]
    u = y[1]
    up = y[2]
    th = y[3]
    thp = y[4]

    s = 0.5 * r - u
    if s <= 0.0:
        return False
    p = p_delta * math.exp(q)
    div = up + (d - 1.0) * u / r
    qp = div / s
    pp = p * qp
    pa = p ** alpha
    pap = alpha * pa * qp
    c = 2.0 * mu0 + lam0

    lhs_m = (-0.5 * p * u - 0.5 * r * (pp * u + p * up)
             + pp * u * u + 2.0 * p * u * up
             + (d - 1.0) * p * u * u / r
             + gas_r * (pp * th + p * thp))
    upp = ((lhs_m - c * pap * up - lam0 * pap * (d - 1.0) * u / r) / (c * pa)
           - (d - 1.0) * (up - u / r) / r)

    e = 0.5 * u * u + cv * th
    ep = u * up + cv * thp
    flux = u * p * (e + gas_r * th)
    flux_p = (up * p * (e + gas_r * th) + u * pp * (e + gas_r * th)
              + u * p * (ep + gas_r * thp))
    lhs_e = (-p * e - 0.5 * r * (pp * e + p * ep) + flux_p
             + (d - 1.0) * flux / r - kappa * (d - 1.0) * thp / r)
    lap_u = upp + (d - 1.0) * up / r - (d - 1.0) * u / (r * r)
    rhs_e = (2.0 * mu0 * pa * (up * up + (d - 1.0) * u * u / (r * r))
             + lam0 * pa * div * div
             + c * pa * lap_u * u
             + c * pap * up * u
             + lam0 * pap * (d - 1.0) * u * u / r)
    thpp = (lhs_e - rhs_e) / kappa

    out[0] = qp
    out[1] = up
    out[2] = upp
    out[3] = thp
    out[4] = thpp
    return True


_expander_rhs_jit = _njit(_expander_rhs)

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0


def _make_integrator(rhs):
    def integrate(nodes, y0, prm, rtol, scale0, blowup):
        n = nodes.shape[0]
        dim = y0.shape[0]
        ys = np.zeros((n, dim))
        ys[0, :] = y0
        y = y0.copy()
        scale = scale0.copy()
        for j in range(dim):
            if abs(y[j]) > scale[j]:
                scale[j] = abs(y[j])
        k1 = np.empty(dim)
        k2 = np.empty(dim)
        k3 = np.empty(dim)
        k4 = np.empty(dim)
        k5 = np.empty(dim)
        k6 = np.empty(dim)
        k7 = np.empty(dim)
        yt = np.empty(dim)
        ynew = np.empty(dim)
        r = nodes[0]
        h = 1e-3 * (nodes[1] - nodes[0])
        nsteps = 0
        if not rhs(r, y, prm, k1):
            return ys, 1, r, nsteps
        for i in range(1, n):
            target = nodes[i]
            while r < target:
                last = False
                if r + h >= target:
                    h = target - r
                    last = True
                for j in range(dim):
                    yt[j] = y[j] + h * _A21 * k1[j]
                ok = rhs(r + _C2 * h, yt, prm, k2)
                for j in range(dim):
                    yt[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
                ok = ok and rhs(r + _C3 * h, yt, prm, k3)
                for j in range(dim):
                    yt[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
                ok = ok and rhs(r + _C4 * h, yt, prm, k4)
                for j in range(dim):
                    yt[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j]
                                        + _A54 * k4[j])
                ok = ok and rhs(r + _C5 * h, yt, prm, k5)
                for j in range(dim):
                    yt[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j]
                                        + _A64 * k4[j] + _A65 * k5[j])
                ok = ok and rhs(r + h, yt, prm, k6)
                for j in range(dim):
                    ynew[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j]
                                          + _B5 * k5[j] + _B6 * k6[j])
                ok = ok and rhs(r + h, ynew, prm, k7)
                if not ok:
                    # step straddles a vanishing denominator: shrink, give up at tiny h
                    if h < 1e-14 * max(r, 1.0):
                        return ys, 1, r, nsteps
                    h *= 0.25
                    continue
                err = 0.0
                for j in range(dim):
                    ej = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j]
                              + _E6 * k6[j] + _E7 * k7[j])
                    sc = rtol * max(scale[j], abs(ynew[j]), abs(y[j]))
                    if sc <= 0.0:
                        sc = 1e-300
                    v = ej / sc
                    err += v * v
                err = math.sqrt(err / dim)
                if err <= 1.0:
                    r = target if last else r + h
                    for j in range(dim):
                        y[j] = ynew[j]
                        k1[j] = k7[j]
                        if abs(y[j]) > scale[j]:
                            scale[j] = abs(y[j])
                        if abs(y[j]) > blowup[j]:
                            ys[i, :] = y
                            return ys, 2, r, nsteps
                    nsteps += 1
                    fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                    if not last:
                        h *= fac
                    else:
                        h = max(h, (h * fac))
                else:
                    h *= max(0.2, 0.9 * err ** -0.2)
            for j in range(dim):
                ys[i, j] = y[j]
        return ys, 0, r, nsteps

    return integrate


_integrate_py = _make_integrator(_expander_rhs)
_integrate_jit = _njit(_make_integrator(_expander_rhs_jit)) if _HAVE_NUMBA else _integrate_py


def integrate_expander(nodes, y0, prm, rtol, scale0, blowup, use_numba=None):
    """March the expander system through ``nodes``; returns (states, status, r_stop, steps).

    status 0 = ok, 1 = r/2 - U reached zero, 2 = a component exceeded its blow-up cap.
    """
    if use_numba is None:
        use_numba = numba_enabled()
    args = (np.ascontiguousarray(nodes, dtype=float), np.array(y0, dtype=float),
            np.array(prm, dtype=float), float(rtol), np.array(scale0, dtype=float),
            np.array(blowup, dtype=float))
    if use_numba:
        return _integrate_jit(*args)
    return _integrate_py(*args)


def expander_rhs(r, y, prm):
    out = np.empty(5)
    ok = _expander_rhs(float(r), np.asarray(y, dtype=float), np.asarray(prm, dtype=float), out)
    return out if ok else None
