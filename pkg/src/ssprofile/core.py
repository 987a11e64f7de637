"""Domain types, graded radial grids, quadrature and differentiation."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidArgument, StartupDivergence

REGIME_DEGENERATE = "expander-alpha<1"
REGIME_LINEAR = "expander-alpha=1"


@dataclass(frozen=True)
class PhysicalParams:
    d: int
    alpha: float
    c_v: float
    kappa: float
    gas_r: float
    mu0: float
    lambda0: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise InvalidArgument(f"d must be an integer >= 3, got {self.d}")
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidArgument(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.mu0 <= 0.0:
            raise InvalidArgument(f"mu0 must be positive, got {self.mu0}")
        for name in ("c_v", "kappa", "gas_r"):
            if getattr(self, name) <= 0.0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)}")
        bulk = 2.0 * self.mu0 + self.d * self.lambda0
        if self.alpha < 1.0:
            if abs(bulk) > 1e-12 * max(1.0, abs(self.mu0)):
                raise InvalidArgument(
                    "lambda0: alpha < 1 requires 2*mu0 + d*lambda0 = 0 "
                    f"(got {bulk!r})")
        elif bulk <= 0.0:
            raise InvalidArgument("lambda0: alpha = 1 requires 2*mu0 + d*lambda0 > 0")

    @classmethod
    def degenerate(cls, d=3, alpha=0.5, c_v=1.0, kappa=1.0, gas_r=1.0, mu0=1.0):
        """alpha < 1 parameters with lambda0 fixed by 2*mu0 + d*lambda0 = 0."""
        return cls(d=d, alpha=alpha, c_v=c_v, kappa=kappa, gas_r=gas_r,
                   mu0=mu0, lambda0=-2.0 * mu0 / d)

    @property
    def visc(self):
        """2*mu0 + lambda0."""
        return 2.0 * self.mu0 + self.lambda0

    @property
    def regime(self):
        return REGIME_DEGENERATE if self.alpha < 1.0 else REGIME_LINEAR

    def as_array(self, p_delta=1.0):
        return np.array([self.d, self.alpha, self.c_v, self.kappa, self.gas_r,
                         self.mu0, self.lambda0, p_delta], dtype=float)


@dataclass(frozen=True)
class BoundaryData:
    a_slope: float
    delta: float
    p_delta: float
    theta0: float
    eps_norm: float

    def __post_init__(self):
        if not (0.0 <= self.a_slope < 0.5):
            raise InvalidArgument(f"a_slope must lie in [0, 1/2), got {self.a_slope}")
        if self.delta <= 0.0:
            raise InvalidArgument(f"delta must be positive, got {self.delta}")
        if self.p_delta <= 0.0:
            raise InvalidArgument(f"p_delta must be positive, got {self.p_delta}")
        if self.theta0 < 0.0:
            raise InvalidArgument(f"theta0 must be nonnegative, got {self.theta0}")

    def check(self, params: PhysicalParams, forced_theta0=True):
        """Raise InvalidArgument if the data is inconsistent with ``params``."""
        a = params.alpha
        if a < 1.0:
            lo, hi = 0.5 * (1.0 - a), 1.0 - a
            if not (lo < self.eps_norm < hi):
                raise InvalidArgument(f"eps_norm must lie in ({lo}, {hi}), got {self.eps_norm}")
        else:
            if not (0.0 < self.eps_norm < 1.0):
                raise InvalidArgument(f"eps_norm must lie in (0, 1), got {self.eps_norm}")
            if forced_theta0:
                want = forced_theta0_value(params, self.a_slope)
                if abs(self.theta0 - want) > 1e-12 * max(want, 1e-300):
                    raise InvalidArgument(
                        f"theta0 is fixed to {want!r} when alpha = 1, got {self.theta0!r}")
        return self

    def replace(self, **kw):
        vals = dict(a_slope=self.a_slope, delta=self.delta, p_delta=self.p_delta,
                    theta0=self.theta0, eps_norm=self.eps_norm)
        vals.update(kw)
        return BoundaryData(**vals)

    @property
    def p_exponent(self):
        """Leading-order exponent of P at the origin, dA/(1/2 - A), without d."""
        return self.a_slope / (0.5 - self.a_slope)


def forced_theta0(params, a_slope):
    return forced_theta0_value(params, a_slope)


def forced_theta0_value(params, a_slope):
    return (2.0 * params.mu0 + params.d * params.lambda0) * a_slope / params.gas_r


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    inner_count: int
    grading: float
    r_max: float

    @property
    def delta(self):
        return float(self.nodes[self.inner_count - 1])

    @property
    def r_min(self):
        return float(self.nodes[0])

    @property
    def inner(self):
        return self.nodes[: self.inner_count]

    @property
    def outer(self):
        return self.nodes[self.inner_count - 1:]

    def __len__(self):
        return len(self.nodes)

    def halved(self):
        """Every-other-node coarsening keeping both endpoints and delta."""
        idx = _coarse_index(len(self.nodes), self.inner_count - 1)
        inner = int(np.sum(idx <= self.inner_count - 1))
        return RadialGrid(self.nodes[idx], inner, self.grading ** 2, self.r_max)

    def refined(self):
        """Insert midpoints (geometric means) between all nodes."""
        r = self.nodes
        mids = np.sqrt(r[:-1] * r[1:])
        out = np.empty(2 * len(r) - 1)
        out[0::2] = r
        out[1::2] = mids
        return RadialGrid(out, 2 * self.inner_count - 1, math.sqrt(self.grading), self.r_max)


def _coarse_index(n, keep):
    idx = list(range(0, n, 2))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    if keep not in idx:
        idx.append(keep)
    return np.array(sorted(set(idx)))


def _hybrid_outer(delta, r_max, count, length):
    # nodes uniform in s = ln r + r/length: log spacing below ``length``, uniform above
    s = np.linspace(math.log(delta) + delta / length, math.log(r_max) + r_max / length,
                    count + 1)[1:]
    t = s.copy()
    for _ in range(200):
        et = np.exp(t) / length
        step = (t + et - s) / (1.0 + et)
        t -= step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, float(np.max(np.abs(t)))):
            break
    return np.exp(t)


def build_grid(delta, r_max, inner_count, outer_count, grading, outer_length=None):
    """Radial grid on (0, r_max] with geometric inner grading toward the origin.

    Inner nodes r_0 < ... < r_{n-1} = delta have spacings h, h*g, h*g**2, ...
    measured from 0, so the first two spacings have ratio ``grading``. The
    outer part is log-uniform from delta to r_max with ``outer_count`` new
    nodes; with ``outer_length`` set, spacing saturates at about that length
    times the log step beyond r ~ outer_length.
    """
    if not (delta > 0.0) or not (r_max >= delta):
        raise InvalidArgument(f"need 0 < delta <= r_max, got delta={delta}, r_max={r_max}")
    if inner_count < 16:
        raise InvalidArgument(f"inner_count must be >= 16, got {inner_count}")
    if r_max == delta:
        if outer_count != 0:
            raise InvalidArgument("outer_count must be 0 when r_max == delta")
    elif outer_count < 16:
        raise InvalidArgument(f"outer_count must be >= 16, got {outer_count}")
    if not (1.0 <= grading <= 2.0):
        raise InvalidArgument(f"grading must lie in [1, 2], got {grading}")

    k = np.arange(inner_count, dtype=float)
    if grading == 1.0:
        inner = delta * (k + 1.0) / inner_count
    else:
        # partial sums of g**j, scaled so the last one equals delta
        sums = np.expm1((k + 1.0) * math.log(grading)) / (grading - 1.0)
        inner = delta * sums / sums[-1]
    inner[-1] = delta
    if outer_count:
        if outer_length is None:
            t = np.arange(1, outer_count + 1, dtype=float) / outer_count
            outer = delta * np.exp(t * math.log(r_max / delta))
        else:
            if outer_length <= 0.0:
                raise InvalidArgument("outer_length must be positive")
            outer = _hybrid_outer(delta, r_max, outer_count, outer_length)
        outer[-1] = r_max
        nodes = np.concatenate((inner, outer))
    else:
        nodes = inner
    if np.any(np.diff(nodes) <= 0.0):
        raise InvalidArgument("grid nodes are not strictly increasing; reduce counts or grading")
    return RadialGrid(nodes, int(inner_count), float(grading), float(r_max))


@dataclass(frozen=True)
class QuadratureReport:
    value: float
    err_est: float
    refinements: int


@dataclass(frozen=True, eq=False)
class ProfileTriple:
    grid: RadialGrid
    p: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    u_prime: np.ndarray
    theta_prime: np.ndarray
    startup: dict = field(default_factory=dict)
    p_prime: np.ndarray | None = None
    log_p: np.ndarray | None = None

    @property
    def r(self):
        return self.grid.nodes

    def check(self, mode="expander"):
        if np.any(self.p <= 0.0):
            raise InvalidArgument("P must be positive at every node")
        if np.any(self.theta < 0.0):
            raise InvalidArgument("Theta must be nonnegative")
        sign = -1.0 if mode == "expander" else 1.0
        gap = 0.5 * self.r + sign * self.u
        if np.any(gap <= 0.0):
            from .errors import DenominatorVanishing
            i = int(np.argmin(gap))
            raise DenominatorVanishing(f"r/2 {'-' if sign < 0 else '+'} U <= 0", r=float(self.r[i]))
        return self


@dataclass(frozen=True, eq=False)
class KernelSet:
    v: np.ndarray
    v_tilde: np.ndarray | None
    w: np.ndarray
    z: np.ndarray
    f_u: np.ndarray
    f_theta: np.ndarray
    regime: str


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

_WEIGHTS = {"1": 0, "r": 1}


def weight_exponent(weight, d=None):
    if isinstance(weight, (int, float)) and not isinstance(weight, bool):
        return float(weight)
    if weight in _WEIGHTS:
        return float(_WEIGHTS[weight])
    if weight in ("r^{d-1}", "r^(d-1)", "rd1"):
        if d is None:
            raise InvalidArgument("weight r^{d-1} needs d")
        return float(d - 1)
    raise InvalidArgument(f"unknown weight {weight!r}")


def _segment_integrals(r, f, m):
    """int_{r_i}^{r_{i+1}} s**m f(s) ds per segment.

    Where f keeps one sign on a segment it is interpolated as a power law,
    which is exact for power-law data and second order otherwise; elsewhere
    linear interpolation is used.
    """
    a, b = r[:-1], r[1:]
    fa, fb = f[:-1], f[1:]
    wa, wb = _kernels.segment_weights(r, m)
    out = wa * fa + wb * fb
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = fb / fa
        ok = (ratio > 1e-3) & (ratio < 1e3) & np.isfinite(ratio)
        lr = np.log(b / a)
        p = np.where(ok, np.log(np.where(ok, ratio, 1.0)) / lr, 0.0)
        e = m + p + 1.0
        x = e * lr
        # a**(m+1) * fa * (exp(x) - 1)/e, with the e -> 0 limit
        rel = np.where(np.abs(x) > 1e-12, np.expm1(x) / np.where(e == 0.0, 1.0, e), lr)
        pw = fa * a ** (m + 1.0) * rel
    return np.where(ok, pw, out)


def startup_integral(f0, r0, m, exponent):
    """Closed form of int_0^r0 s**m f0 (s/r0)**exponent ds."""
    e = m + 1.0 + exponent
    if f0 == 0.0:
        return 0.0
    if e <= 0.0:
        raise StartupDivergence(
            f"startup integrand exponent {m + exponent:g} <= -1: integral diverges at 0")
    return f0 * r0 ** (m + 1.0) / e


def _guess_exponent(r, f):
    if f[0] != 0.0 and f[1] != 0.0 and f[0] * f[1] > 0.0:
        return math.log(f[1] / f[0]) / math.log(r[1] / r[0])
    return 0.0


def _cumint_nodes(r, f, m, exponent):
    seg = _segment_integrals(r, f, m)
    out = np.empty(len(r))
    out[0] = startup_integral(float(f[0]), float(r[0]), m, exponent)
    out[1:] = out[0] + np.cumsum(seg)
    return out


def cumulative_integral(f, grid, weight="1", d=None, startup_exponent=None):
    """F(r) = int_0^r f(s) w(s) ds at every node, plus a Richardson error estimate.

    ``grid`` may be a RadialGrid or a bare node array. Below the first node f
    is continued as f(r_0) (s/r_0)**startup_exponent; the exponent defaults to
    the local log-log slope of the first two samples.
    """
    r = grid.nodes if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != r.shape:
        raise InvalidArgument("f and grid sizes differ")
    if not np.all(np.isfinite(f)):
        raise InvalidArgument("f must be finite on every node")
    m = weight_exponent(weight, d)
    if startup_exponent is None:
        startup_exponent = _guess_exponent(r, f)
    F = _cumint_nodes(r, f, m, startup_exponent)
    if len(r) >= 5:
        idx = _coarse_index(len(r), len(r) - 1)
        Fc = _cumint_nodes(r[idx], f[idx], m, startup_exponent)
        err = float(np.max(np.abs(F[idx] - Fc))) / 3.0
        refinements = 1
    else:
        err, refinements = 0.0, 0
    return F, QuadratureReport(float(F[-1]), err, refinements)


def decay_integral(r, m, phi, L, start=0.0):
    """I(r_i) = int_0^{r_i} s**m phi(s) exp(L(s) - L(r_i)) ds.

    ``start`` is the closed-form contribution on (0, r_0), already weighted by
    exp(-L(r_0)). Exponentials are only ever formed from differences of L, so
    quadratically growing L never overflows.
    """
    wa, wb = _kernels.segment_weights(r, m)
    dL = np.diff(L)
    seg = wa * phi[:-1] * np.exp(-dL) + wb * phi[1:]
    return _kernels.linear_recurrence(dL, seg, start)


def decay_excess_integral(r, m, phi, L, start=0.0, plain_start=0.0):
    """E(r_i) = int_0^{r_i} s**m phi(s) (exp(L(s) - L(r_i)) - 1) ds, cancellation-free.

    ``plain_start`` is the startup value of the undamped integral int s**m phi.
    """
    wa, wb = _kernels.segment_weights(r, m)
    plain = np.empty(len(r))
    plain[0] = plain_start
    plain[1:] = plain_start + np.cumsum(wa * phi[:-1] + wb * phi[1:])
    dL = np.diff(L)
    em = np.expm1(-dL)
    seg = em * plain[:-1] + wa * phi[:-1] * em
    return _kernels.linear_recurrence(dL, seg, start)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def differentiate(f, grid):
    """Second-order derivative on a nonuniform grid, one-sided at both ends."""
    r = grid.nodes if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    f = np.asarray(f, dtype=float)
    if len(r) < 3:
        raise InvalidArgument("differentiate needs at least 3 nodes")
    h = np.diff(r)
    out = np.empty_like(f)
    h0, h1 = h[:-1], h[1:]
    out[1:-1] = (-h1 / (h0 * (h0 + h1)) * f[:-2]
                 + (h1 - h0) / (h0 * h1) * f[1:-1]
                 + h0 / (h1 * (h0 + h1)) * f[2:])
    a, b = h[0], h[1]
    out[0] = (-(2 * a + b) / (a * (a + b)) * f[0] + (a + b) / (a * b) * f[1]
              - a / (b * (a + b)) * f[2])
    a, b = h[-1], h[-2]
    out[-1] = ((2 * a + b) / (a * (a + b)) * f[-1] - (a + b) / (a * b) * f[-2]
               + a / (b * (a + b)) * f[-3])
    return out


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

PROFILE_HEADER = ["r", "P", "U", "Theta", "Uprime", "Thetaprime"]


def fmt(x):
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def columns_csv(header, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def profile_to_csv(profile):
    header = list(PROFILE_HEADER)
    cols = [profile.r, profile.p, profile.u, profile.theta, profile.u_prime,
            profile.theta_prime]
    if profile.p_prime is not None:
        header.append("Pprime")
        cols.append(profile.p_prime)
    if profile.log_p is not None:
        header.append("logP")
        cols.append(profile.log_p)
    return columns_csv(header, cols)


def write_profile_csv(profile, path):
    atomic_write_text(path, profile_to_csv(profile))


def read_profile_csv(path, delta=None):
    """Load a profile CSV. ``delta`` marks the inner/outer split (defaults to the last node)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    missing = [h for h in PROFILE_HEADER if h not in data.dtype.names]
    if missing:
        raise InvalidArgument(f"profile CSV lacks columns {missing}")
    r = np.atleast_1d(data["r"]).astype(float)
    inner = len(r) if delta is None else int(np.searchsorted(r, delta * (1 + 1e-12), "right"))
    grid = RadialGrid(r, inner, 1.0, float(r[-1]))
    def col(name):
        return np.atleast_1d(data[name]).astype(float) if name in data.dtype.names else None

    return ProfileTriple(grid, col("P"), col("U"), col("Theta"), col("Uprime"),
                         col("Thetaprime"), {}, col("Pprime"), col("logP"))
