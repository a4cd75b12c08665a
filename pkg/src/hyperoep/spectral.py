"""First Dirichlet eigenvalue of geodesic balls in H^n(-k) by radial shooting.

The radial eigenfunction solves

    v'' + (n-1) sqrt(k) coth(sqrt(k) t) v' + lam v = 0,   v(0) = 1, v'(0) = 0,

and the first zero of v is the radius R with lambda_1(B_R) = lam.  Near the
McKean threshold (n-1)^2 k / 4 the solution decays like exp(-(n-1) sqrt(k) t / 2)
long before it vanishes, which defeats absolute tolerances on (v, v').  We
therefore integrate the Pruefer form

    v = A sin(theta),  v' = A sqrt(lam) cos(theta),
    theta'  = sqrt(lam) + (n-1) c(t) sin(theta) cos(theta),
    (ln A)' = -(n-1) c(t) cos(theta)^2,

with c(t) = sqrt(k) coth(sqrt(k) t).  The phase is well scaled for every t,
and the first zero of v is the first time theta reaches pi.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from ._validation import check_curvature, check_dimension, check_positive
from .errors import DomainError, IntegrationError, NoZeroError, SearchError

__all__ = [
    "RTOL",
    "ATOL",
    "RadialODEParams",
    "RadialProfile",
    "EigenResult",
    "ShotResult",
    "mckean_threshold",
    "shoot_first_zero",
    "radius_for_lambda",
    "lambda1_ball",
    "c1_constant",
    "c1_radius_report",
    "savo_constant",
    "EigenBounds",
    "eigen_bounds",
    "ChengReport",
    "cheng_check",
]

RTOL = 1e-10
ATOL = 1e-12
T0 = 1e-6
LAMBDA_MAX = 1e8


def mckean_threshold(n: int, k: float) -> float:
    return (n - 1) ** 2 * k / 4.0


@dataclass(frozen=True)
class RadialODEParams:
    n: int
    k: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "n", check_dimension(self.n))
        object.__setattr__(self, "k", check_curvature(self.k))
        object.__setattr__(self, "lam", check_positive(self.lam, "lambda"))

    @property
    def threshold(self) -> float:
        return mckean_threshold(self.n, self.k)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a radial function and its derivative on [0, R]."""

    ts: np.ndarray
    vs: np.ndarray
    dvs: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        if ts.ndim != 1 or ts.size < 2 or ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
            raise DomainError("profile abscissae must start at 0 and increase strictly")
        for name in ("ts", "vs", "dvs"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != ts.shape:
                raise DomainError(f"{name} has the wrong length")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def R(self) -> float:
        return float(self.ts[-1])

    def _spline(self):
        return CubicHermiteSpline(self.ts, self.vs, self.dvs, extrapolate=False)

    def __call__(self, t):
        return self._spline()(t)

    def derivative(self, t):
        return self._spline().derivative()(t)

    def scaled(self, factor: float) -> "RadialProfile":
        return RadialProfile(self.ts, factor * self.vs, factor * self.dvs)

    def to_dict(self) -> dict:
        return {"ts": self.ts.tolist(), "vs": self.vs.tolist(), "dvs": self.dvs.tolist()}


@dataclass(frozen=True, eq=False)
class EigenResult:
    params: RadialODEParams
    R: float
    profile: RadialProfile
    residual: float
    iterations: int

    @property
    def lam(self) -> float:
        return self.params.lam

    def to_dict(self, with_profile: bool = False) -> dict:
        out = {
            "n": self.params.n,
            "k": self.params.k,
            "R": self.R,
            "lambda": self.params.lam,
            "residual": self.residual,
            "iterations": self.iterations,
        }
        if with_profile:
            out["profile"] = self.profile.to_dict()
        return out


class ShotResult(NamedTuple):
    R: float
    profile: RadialProfile
    residual: float


def _coth_term(k: float):
    if k == 0.0:
        return lambda t: 1.0 / t
    sk = math.sqrt(k)
    return lambda t: sk / math.tanh(sk * t)


def _series_seed(n: int, k: float, lam: float, t0: float):
    """Taylor data v(t0), v'(t0) including the t^4 term."""
    a2 = -lam / (2 * n)
    a4 = lam * (lam + 2 * (n - 1) * k / 3) / (8 * n * (n + 2))
    return 1 + a2 * t0**2 + a4 * t0**4, 2 * a2 * t0 + 4 * a4 * t0**3


def _pruefer_solve(n, k, lam, t_end, t0, rtol, atol, stop_at_zero, dense=True):
    s = math.sqrt(lam)
    coth = _coth_term(k)
    m = n - 1

    def rhs(t, y):
        c = coth(t)
        st, ct = math.sin(y[0]), math.cos(y[0])
        return [s + m * c * st * ct, -m * c * ct * ct]

    v0, dv0 = _series_seed(n, k, lam, t0)
    y0 = [math.atan2(v0, dv0 / s), 0.5 * math.log(v0 * v0 + dv0 * dv0 / lam)]
    events = None
    if stop_at_zero:
        def hit_pi(t, y):
            return y[0] - math.pi
        hit_pi.terminal = True
        hit_pi.direction = 1
        events = hit_pi
    sol = solve_ivp(rhs, (t0, t_end), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=dense, events=events)
    if sol.status == -1:
        raise IntegrationError(sol.message)
    return sol


def _profile_from(sol, lam: float, R: float, t0: float, n: int, k: float) -> RadialProfile:
    count = int(min(20001, max(401, math.ceil(40 * R * max(1.0, math.sqrt(lam))))))
    ts = np.linspace(t0, R, count)
    theta, lnA = sol.sol(ts)
    amp = np.exp(lnA)
    vs = amp * np.sin(theta)
    dvs = amp * math.sqrt(lam) * np.cos(theta)
    return RadialProfile(np.concatenate([[0.0], ts]), np.concatenate([[1.0], vs]),
                         np.concatenate([[0.0], dvs]))


def _horizon(n, k, lam):
    gap = lam - mckean_threshold(n, k)
    return max(50.0, 20.0 / math.sqrt(max(gap, 1e-300)))


def shoot_first_zero(params: RadialODEParams | None = None, *, n=None, k=None, lam=None,
                     rtol: float = RTOL, atol: float = ATOL) -> ShotResult:
    """First positive zero R of the radial solution with v(0)=1, v'(0)=0.

    Raises NoZeroError straight away when lam does not exceed the McKean
    threshold (no ball has an eigenvalue that low), and after the horizon
    max(50, 20/sqrt(lam - threshold)) otherwise.
    """
    if params is None:
        params = RadialODEParams(n, k, lam)
    n, k, lam = params.n, params.k, params.lam
    if k > 0 and lam <= params.threshold:
        raise NoZeroError(
            f"lambda={lam} does not exceed the threshold {params.threshold}; no zero exists")
    T = _horizon(n, k, lam)
    sol = _pruefer_solve(n, k, lam, T, T0, rtol, atol, stop_at_zero=True)
    if sol.t_events[0].size == 0:
        raise NoZeroError(f"no zero before the horizon T_max={T}")
    R = float(sol.t_events[0][0])
    prof = _profile_from(sol, lam, R, T0, n, k)
    return ShotResult(R, prof, float(abs(prof.vs[-1])))


def radius_for_lambda(n: int, k: float, lam: float) -> float:
    """R_{lam,n}: radius of the geodesic ball whose first eigenvalue is lam."""
    return shoot_first_zero(n=n, k=k, lam=lam).R


def _phase_at(n, k, lam, R, rtol, atol):
    t0 = min(T0, 1e-3 * R)
    sol = _pruefer_solve(n, k, lam, R, t0, rtol, atol, stop_at_zero=False, dense=False)
    return float(sol.y[0, -1])


def lambda1_ball(n: int, k: float, R: float, *, rtol: float = RTOL, atol: float = ATOL,
                 xtol: float = 1e-13) -> EigenResult:
    """First Dirichlet eigenvalue of the geodesic ball of radius R in H^n(-k)."""
    n = check_dimension(n)
    k = check_curvature(k)
    R = check_positive(R, "R")
    thr = mckean_threshold(n, k)

    def F(lam):
        return _phase_at(n, k, lam, R, rtol, atol) - math.pi

    # lambda_1 - threshold is at least (pi/2R)^2 in every dimension; start below it
    gap = 0.9 * (math.pi / (2 * R)) ** 2
    lo = thr + gap
    for _ in range(60):
        if F(lo) < 0:
            break
        gap *= 0.25
        lo = thr + gap
    else:
        raise SearchError("could not bracket lambda_1 from below")
    hi = thr + 4 * gap
    while F(hi) <= 0:
        hi = thr + 2 * (hi - thr)
        if hi > LAMBDA_MAX:
            raise SearchError(f"lambda_1 exceeds {LAMBDA_MAX:g}; radius too small")
    lam, info = brentq(F, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, full_output=True)
    params = RadialODEParams(n, k, lam)
    t0 = min(T0, 1e-3 * R)
    sol = _pruefer_solve(n, k, lam, R, t0, rtol, atol, stop_at_zero=False)
    prof = _profile_from(sol, lam, R, t0, n, k)
    return EigenResult(params, R, prof, float(abs(prof.vs[-1])), int(info.iterations))


def c1_constant(n: int, k1: float) -> float:
    """First positive zero of z'' + (n-1) sqrt(k1) coth(sqrt(k1) t) z' + z = 0."""
    n = check_dimension(n)
    k1 = check_positive(k1, "k1")
    return shoot_first_zero(n=n, k=k1, lam=1.0).R


def c1_radius_report(n: int, k1: float, lam: float) -> dict:
    """Compare the exact radius R_{lam,n} with the scaled constant c1(n,k1)/sqrt(lam).

    The two agree only when lam = 1: rescaling t by sqrt(lam) does not
    rescale the coth coefficient.
    """
    exact = radius_for_lambda(n, k1, lam)
    try:
        scaled = c1_constant(n, k1) / math.sqrt(lam)
    except NoZeroError:
        scaled = None
    return {
        "n": n, "k1": k1, "lambda": lam,
        "exact_radius": exact,
        "c1_over_sqrt_lambda": scaled,
        "discrepancy": None if scaled is None else scaled - exact,
    }


def savo_constant(n: int) -> float:
    """c = pi^2 (n-1)(n+1)/2 * int_0^inf t^2 / sinh(t)^2 dt."""
    def integrand(t):
        if t < 1e-4:
            return 1.0 - t * t / 3.0
        return (t / math.sinh(t)) ** 2

    head, _ = quad(integrand, 0.0, 40.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    # tail: t^2/sinh^2 t <= 4.0001 t^2 e^{-2t} for t >= 40
    tail = 4.0001 * math.exp(-80.0) * (40.0**2 / 2 + 40.0 / 2 + 0.25)
    return math.pi**2 * (n - 1) * (n + 1) / 2.0 * (head + tail)


@dataclass
class EigenBounds:
    n: int
    k: float
    R: float
    mckean_lower: float
    artamoshin_lower: float | None
    artamoshin_upper: float | None
    artamoshin_strict: bool
    exact: float | None = None
    savo_constant: float | None = None
    savo_printed_lower: float | None = None
    savo_printed_upper: float | None = None
    savo_corrected_lower: float | None = None
    savo_corrected_upper: float | None = None
    computed: float | None = None
    # relative slack for the n = 3 equality case, where lower == upper
    equality_rtol: float = 1e-8

    def _within(self, lo, hi, strict=False):
        if self.computed is None or lo is None:
            return None
        lam = self.computed
        if hi is not None and hi == lo:
            return bool(abs(lam - lo) <= self.equality_rtol * abs(lo))
        ok = lam > lo if strict else lam >= lo
        if hi is not None:
            ok = ok and lam <= hi
        return bool(ok)

    @property
    def mckean_holds(self):
        return self._within(self.mckean_lower, None, strict=True)

    @property
    def artamoshin_holds(self):
        return self._within(self.artamoshin_lower, self.artamoshin_upper, self.artamoshin_strict)

    @property
    def savo_printed_holds(self):
        return self._within(self.savo_printed_lower, self.savo_printed_upper)

    @property
    def savo_corrected_holds(self):
        return self._within(self.savo_corrected_lower, self.savo_corrected_upper)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(mckean_holds=self.mckean_holds, artamoshin_holds=self.artamoshin_holds,
                   savo_printed_holds=self.savo_printed_holds,
                   savo_corrected_holds=self.savo_corrected_holds)
        return out


def eigen_bounds(n: int, k: float, R: float, compute: bool = True) -> EigenBounds:
    """Closed-form bounds on lambda_1(R), optionally with the computed value.

    Savo's two-sided estimate (k = 1 only) is reported both with the 1/R^2
    coefficient pi, as transcribed, and with pi^2, which is what the exact
    n = 3 formula k + pi^2/R^2 requires.
    """
    n = check_dimension(n)
    k = check_curvature(k)
    R = check_positive(R, "R")
    thr = mckean_threshold(n, k)
    rep = EigenBounds(n=n, k=k, R=R, mckean_lower=thr, artamoshin_lower=None,
                      artamoshin_upper=None, artamoshin_strict=False)
    if n == 2:
        rep.artamoshin_lower = k / 4 + (math.pi / (2 * R)) ** 2
        rep.artamoshin_upper = k / 4 + (math.pi / R) ** 2
    elif n == 3:
        rep.exact = k + math.pi**2 / R**2
        rep.artamoshin_lower = rep.artamoshin_upper = rep.exact
    else:
        rep.artamoshin_lower = thr + (math.pi / R) ** 2
        rep.artamoshin_strict = True
    if k == 1.0:
        c = savo_constant(n)
        base = (n - 1) ** 2 / 4
        rep.savo_constant = c
        rep.savo_printed_lower = base + math.pi / R**2 - 4 * math.pi**2 / ((n - 1) * R**3)
        rep.savo_printed_upper = base + math.pi / R**2 + c / R**3
        rep.savo_corrected_lower = base + math.pi**2 / R**2 - 4 * math.pi**2 / ((n - 1) * R**3)
        rep.savo_corrected_upper = base + math.pi**2 / R**2 + c / R**3
    if compute:
        rep.computed = lambda1_ball(n, k, R).lam
    return rep


@dataclass
class ChengReport:
    n: int
    k1: float
    k2: float
    R: float
    lambda_k1: float
    lambda_k2: float
    margin: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def cheng_check(n: int, k1: float, k2: float, R: float, rtol: float = 1e-9) -> ChengReport:
    """Check lambda_1 at curvature -k2 does not exceed it at -k1 (k1 >= k2 >= 0).

    ``rtol`` absorbs solver round-off in the equality case k1 == k2.
    """
    k1 = check_curvature(k1)
    k2 = check_curvature(k2)
    if k1 < k2:
        raise DomainError("cheng_check expects k1 >= k2 (curvature -k1 <= -k2)")
    l1 = lambda1_ball(n, k1, R).lam
    l2 = l1 if k1 == k2 else lambda1_ball(n, k2, R).lam
    margin = l1 - l2
    return ChengReport(n, k1, k2, R, l1, l2, margin, bool(margin >= -rtol * abs(l1)))
