"""Radial solutions of Delta u + f(u) = 0 on geodesic balls of H^n(-k).

For radial u the equation reads

    u'' + (n-1) sqrt(k) coth(sqrt(k) t) u' + f(u) = 0,   u'(0) = 0, u(R) = 0,

and the Neumann constant of the overdetermined problem is alpha = u'(R).
Solutions are found by shooting on the centre value a = u(0).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad_vec, solve_ivp
from scipy.optimize import brentq

from ._validation import check_curvature, check_dimension, check_positive
from .errors import (DomainError, GeometryError, IntegrationError, NoSolutionError, NoZeroError,
                     PreconditionError, ScaleDegenerateError)
from .spectral import (RadialProfile, _coth_term, mckean_threshold, shoot_first_zero)

__all__ = [
    "ReactionFunction",
    "OepSolution",
    "QuasilinearCoefficients",
    "solve_radial_oep",
    "torsion_profile",
    "P1Report",
    "verify_p1",
    "EllipticityReport",
    "ellipticity_check",
    "HeightReport",
    "height_levelset_check",
]

OEP_RTOL = 1e-11
OEP_ATOL = 1e-14
T0 = 1e-6


@dataclass(frozen=True)
class ReactionFunction:
    """f: (0, inf) -> R with optional declared constants."""

    func: Callable[[float], float]
    lipschitz: float | None = None
    p1_lambda: float | None = None
    label: str = ""

    def __call__(self, t):
        return self.func(t)

    @classmethod
    def wrap(cls, f) -> "ReactionFunction":
        return f if isinstance(f, ReactionFunction) else cls(f)

    def linear_slope(self, samples: int = 25) -> float | None:
        """Slope mu if f(t) = mu t on the sample range, else None."""
        ts = np.logspace(-3, 3, samples)
        vals = np.array([float(self.func(t)) for t in ts])
        ratio = vals / ts
        mu = float(np.median(ratio))
        if np.all(np.abs(ratio - mu) <= 1e-12 * max(1.0, abs(mu))):
            return mu
        return None


@dataclass(frozen=True, eq=False)
class OepSolution:
    n: int
    k: float
    R: float
    profile: RadialProfile
    alpha: float
    center_value: float
    iterations: int = 0
    method: str = "shooting"

    def to_dict(self, with_profile: bool = False) -> dict:
        out = {"n": self.n, "k": self.k, "R": self.R, "alpha": self.alpha,
               "center_value": self.center_value, "iterations": self.iterations,
               "method": self.method}
        if with_profile:
            out["profile"] = self.profile.to_dict()
        return out


def _sample_count(R: float) -> int:
    return int(min(20001, max(401, math.ceil(40 * R))))


def _shoot(n, k, R, f, a, rtol, atol, dense=False):
    coth = _coth_term(k)
    m = n - 1
    f0 = float(f(np.finfo(float).tiny))

    def fu(u):
        return f(u) if u > 0 else f0

    def rhs(t, y):
        return [y[1], -m * coth(t) * y[1] - fu(y[0])]

    fa = float(fu(a))
    h = 1e-6 * max(1.0, abs(a))
    dfa = (float(fu(a + h)) - float(fu(max(a - h, 0.0)))) / (a + h - max(a - h, 0.0))
    b = fa / (2 * n)
    c4 = b * (dfa + 2 * m * k / 3) / (4 * (n + 2))
    t0 = min(T0, 1e-3 * R)
    y0 = [a - b * t0**2 + c4 * t0**4, -2 * b * t0 + 4 * c4 * t0**3]

    def hit_zero(t, y):
        return y[0]
    hit_zero.terminal = True
    hit_zero.direction = -1

    sol = solve_ivp(rhs, (t0, R), y0, method="DOP853", rtol=rtol, atol=atol * max(1.0, a),
                    events=hit_zero, dense_output=dense)
    if sol.status == -1:
        raise IntegrationError(sol.message)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0]) - R, sol, t0
    return float(sol.y[0, -1]), sol, t0


def solve_radial_oep(n: int, k: float, R: float, f, *, a_min: float = 1e-3,
                     a_max: float = 1e6, rtol: float = OEP_RTOL,
                     atol: float = OEP_ATOL) -> OepSolution:
    """Smallest centre value a > 0 with u(R; a) = 0 and u > 0 on [0, R).

    The residual g(a) is u(R; a) when u stays positive on [0, R] and
    (first zero - R) otherwise, which is continuous and changes sign at a
    solution.  The bracket comes from doubling a from ``a_min`` (halving
    first if g(a_min) > 0).
    """
    n = check_dimension(n)
    k = check_curvature(k)
    R = check_positive(R, "R")
    f = ReactionFunction.wrap(f)
    if f.linear_slope() is not None:
        raise ScaleDegenerateError(
            "f is linear homogeneous: solutions are multiples of the eigenfunction "
            "(use lambda1_ball / shoot_first_zero)")

    def g(a):
        return _shoot(n, k, R, f, a, rtol, atol)[0]

    a = a_min
    ga = g(a)
    steps = 0
    if ga > 0:
        while ga > 0:
            a_hi, a = a, a / 2
            steps += 1
            if a < 1e-14:
                raise NoSolutionError("u(R; a) > 0 for every centre value tried")
            ga = g(a)
        lo, hi = a, a_hi
    else:
        while ga <= 0:
            if ga == 0:
                break
            a_lo, a = a, 2 * a
            steps += 1
            if a > a_max:
                raise GeometryError(
                    f"u vanishes before R={R} for every centre value up to {a_max:g}: "
                    "the ball is too large for this reaction term")
            ga = g(a)
        lo, hi = (a, a) if ga == 0 else (a_lo, a)
    if lo == hi:
        root, its = lo, 0
    else:
        root, info = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                            full_output=True)
        its = info.iterations
    _, sol, t0 = _shoot(n, k, R, f, root, rtol, atol, dense=True)
    ts = np.linspace(t0, float(sol.t[-1]), _sample_count(R))
    ys = sol.sol(ts)
    prof = RadialProfile(np.concatenate([[0.0], ts]), np.concatenate([[root], ys[0]]),
                         np.concatenate([[0.0], ys[1]]))
    return OepSolution(n, k, R, prof, float(ys[1, -1]), float(root), steps + its)


def _torsion_slope(n: int, k: float, s: np.ndarray) -> np.ndarray:
    """g(s) = (int_0^s A) / A(s), A = sinh^{n-1}(sqrt(k) t) / k^{(n-1)/2}.

    Written as s * int_0^1 (sinh(sqrt(k) s x) / sinh(sqrt(k) s))^{n-1} dx so the
    ratio never overflows.
    """
    s = np.asarray(s, dtype=float)
    if k == 0.0:
        return s / n
    sk = math.sqrt(k)
    safe = np.where(s > 0, s, 1.0)

    def ratio(x):
        return np.where(s > 0, (np.sinh(sk * safe * x) / np.sinh(sk * safe)) ** (n - 1), 0.0)

    val, _ = quad_vec(ratio, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, norm="max")
    return s * val


def torsion_profile(n: int, k: float, R: float, ts: Sequence[float] | None = None) -> OepSolution:
    """Quadrature solution of Delta u = -1, u(R) = 0: u(t) = int_t^R g(s) ds."""
    n = check_dimension(n)
    k = check_curvature(k)
    R = check_positive(R, "R")
    if ts is None:
        ts = np.concatenate([[0.0], np.linspace(T0, R, _sample_count(R))])
    ts = np.asarray(ts, dtype=float)
    span = R - ts

    def integrand(y):
        return span * _torsion_slope(n, k, ts + span * y)

    us, _ = quad_vec(integrand, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, norm="max")
    dus = -_torsion_slope(n, k, ts)
    prof = RadialProfile(ts, us, dus)
    return OepSolution(n, k, R, prof, float(dus[-1]), float(us[0]), 0, "quadrature")


@dataclass
class P1Report:
    passed: bool
    lam: float
    worst_margin: float
    worst_t: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def verify_p1(f, lam: float, t_range: tuple[float, float] = (1e-3, 1e3),
              samples: int = 200) -> P1Report:
    """Check f(t) >= lam t at log-spaced sample points."""
    lam = check_positive(lam, "lambda")
    lo, hi = (float(v) for v in t_range)
    if not 0 < lo < hi:
        raise DomainError("t_range must satisfy 0 < lo < hi")
    ts = np.logspace(math.log10(lo), math.log10(hi), int(samples))
    margins = np.array([float(f(t)) - lam * t for t in ts])
    i = int(np.argmin(margins))
    return P1Report(bool(margins[i] >= 0), lam, float(margins[i]), float(ts[i]), int(samples))


@dataclass(frozen=True)
class QuasilinearCoefficients:
    """Coefficients a_i(u, s) and f(u, s) of the quasilinear operator, s = |grad u|."""

    a: Callable | Sequence[Callable]
    f: Callable | None
    lambda1: float
    lambda2: float
    n: int = 2

    def coefficient_list(self) -> list:
        if callable(self.a):
            return [self.a] * self.n
        return list(self.a)


@dataclass
class EllipticityReport:
    passed: bool
    a_min: float
    a_max: float
    lambda1: float
    lambda2: float

    def to_dict(self) -> dict:
        return asdict(self)


def ellipticity_check(coeffs: QuasilinearCoefficients, state_samples) -> EllipticityReport:
    """All sampled a_i(u, s) must lie in [Lambda1, Lambda2]."""
    if not (coeffs.lambda1 > 0 and coeffs.lambda2 > 0):
        raise DomainError("ellipticity constants must be positive")
    states = np.asarray(state_samples, dtype=float).reshape(-1, 2)
    vals = np.array([[float(a(u, s)) for a in coeffs.coefficient_list()] for u, s in states])
    lo, hi = float(vals.min()), float(vals.max())
    return EllipticityReport(bool(lo >= coeffs.lambda1 and hi <= coeffs.lambda2), lo, hi,
                             float(coeffs.lambda1), float(coeffs.lambda2))


@dataclass
class HeightReport:
    passed: bool
    h0: float
    eigen_scale: float
    critical_radius: float
    superlevel_radius: float
    diameter: float
    margin: float
    alpha: float
    lam: float
    # h0 - max u; positive means the superlevel set {u > h0} is empty
    height_gap: float = 0.0
    p1: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def height_levelset_check(sol: OepSolution, f, lam: float) -> HeightReport:
    """Compare the superlevel set {u > h0} with the ball of radius R_{lam,n}.

    h0 is the maximum of the lam-eigenfunction on B(R_{lam,n}) scaled so its
    boundary normal derivative equals sol.alpha.  Since that eigenfunction
    peaks at the centre with v(0) = 1, h0 = alpha / v'(R_{lam,n}).
    """
    if not sol.alpha < 0:
        raise DomainError("the Neumann constant alpha must be negative")
    lam = check_positive(lam, "lambda")
    thr = mckean_threshold(sol.n, sol.k)
    if lam <= thr:
        raise PreconditionError(f"lambda must exceed the threshold {thr}")
    umax = float(np.max(sol.profile.vs))
    p1 = verify_p1(f, lam, (min(1e-6, 1e-3 * umax), max(umax, 1e-3)))
    if not p1.passed:
        raise PreconditionError(
            f"f fails property P1 with lambda={lam} (margin {p1.worst_margin:g} "
            f"at t={p1.worst_t:g})")
    try:
        shot = shoot_first_zero(n=sol.n, k=sol.k, lam=lam)
    except NoZeroError as exc:
        raise PreconditionError(str(exc)) from exc
    R_lam = shot.R
    dv_end = float(shot.profile.dvs[-1])
    scale = sol.alpha / dv_end
    h0 = scale * float(np.max(shot.profile.vs))
    prof = sol.profile
    above = prof.vs > h0
    if not above.any():
        t_star = 0.0
    else:
        last = int(np.flatnonzero(above)[-1])
        if last == prof.ts.size - 1:
            t_star = prof.R
        else:
            a, b = prof.ts[last], prof.ts[last + 1]
            t_star = brentq(lambda t: float(prof(t)) - h0, a, b, xtol=1e-14)
    diam = 2.0 * t_star
    margin = 2.0 * R_lam - diam
    return HeightReport(bool(margin > 0), h0, scale, R_lam, t_star, diam, margin,
                        sol.alpha, lam, h0 - umax, p1.to_dict())
