"""Boundary at infinity: Busemann functions, horoballs and cones at infinity.

Busemann functions are normalised by B(ball origin) = 0, which in the ball
gives the closed form

    B_x(z) = log(|x - z|^2 / (1 - |z|^2)).

The geodesic from -x through the origin to x is gamma(s) = tanh(s/2) x and
B_x(gamma(s)) = -s, so horoballs {B < t} at x shrink towards x as t decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .hypgeom import Geodesic, IdealPoint, Model, ModelPoint, ball_distance

if TYPE_CHECKING:
    from .domains import DomainGrid

__all__ = [
    "IdealPoint",
    "Horoball",
    "ConeAtInfinity",
    "busemann",
    "busemann_ball",
    "busemann_limit",
    "horoball_contains",
    "cone_distance",
    "cone_contains",
    "ConicalEstimate",
    "conical_radius_estimate",
]


def _ideal(x) -> IdealPoint:
    return x if isinstance(x, IdealPoint) else IdealPoint(x)


def busemann_ball(x, z: np.ndarray) -> np.ndarray:
    """Vectorised closed-form Busemann function at the unit vector x."""
    x = _ideal(x).direction
    z = np.asarray(z, dtype=float)
    d = x - z
    return np.log(np.sum(d * d, axis=-1) / (1.0 - np.sum(z * z, axis=-1)))


def busemann(x, p: ModelPoint) -> float:
    if not isinstance(p, ModelPoint):
        raise DomainError("busemann expects an interior ModelPoint")
    return float(busemann_ball(x, p.ball_coords()))


def busemann_limit(x, p: ModelPoint, T: float = 40.0) -> float:
    """Truncated limit d(p, gamma(T)) - T along gamma(s) = tanh(s/2) x.

    1 - tanh(T/2) = 2/(e^T + 1) is carried separately: at T = 40 the point
    itself rounds onto the unit sphere.
    """
    x = _ideal(x).direction
    z = p.ball_coords()
    one_minus = 2.0 / (math.exp(T) + 1.0)
    q = (1.0 - one_minus) * x
    den = math.sqrt((1.0 - float(z @ z)) * one_minus * (2.0 - one_minus))
    return 2.0 * math.asinh(float(np.linalg.norm(z - q)) / den) - T


@dataclass(frozen=True, eq=False)
class Horoball:
    """Strict sub-level set {B_base < level}."""

    base: IdealPoint
    level: float

    def __post_init__(self):
        object.__setattr__(self, "base", _ideal(self.base))
        object.__setattr__(self, "level", float(self.level))

    def contains_ball(self, z: np.ndarray) -> np.ndarray:
        return busemann_ball(self.base, z) < self.level

    def euclidean_disk(self) -> tuple[np.ndarray, float]:
        """Centre and radius of the Euclidean ball the horoball occupies."""
        e = math.exp(self.level)
        return self.base.direction / (1.0 + e), e / (1.0 + e)


def horoball_contains(D: Horoball, p: ModelPoint) -> bool:
    return bool(busemann(D.base, p) < D.level)


@dataclass(frozen=True, eq=False)
class ConeAtInfinity:
    """Points within distance r of the ray gamma([s, inf)), gamma from y to the apex x."""

    x: IdealPoint
    y: IdealPoint
    r: float
    s: float

    def __post_init__(self):
        x, y = _ideal(self.x), _ideal(self.y)
        if float(np.linalg.norm(x.direction - y.direction)) < 1e-12:
            raise DomainError("cone needs distinct ideal points")
        if not self.r > 0:
            raise DomainError("cone radius must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "s", float(self.s))

    @property
    def axis(self) -> Geodesic:
        return Geodesic(self.x.direction, self.y.direction)


def cone_distance(C: ConeAtInfinity, p: ModelPoint, closed_form: bool = False) -> float:
    """dist(p, gamma([s, inf))) by bounded scalar minimisation.

    s~ -> d(gamma(s~), p) is convex, and by the triangle inequality any
    minimiser with value below d(gamma(s), p) lies in [s, s + 2 d(gamma(s), p) + |s|].
    """
    g = C.axis
    z = p.ball_coords()
    if closed_form:
        foot = float(g.foot_parameter(z))
        if foot >= C.s:
            return float(g.distance_to(z))
        return float(ball_distance(g.point_ball(C.s), z))

    def f(t):
        return float(ball_distance(g.point_ball(t), z))

    f_s = f(C.s)
    hi = C.s + 2.0 * f_s + abs(C.s) + 1.0
    res = minimize_scalar(f, bounds=(C.s, hi), method="bounded",
                          options={"xatol": 1e-10, "maxiter": 500})
    return min(f_s, float(res.fun))


def cone_contains(C: ConeAtInfinity, p: ModelPoint) -> bool:
    return cone_distance(C, p) <= C.r


# ----------------------------------------------------------------------------
# conical points of gridded domains


@dataclass
class ConicalEstimate:
    radius: float
    best_y: np.ndarray | None
    best_s: float | None
    directions: int
    starts: int

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "best_y": None if self.best_y is None else self.best_y.tolist(),
            "best_s": self.best_s,
            "directions": self.directions,
            "starts": self.starts,
        }


def conical_radius_estimate(domain: "DomainGrid", x, n_directions: int = 72,
                            n_starts: int = 24, full: bool = False):
    """Largest r such that a cone at x of radius r (grid-resolved) lies in the mask.

    Only cells whose centres are representable (|c| < 1 - eps_boundary) take
    part.  For each second point y on a circle of directions and each start
    s along the geodesic from y to x, the admissible radius is 0 if the ray
    itself crosses an unmasked cell, and otherwise the largest masked-cell
    distance to the ray below the distance of the nearest unmasked cell.
    Starts are also capped so the disk of radius r about gamma(s) stays on
    the representable part of the grid; otherwise a start near the edge
    would see only half its neighbourhood.  The estimate is the maximum over (y, s).  The distance of a cell with
    foot parameter sigma and axis distance d to the ray from s is
    arccosh(cosh d cosh(max(0, s - sigma))).
    """
    xv = _ideal(x).direction
    if xv.shape[0] != 2:
        raise DomainError("conical_radius_estimate works on planar grids")
    centers = domain.centers().reshape(-1, 2)
    limit = 1.0 - domain.epsilon_boundary
    rep = np.sum(centers * centers, axis=1) < limit**2
    mask = domain.mask.reshape(-1)
    inside = centers[mask & rep]
    outside = domain.unmasked_representable_centers()
    best = (0.0, None, None)
    if inside.size == 0:
        est = ConicalEstimate(0.0, None, None, n_directions, n_starts)
        return est if full else 0.0
    window = 2.0 * math.atanh(limit)
    ang_x = math.atan2(xv[1], xv[0])
    for j in range(n_directions):
        phi = ang_x + math.pi * (2 * j + 1) / n_directions
        y = np.array([math.cos(phi), math.sin(phi)])
        if float(np.linalg.norm(y - xv)) < 0.05:
            continue
        g = Geodesic(xv, y)
        # start parameters from the masked stretch of the axis up to the representable edge
        s_scan = np.linspace(-8.0, 8.0, 1601)
        pts = g.point_ball(s_scan)
        ok = np.sum(pts * pts, axis=1) < limit**2
        if not ok.any():
            continue
        s_max = float(s_scan[ok].max())
        on_axis = domain.contains(pts) & ok
        if not on_axis.any():
            continue
        s_min = float(s_scan[on_axis].min())
        sig_in, d_in = g.foot_parameter(inside), g.distance_to(inside)
        if outside.size:
            sig_out, d_out = g.foot_parameter(outside), g.distance_to(outside)
        half_cell = domain.cell_size_hyperbolic(outside) if outside.size else None
        for s in np.linspace(s_min, s_max, n_starts):
            # ray crossing: unmasked representable cells hit by the axis past s
            if outside.size:
                hit = (sig_out >= s) & (d_out < half_cell)
                if hit.any():
                    continue
                r_out = np.arccosh(np.cosh(d_out) * np.cosh(np.maximum(0.0, s - sig_out)))
                r_star = float(r_out.min())
            else:
                r_star = math.inf
            # the disk of radius r about gamma(s) must be visible on the grid
            r_star = min(r_star, window - 2.0 * math.atanh(float(np.linalg.norm(g.point_ball(s)))))
            r_in = np.arccosh(np.cosh(d_in) * np.cosh(np.maximum(0.0, s - sig_in)))
            below = r_in[r_in < r_star]
            if below.size == 0:
                continue
            r = float(below.max())
            if r > best[0]:
                best = (r, y, float(s))
    est = ConicalEstimate(best[0], best[1], best[2], n_directions, n_starts)
    return est if full else est.radius
