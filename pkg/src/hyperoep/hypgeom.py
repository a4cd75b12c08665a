"""Exact primitives for hyperbolic space in the Poincare ball and upper half-space.

Conventions used throughout the package:

* the two models are related by the Cayley map ``sigma``, the Euclidean
  inversion in the sphere of radius sqrt(2) centred at ``-e_n``.  It is its
  own inverse, sends the ball origin to ``e_n`` and the ball point ``-e_n``
  to the point at infinity of the half-space;
* ideal points are unit vectors of the ball model;
* for an ideal point ``x`` the *chart* of ``x`` is ``sigma o H_x`` where
  ``H_x`` is the Householder reflection taking ``x`` to ``-e_n``.  In that
  chart ``x`` sits at infinity, horospheres at ``x`` are horizontal planes
  and geodesics ending at ``x`` are vertical lines.

Most functions come in two flavours: a ``ModelPoint`` level API that
validates its inputs, and vectorised array helpers (suffix ``_ball`` or
plain functions on ``ndarray``) that operate on the last axis and are used by
the grid code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ._validation import as_vector
from .errors import CoverageError, DomainError, ModelMismatchError

__all__ = [
    "Model",
    "ModelPoint",
    "IdealPoint",
    "IdealChart",
    "Geodesic",
    "TotallyGeodesicHyperplane",
    "IsometryDescriptor",
    "Reflection",
    "ParabolicTranslation",
    "HyperbolicTranslation",
    "Rotation",
    "Composition",
    "cayley",
    "ball_distance",
    "half_space_distance",
    "hyperbolic_distance",
    "convert_model",
    "convert_hyperplane",
    "reflect",
    "parabolic_translate",
    "parabolic_factors",
    "rotation_factors",
    "mobius_to_origin",
    "geodesic_through",
    "conformal_factor",
    "conformal_factor_gradient",
    "metric",
    "conformal_gradient",
    "conformal_hessian",
    "hyperbolic_laplacian",
    "invariance_check",
    "gradient_norm_identity",
]

_ORTHO_TOL = 1e-12


class Model(str, Enum):
    BALL = "ball"
    HALF_SPACE = "half-space"

    @classmethod
    def parse(cls, value) -> "Model":
        if isinstance(value, Model):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise DomainError(f"unknown model {value!r}") from None


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelPoint:
    """A point of H^n tagged with the model its coordinates refer to."""

    coords: np.ndarray
    model: Model = Model.BALL

    def __post_init__(self):
        model = Model.parse(self.model)
        x = as_vector(self.coords, "coords")
        if x.shape[0] < 2:
            raise DomainError("points need at least two coordinates")
        if model is Model.BALL and not float(x @ x) < 1.0:
            raise DomainError(f"ball-model point must have norm < 1, got {np.linalg.norm(x)}")
        if model is Model.HALF_SPACE and not x[-1] > 0.0:
            raise DomainError(f"half-space point must have y_n > 0, got {x[-1]}")
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "coords", _frozen(x))

    @classmethod
    def ball(cls, coords) -> "ModelPoint":
        return cls(coords, Model.BALL)

    @classmethod
    def half_space(cls, coords) -> "ModelPoint":
        return cls(coords, Model.HALF_SPACE)

    @classmethod
    def origin(cls, n: int, model=Model.BALL) -> "ModelPoint":
        if Model.parse(model) is Model.BALL:
            return cls(np.zeros(n), Model.BALL)
        return cls(np.eye(n)[-1], Model.HALF_SPACE)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def to(self, target) -> "ModelPoint":
        return convert_model(self, target)

    def ball_coords(self) -> np.ndarray:
        return self.coords if self.model is Model.BALL else cayley(self.coords)

    def __repr__(self):
        return f"ModelPoint({np.array2string(self.coords, precision=6)}, {self.model.value})"


@dataclass(frozen=True, eq=False)
class IdealPoint:
    """A point of the sphere at infinity, stored as a unit vector of the ball."""

    direction: np.ndarray

    def __post_init__(self):
        d = as_vector(self.direction, "direction")
        norm = float(np.linalg.norm(d))
        if abs(norm - 1.0) > 1e-9:
            raise DomainError(f"ideal point must be a unit vector, got norm {norm}")
        object.__setattr__(self, "direction", _frozen(d / norm))

    @classmethod
    def from_angle(cls, theta: float) -> "IdealPoint":
        return cls(np.array([math.cos(theta), math.sin(theta)]))

    @classmethod
    def half_space_infinity(cls, n: int) -> "IdealPoint":
        """The ideal point that the half-space model places at infinity."""
        return cls(-np.eye(n)[-1])

    @classmethod
    def from_half_space(cls, Y) -> "IdealPoint":
        """Ideal point (Y, 0) on the boundary plane of the half-space."""
        Y = as_vector(Y, "Y")
        return cls(cayley(np.append(Y, 0.0)))

    @property
    def n(self) -> int:
        return self.direction.shape[0]


def _ideal_vec(x) -> np.ndarray:
    if isinstance(x, IdealPoint):
        return x.direction
    return IdealPoint(x).direction


# ----------------------------------------------------------------------------
# model maps and distances


def cayley(x: np.ndarray) -> np.ndarray:
    """Inversion in the sphere |x + e_n|^2 = 2, vectorised over the last axis."""
    x = np.asarray(x, dtype=float)
    shifted = x.copy()
    shifted[..., -1] += 1.0
    sq = np.sum(shifted * shifted, axis=-1, keepdims=True)
    out = 2.0 * shifted / sq
    out[..., -1] -= 1.0
    return out


def ball_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hyperbolic distance between ball-model coordinate arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.linalg.norm(a - b, axis=-1)
    den = np.sqrt((1.0 - np.sum(a * a, axis=-1)) * (1.0 - np.sum(b * b, axis=-1)))
    return 2.0 * np.arcsinh(diff / den)


def half_space_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.linalg.norm(a - b, axis=-1)
    return 2.0 * np.arcsinh(diff / (2.0 * np.sqrt(a[..., -1] * b[..., -1])))


def hyperbolic_distance(p: ModelPoint, q: ModelPoint) -> float:
    if not isinstance(p, ModelPoint) or not isinstance(q, ModelPoint):
        raise DomainError("hyperbolic_distance expects ModelPoint arguments")
    if p.model is not q.model:
        raise ModelMismatchError(f"points in different models: {p.model.value} vs {q.model.value}")
    if p.n != q.n:
        raise DomainError("points have different dimensions")
    if p.model is Model.BALL:
        return float(ball_distance(p.coords, q.coords))
    return float(half_space_distance(p.coords, q.coords))


def convert_model(p: ModelPoint, target) -> ModelPoint:
    target = Model.parse(target)
    if p.model is target:
        return p
    y = cayley(p.coords)
    if target is Model.BALL:
        # rounding can put images of far-away points on the sphere itself
        norm = float(np.linalg.norm(y))
        if norm >= 1.0:
            raise DomainError("point is numerically on the ideal boundary after conversion")
    return ModelPoint(y, target)


def mobius_to_origin(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Ball isometry T_a with T_a(a) = 0, vectorised in ``x``.

    T_{-a} is its inverse; the formula also maps the unit sphere to itself.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    aa = float(a @ a)
    xx = np.sum(x * x, axis=-1, keepdims=True)
    ax = x @ a
    ax = ax[..., None]
    d = x - a
    dd = np.sum(d * d, axis=-1, keepdims=True)
    num = (1.0 - aa) * d - dd * a
    den = 1.0 - 2.0 * ax + aa * xx
    return num / den


# ----------------------------------------------------------------------------
# totally geodesic hyperplanes (generalised spheres)


@dataclass(frozen=True, eq=False)
class TotallyGeodesicHyperplane:
    """Totally geodesic hyperplane described as a Euclidean sphere or plane.

    ``kind == "sphere"`` uses ``center`` and ``radius``; ``kind == "plane"``
    is ``{x : normal . x = offset}`` with a unit normal.  In the half-space
    model spheres are centred on the boundary plane and planes are vertical.
    In the ball spheres meet the unit sphere orthogonally and planes pass
    through the origin.
    """

    model: Model
    kind: str
    center: np.ndarray | None = None
    radius: float | None = None
    normal: np.ndarray | None = None
    offset: float = 0.0

    def __post_init__(self):
        model = Model.parse(self.model)
        object.__setattr__(self, "model", model)
        if self.kind == "sphere":
            c = as_vector(self.center, "center")
            r = float(self.radius)
            if not r > 0:
                raise DomainError("sphere radius must be positive")
            scale = 1.0 + float(c @ c)
            if model is Model.HALF_SPACE and abs(c[-1]) > _ORTHO_TOL * scale:
                raise DomainError("half-space hemisphere must be centred on y_n = 0")
            if model is Model.BALL and abs(float(c @ c) - 1.0 - r * r) > _ORTHO_TOL * scale:
                raise DomainError("ball sphere must be orthogonal to the unit sphere")
            object.__setattr__(self, "center", _frozen(c))
            object.__setattr__(self, "radius", r)
        elif self.kind == "plane":
            u = as_vector(self.normal, "normal")
            nu = float(np.linalg.norm(u))
            if abs(nu - 1.0) > 1e-9:
                raise DomainError("plane normal must be a unit vector")
            u = u / nu
            off = float(self.offset)
            if model is Model.HALF_SPACE and abs(u[-1]) > _ORTHO_TOL:
                raise DomainError("half-space plane must be vertical")
            if model is Model.BALL and abs(off) > _ORTHO_TOL:
                raise DomainError("ball-model plane must pass through the origin")
            object.__setattr__(self, "normal", _frozen(u))
            object.__setattr__(self, "offset", off)
        else:
            raise DomainError(f"unknown hyperplane kind {self.kind!r}")

    # constructors -----------------------------------------------------------
    @classmethod
    def hemisphere(cls, Y0, radius: float) -> "TotallyGeodesicHyperplane":
        Y0 = as_vector(Y0, "Y0")
        return cls(Model.HALF_SPACE, "sphere", center=np.append(Y0, 0.0), radius=radius)

    @classmethod
    def vertical_plane(cls, normal, offset: float = 0.0) -> "TotallyGeodesicHyperplane":
        normal = as_vector(normal, "normal")
        return cls(Model.HALF_SPACE, "plane", normal=np.append(normal, 0.0), offset=offset)

    @classmethod
    def ball_sphere(cls, center) -> "TotallyGeodesicHyperplane":
        c = as_vector(center, "center")
        cc = float(c @ c)
        if cc <= 1.0:
            raise DomainError("orthogonal sphere centre must lie outside the unit ball")
        return cls(Model.BALL, "sphere", center=c, radius=math.sqrt(cc - 1.0))

    @classmethod
    def ball_plane(cls, normal) -> "TotallyGeodesicHyperplane":
        return cls(Model.BALL, "plane", normal=normal, offset=0.0)

    # geometry --------------------------------------------------------------
    @property
    def n(self) -> int:
        return (self.center if self.kind == "sphere" else self.normal).shape[0]

    def side(self, x: np.ndarray) -> np.ndarray:
        """Signed quantity, negative on the inside of the sphere / below the plane."""
        x = np.asarray(x, dtype=float)
        if self.kind == "sphere":
            d = x - self.center
            return np.sum(d * d, axis=-1) - self.radius**2
        return x @ self.normal - self.offset

    def reflect_coords(self, x: np.ndarray) -> np.ndarray:
        """Euclidean inversion / mirror image, vectorised; valid in either model."""
        x = np.asarray(x, dtype=float)
        if self.kind == "sphere":
            d = x - self.center
            sq = np.sum(d * d, axis=-1, keepdims=True)
            return self.center + self.radius**2 * d / sq
        s = x @ self.normal - self.offset
        return x - 2.0 * s[..., None] * self.normal

    def reflect_jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if self.kind == "sphere":
            d = x - self.center
            sq = float(d @ d)
            return self.radius**2 * (np.eye(n) / sq - 2.0 * np.outer(d, d) / sq**2)
        return np.eye(n) - 2.0 * np.outer(self.normal, self.normal)

    def to(self, target) -> "TotallyGeodesicHyperplane":
        return convert_hyperplane(self, target)

    def householder(self, H: np.ndarray) -> "TotallyGeodesicHyperplane":
        """Image under an orthogonal linear map (ball model only)."""
        if self.kind == "sphere":
            c = H @ self.center
            return TotallyGeodesicHyperplane(self.model, "sphere", center=c,
                                             radius=math.sqrt(max(float(c @ c) - 1.0, 0.0)))
        return TotallyGeodesicHyperplane(self.model, "plane", normal=H @ self.normal, offset=0.0)


def _sigma_sphere_image(kind, center, radius, normal, offset, n):
    """Image of a generalised sphere under ``cayley``; returns raw descriptors."""
    a = -np.eye(n)[-1]
    if kind == "sphere":
        ca = center - a
        caa = float(ca @ ca)
        m = caa - radius * radius
        if abs(m) <= 1e-13 * caa:
            u = ca / math.sqrt(caa)
            return "plane", None, None, u, float(u @ a) + 1.0 / radius
        c2 = a + 2.0 * ca / m
        return "sphere", c2, 2.0 * radius / abs(m), None, 0.0
    d = offset - float(normal @ a)
    if abs(d) <= 1e-13:
        return "plane", None, None, normal, offset
    return "sphere", a + normal / d, 1.0 / abs(d), None, 0.0


def convert_hyperplane(P: TotallyGeodesicHyperplane, target) -> TotallyGeodesicHyperplane:
    target = Model.parse(target)
    if P.model is target:
        return P
    n = P.n
    kind, c, r, u, off = _sigma_sphere_image(P.kind, P.center, P.radius, P.normal, P.offset, n)
    # re-impose the orthogonality condition exactly; conversion error is ~1e-16 relative
    if target is Model.HALF_SPACE:
        if kind == "sphere":
            c = c.copy()
            c[-1] = 0.0
            return TotallyGeodesicHyperplane(target, "sphere", center=c, radius=r)
        u = u.copy()
        u[-1] = 0.0
        return TotallyGeodesicHyperplane(target, "plane", normal=u / np.linalg.norm(u), offset=off)
    if kind == "sphere":
        return TotallyGeodesicHyperplane(target, "sphere", center=c,
                                         radius=math.sqrt(max(float(c @ c) - 1.0, 0.0)))
    return TotallyGeodesicHyperplane(target, "plane", normal=u, offset=0.0)


def reflect(P: TotallyGeodesicHyperplane, p: ModelPoint) -> ModelPoint:
    """Reflection through P; the hyperplane is converted to the point's model."""
    if not isinstance(p, ModelPoint):
        raise DomainError("reflect expects a ModelPoint")
    Q = convert_hyperplane(P, p.model)
    if Q.kind == "sphere":
        d = p.coords - Q.center
        if float(d @ d) == 0.0:
            raise DomainError("point coincides with the inversion centre")
    return ModelPoint(Q.reflect_coords(p.coords), p.model)


# ----------------------------------------------------------------------------
# ideal charts and geodesics


def _householder_to_south(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    w = x.copy()
    w[-1] += 1.0
    ww = float(w @ w)
    if ww == 0.0:
        return np.eye(n)
    return np.eye(n) - 2.0 * np.outer(w, w) / ww


class IdealChart:
    """Half-space chart placing the ideal point ``x`` at infinity."""

    def __init__(self, x):
        self.x = _ideal_vec(x)
        self.n = self.x.shape[0]
        self.H = _householder_to_south(self.x)
        self.trivial = bool(np.array_equal(self.H, np.eye(self.n)))

    def from_ball(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return cayley(z if self.trivial else z @ self.H)

    def to_ball(self, Q: np.ndarray) -> np.ndarray:
        b = cayley(np.asarray(Q, dtype=float))
        return b if self.trivial else b @ self.H

    def from_point(self, p: ModelPoint) -> np.ndarray:
        if p.model is Model.HALF_SPACE and self.trivial:
            return np.array(p.coords)
        return self.from_ball(p.ball_coords())

    def to_point(self, Q: np.ndarray, model) -> ModelPoint:
        model = Model.parse(model)
        if model is Model.HALF_SPACE and self.trivial:
            return ModelPoint(Q, model)
        return ModelPoint(self.to_ball(Q), Model.BALL).to(model)

    def hyperplane_to_ball(self, P: TotallyGeodesicHyperplane) -> TotallyGeodesicHyperplane:
        """Pull back a half-space hyperplane given in chart coordinates."""
        B = convert_hyperplane(P, Model.BALL)
        return B if self.trivial else B.householder(self.H)


@dataclass(frozen=True, eq=False)
class Geodesic:
    """Oriented unit-speed geodesic from ``y`` (s -> -inf) to ``x`` (s -> +inf).

    The parameter is normalised so that s = 0 is the point closest to the
    ball origin.
    """

    x: np.ndarray
    y: np.ndarray
    chart: IdealChart = field(init=False, repr=False)
    ystar: np.ndarray = field(init=False, repr=False)
    h0: float = field(init=False, repr=False)

    def __post_init__(self):
        x = _ideal_vec(self.x)
        y = _ideal_vec(self.y)
        if x.shape != y.shape:
            raise DomainError("endpoints have different dimensions")
        if np.linalg.norm(x - y) < 1e-12:
            raise DomainError("geodesic endpoints must be distinct")
        chart = IdealChart(x)
        Y = chart.from_ball(y)
        ystar = np.array(Y[:-1])
        o = chart.from_ball(np.zeros_like(x))
        h0 = math.sqrt(float(np.sum((ystar - o[:-1]) ** 2)) + float(o[-1]) ** 2)
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "ystar", _frozen(ystar))
        object.__setattr__(self, "h0", h0)

    @classmethod
    def through_origin(cls, direction) -> "Geodesic":
        d = _ideal_vec(direction)
        return cls(d, -d)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def chart_point(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape + (self.n,))
        out[..., :-1] = self.ystar
        out[..., -1] = self.h0 * np.exp(s)
        return out

    def point_ball(self, s) -> np.ndarray:
        return self.chart.to_ball(self.chart_point(s))

    def __call__(self, s: float, model=Model.BALL) -> ModelPoint:
        return self.chart.to_point(self.chart_point(float(s)), model)

    def foot_parameter(self, z: np.ndarray) -> np.ndarray:
        """Parameter of the orthogonal projection onto the geodesic (ball coords)."""
        Q = self.chart.from_ball(z)
        horiz = Q[..., :-1] - self.ystar
        height = np.sqrt(np.sum(horiz * horiz, axis=-1) + Q[..., -1] ** 2)
        return np.log(height / self.h0)

    def distance_to(self, z: np.ndarray) -> np.ndarray:
        """Hyperbolic distance from ball points to the whole geodesic."""
        Q = self.chart.from_ball(z)
        horiz = np.linalg.norm(Q[..., :-1] - self.ystar, axis=-1)
        return np.arcsinh(horiz / Q[..., -1])

    def tau(self, z: np.ndarray) -> np.ndarray:
        """Foliation coordinate: z lies on the orthogonal hyperplane through gamma(tau)."""
        Q = self.chart.from_ball(z)
        horiz = Q[..., :-1] - self.ystar
        r = np.sqrt(np.sum(horiz * horiz, axis=-1) + Q[..., -1] ** 2)
        return np.log(r / self.h0)

    def reversed(self) -> "Geodesic":
        return Geodesic(self.y, self.x)


def geodesic_through(p: ModelPoint, q: ModelPoint) -> Geodesic:
    """Complete geodesic through p and q, oriented from p towards q."""
    a = p.ball_coords()
    b = q.ball_coords()
    qq = mobius_to_origin(a, b)
    nq = float(np.linalg.norm(qq))
    if nq < 1e-14:
        raise DomainError("points coincide")
    d = qq / nq
    x = mobius_to_origin(-a, d)
    y = mobius_to_origin(-a, -d)
    return Geodesic(x / np.linalg.norm(x), y / np.linalg.norm(y))


# ----------------------------------------------------------------------------
# isometries


class IsometryDescriptor:
    """Tagged hyperbolic isometry.  Subclasses implement ``apply_ball``."""

    kind = "isometry"

    def apply_ball(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, p: ModelPoint) -> ModelPoint:
        return ModelPoint(self.apply_ball(p.ball_coords()), Model.BALL).to(p.model)

    def __call__(self, p: ModelPoint) -> ModelPoint:
        return self.apply(p)

    def inverse(self) -> "IsometryDescriptor":
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Reflection(IsometryDescriptor):
    P: TotallyGeodesicHyperplane
    kind = "reflection"

    def apply_ball(self, z):
        return convert_hyperplane(self.P, Model.BALL).reflect_coords(z)

    def apply(self, p):
        return reflect(self.P, p)

    def inverse(self):
        return self


class _ChartIsometry(IsometryDescriptor):
    """Isometry described by a Euclidean similarity of an ideal chart."""

    chart: IdealChart

    def apply_chart(self, Q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_ball(self, z):
        return self.chart.to_ball(self.apply_chart(self.chart.from_ball(z)))

    def apply(self, p):
        return self.chart.to_point(self.apply_chart(self.chart.from_point(p)), p.model)


@dataclass(frozen=True, eq=False)
class ParabolicTranslation(_ChartIsometry):
    """Horizontal translation by ``v`` in the chart of the fixed ideal point ``x``."""

    x: IdealPoint
    v: np.ndarray
    kind = "parabolic"

    def __post_init__(self):
        x = self.x if isinstance(self.x, IdealPoint) else IdealPoint(self.x)
        v = as_vector(self.v, "v", dim=x.n - 1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "chart", IdealChart(x))

    def apply_chart(self, Q):
        Q = np.array(Q, dtype=float)
        Q[..., :-1] += self.v
        return Q

    def inverse(self):
        return ParabolicTranslation(self.x, -self.v)


@dataclass(frozen=True, eq=False)
class HyperbolicTranslation(_ChartIsometry):
    """Translation by signed distance ``t`` along ``beta`` (towards beta.x for t > 0)."""

    beta: Geodesic
    t: float
    kind = "hyperbolic-translation"

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "chart", self.beta.chart)

    def apply_chart(self, Q):
        Q = np.array(Q, dtype=float)
        base = np.append(self.beta.ystar, 0.0)
        return base + math.exp(self.t) * (Q - base)

    def inverse(self):
        return HyperbolicTranslation(self.beta, -self.t)


@dataclass(frozen=True, eq=False)
class Rotation(_ChartIsometry):
    """Rotation by ``theta`` about ``beta`` in the (Y1, Y2) plane of its chart.

    In H^2 the only non-trivial isometry fixing a geodesic pointwise is the
    reflection across it, so there ``theta`` must be 0 or pi (mod 2 pi).
    """

    beta: Geodesic
    theta: float
    kind = "rotation"

    def __post_init__(self):
        theta = float(self.theta)
        if self.beta.n == 2:
            m = math.remainder(theta, 2 * math.pi)
            if not (abs(m) < 1e-12 or abs(abs(m) - math.pi) < 1e-12):
                raise DomainError("in H^2 a rotation about a geodesic has angle 0 or pi")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "chart", self.beta.chart)

    def apply_chart(self, Q):
        Q = np.array(Q, dtype=float)
        if self.beta.n == 2:
            if abs(math.remainder(self.theta, 2 * math.pi)) > 1.0:
                Q[..., 0] = 2.0 * self.beta.ystar[0] - Q[..., 0]
            return Q
        c, s = math.cos(self.theta), math.sin(self.theta)
        y1 = Q[..., 0] - self.beta.ystar[0]
        y2 = Q[..., 1] - self.beta.ystar[1]
        Q[..., 0] = self.beta.ystar[0] + c * y1 - s * y2
        Q[..., 1] = self.beta.ystar[1] + s * y1 + c * y2
        return Q

    def inverse(self):
        return Rotation(self.beta, -self.theta)


@dataclass(frozen=True, eq=False)
class Composition(IsometryDescriptor):
    """``maps[0] o maps[1] o ...``: the last entry is applied first."""

    maps: tuple
    kind = "composition"

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))

    def apply_ball(self, z):
        for m in reversed(self.maps):
            z = m.apply_ball(z)
        return z

    def apply(self, p):
        for m in reversed(self.maps):
            p = m.apply(p)
        return p

    def inverse(self):
        return Composition(tuple(m.inverse() for m in self.maps[::-1]))


def parabolic_translate(x, v, p: ModelPoint) -> ModelPoint:
    x = x if isinstance(x, IdealPoint) else IdealPoint(x)
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != x.n - 1:
        raise DomainError(f"translation vector must have length {x.n - 1}")
    if p.n != x.n:
        raise DomainError("ideal point and point have different dimensions")
    return ParabolicTranslation(x, v).apply(p)


def parabolic_factors(x, v) -> tuple[Reflection, Reflection]:
    """Reflections (R1, R2) with R1 o R2 equal to the parabolic translation by v.

    In the chart of x both are vertical planes with normal v/|v|, at offsets
    |v|/2 (R1) and 0 (R2).
    """
    x = x if isinstance(x, IdealPoint) else IdealPoint(x)
    v = as_vector(v, "v", dim=x.n - 1)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise DomainError("the zero translation has no canonical factorisation")
    chart = IdealChart(x)
    u = v / nv
    P1 = TotallyGeodesicHyperplane.vertical_plane(u, 0.5 * nv)
    P2 = TotallyGeodesicHyperplane.vertical_plane(u, 0.0)
    if chart.trivial:
        return Reflection(P1), Reflection(P2)
    return Reflection(chart.hyperplane_to_ball(P1)), Reflection(chart.hyperplane_to_ball(P2))


def rotation_factors(beta: Geodesic, theta: float) -> tuple[Reflection, Reflection]:
    """Reflections in two hyperplanes containing beta whose product rotates by theta."""
    if beta.n < 3:
        raise DomainError("rotation factorisation needs n >= 3")
    n = beta.n

    def plane(phi):
        u = np.zeros(n - 1)
        u[0], u[1] = -math.sin(phi), math.cos(phi)
        off = float(u @ beta.ystar)
        return beta.chart.hyperplane_to_ball(TotallyGeodesicHyperplane.vertical_plane(u, off))

    return Reflection(plane(0.5 * theta)), Reflection(plane(0.0))


# ----------------------------------------------------------------------------
# conformal calculus


def _half_or_ball(p: ModelPoint):
    if not isinstance(p, ModelPoint):
        raise DomainError("expected a ModelPoint")
    return p.model, p.coords


def conformal_factor(p: ModelPoint) -> float:
    """rho with g = e^{2 rho} <.,.>: -log y_n (half-space), log(2/(1-|z|^2)) (ball)."""
    model, x = _half_or_ball(p)
    if model is Model.HALF_SPACE:
        return -math.log(x[-1])
    return math.log(2.0 / (1.0 - float(x @ x)))


def conformal_factor_gradient(p: ModelPoint) -> np.ndarray:
    model, x = _half_or_ball(p)
    if model is Model.HALF_SPACE:
        g = np.zeros_like(x)
        g[-1] = -1.0 / x[-1]
        return g
    return 2.0 * x / (1.0 - float(x @ x))


def metric(p: ModelPoint, X, Y) -> float:
    return math.exp(2.0 * conformal_factor(p)) * float(np.dot(X, Y))


def conformal_gradient(euclidean_gradient, p: ModelPoint) -> np.ndarray:
    """Metric gradient e^{-2 rho} grad0 f, so that g(grad f, X) = df(X)."""
    g0 = as_vector(euclidean_gradient, "gradient", dim=p.n)
    return math.exp(-2.0 * conformal_factor(p)) * g0


def conformal_hessian(euclidean_hessian, euclidean_gradient, p: ModelPoint, X, Y) -> float:
    H0 = np.asarray(euclidean_hessian, dtype=float)
    g0 = as_vector(euclidean_gradient, "gradient", dim=p.n)
    X = as_vector(X, "X", dim=p.n)
    Y = as_vector(Y, "Y", dim=p.n)
    dr = conformal_factor_gradient(p)
    return float(
        X @ H0 @ Y
        + (X @ Y) * (g0 @ dr)
        - (X @ dr) * (g0 @ Y)
        - (Y @ dr) * (g0 @ X)
    )


def hyperbolic_laplacian(euclidean_hessian, euclidean_gradient, p: ModelPoint) -> float:
    """Trace of the hyperbolic Hessian against the metric."""
    eye = np.eye(p.n)
    tr = sum(conformal_hessian(euclidean_hessian, euclidean_gradient, p, e, e) for e in eye)
    return math.exp(-2.0 * conformal_factor(p)) * tr


def _fd_derivatives(u: Callable, q: np.ndarray, h: float, patch):
    """Central-difference value, gradient and Hessian of u at q with step h."""
    n = q.shape[0]
    offsets = [np.zeros(n)]
    eye = np.eye(n)
    for i in range(n):
        offsets += [h * eye[i], -h * eye[i]]
        for j in range(i + 1, n):
            for si in (1, -1):
                for sj in (1, -1):
                    offsets.append(h * (si * eye[i] + sj * eye[j]))
    pts = q + np.array(offsets)
    if np.any(pts[:, -1] <= 0):
        raise CoverageError("finite-difference stencil leaves the half-space")
    if patch is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in patch)
        if np.any(pts < lo) or np.any(pts > hi):
            raise CoverageError("finite-difference stencil leaves the sampled patch")
    vals = np.array([float(u(pt)) for pt in pts])
    u0 = vals[0]
    grad = np.empty(n)
    hess = np.empty((n, n))
    k = 1
    idx = {}
    for i in range(n):
        up, um = vals[k], vals[k + 1]
        k += 2
        grad[i] = (up - um) / (2 * h)
        hess[i, i] = (up - 2 * u0 + um) / (h * h)
        for j in range(i + 1, n):
            idx[(i, j)] = k
            k += 4
    for (i, j), k0 in idx.items():
        pp, pm, mp, mm = vals[k0:k0 + 4]
        hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return u0, grad, hess


def _operator(u0, grad, hess, q, frame, a, f):
    """sum_i a_i(u, |grad u|) Hess(u)(v_i, v_i) / g(v_i, v_i) + f(u, |grad u|)."""
    p = ModelPoint(q, Model.HALF_SPACE)
    s = q[-1] * float(np.linalg.norm(grad))
    total = 0.0
    for i, v in enumerate(frame):
        gvv = float(v @ v) / q[-1] ** 2
        total += a[i](u0, s) * conformal_hessian(hess, grad, p, v, v) / gvv
    return total + f(u0, s)


def _coefficients(a, n):
    if callable(a):
        return [a] * n
    a = list(a)
    if len(a) != n:
        raise DomainError(f"expected {n} coefficient functions, got {len(a)}")
    return a


def invariance_check(u: Callable, a, f: Callable, p: ModelPoint, h: float = 1e-4,
                     P: TotallyGeodesicHyperplane | None = None, patch=None) -> float:
    """Residual |F u(p') - F w(p)| for w = u o R and p' = R(p).

    ``u`` maps a half-space coordinate vector to a float.  ``a`` is either
    one callable ``a(u, s)`` shared by all directions or a sequence of ``n``
    of them; ``f(u, s)`` is the reaction term.  F w(p) is evaluated in the
    coordinate frame e_i and F u(p') in the image frame v_i = dR_p(e_i), both
    from central-difference derivatives with step ``h * y_n``.  The exact
    value is zero because R is an isometry, so the residual measures the
    finite-difference error, which is O(h^2).
    """
    if p.model is not Model.HALF_SPACE:
        raise ModelMismatchError("invariance_check works in the half-space model")
    P = TotallyGeodesicHyperplane.hemisphere(np.zeros(p.n - 1), 1.0) if P is None else P
    P = convert_hyperplane(P, Model.HALF_SPACE)
    n = p.n
    a = _coefficients(a, n)
    x = np.array(p.coords)
    if abs(float(P.side(x))) < 1e-9:
        raise DomainError("point lies on the hyperplane of reflection")
    xr = P.reflect_coords(x)
    J = P.reflect_jacobian(x)

    def w(y):
        return u(P.reflect_coords(np.asarray(y, dtype=float)))

    w0, gw, Hw = _fd_derivatives(w, x, h * x[-1], patch)
    u0, gu, Hu = _fd_derivatives(u, xr, h * xr[-1], patch)
    Fw = _operator(w0, gw, Hw, x, np.eye(n), a, f)
    Fu = _operator(u0, gu, Hu, xr, J.T, a, f)
    return abs(Fu - Fw)


def gradient_norm_identity(grad_u: Callable, p: ModelPoint,
                           P: TotallyGeodesicHyperplane | None = None) -> tuple[float, float]:
    """Return (|grad u|(p'), |grad w|(p)) as hyperbolic norms.

    grad0 w(p) is obtained by pulling back grad0 u(p') through dR_p; for the
    unit hemisphere this is grad0 u(p')/|p|^2 - 2 <grad0 u(p'), p> p / |p|^4.
    """
    if p.model is not Model.HALF_SPACE:
        raise ModelMismatchError("gradient_norm_identity works in the half-space model")
    P = TotallyGeodesicHyperplane.hemisphere(np.zeros(p.n - 1), 1.0) if P is None else P
    P = convert_hyperplane(P, Model.HALF_SPACE)
    x = np.array(p.coords)
    xr = P.reflect_coords(x)
    gu = np.asarray(grad_u(xr), dtype=float)
    gw = P.reflect_jacobian(x).T @ gu
    return xr[-1] * float(np.linalg.norm(gu)), x[-1] * float(np.linalg.norm(gw))
