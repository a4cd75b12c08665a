"""Reflection sweeps, symmetry classification and cap graph checks on planar grids.

A sweep along an oriented geodesic gamma (from gamma.y to gamma.x) uses the
foliation by hyperplanes P(t) orthogonal to gamma at gamma(t).  The cap
Omega_t^- is the part of the domain with foliation coordinate tau < t,
i.e. on the side of gamma.y.  It is reflected through P(t) and compared
with the domain and with u on the other side through

    w_t(q) = u(q) - u(R_t q),   q in R_t(Omega_t^-).

Fields are stored zero-extended on the grid's cell array and evaluated off
the lattice by bilinear interpolation.  Comparisons of u only use reflected
points whose four interpolation cells are all masked; the boundary is handled
by mask lookups with a one-cell tolerance.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize, minimize_scalar

from .asymptotic import IdealPoint
from .domains import DomainGrid, _perpendicular_endpoints
from .errors import DomainError, PreconditionError
from .hypgeom import (Geodesic, IdealChart, IsometryDescriptor, Model, ModelPoint,
                      ParabolicTranslation, TotallyGeodesicHyperplane, ball_distance,
                      geodesic_through, mobius_to_origin)

__all__ = [
    "FieldOnGrid",
    "SweepResult",
    "SymmetryClassification",
    "CapGraphReport",
    "foliation_plane",
    "hyperplane_geodesic",
    "transform_hyperplane",
    "direction_geodesic",
    "reflection_sweep",
    "symmetry_classify",
    "cap_graph_check",
]

ORTHOGONAL_TOL_DEG = 5.0
TOL_FACTOR = 3.0
MIN_COVERAGE = 0.5
_SEARCH_SAMPLE = 4000


# ----------------------------------------------------------------------------
# sampled fields


@dataclass(frozen=True, eq=False)
class FieldOnGrid:
    """A sampled function on the masked cells of a grid (zero elsewhere).

    ``values`` may be given per masked cell (in ``mask`` order) or as a full
    array shaped like the mask.
    """

    domain: DomainGrid
    values: np.ndarray
    _pad_values: np.ndarray = field(init=False, repr=False)
    _pad_mask: np.ndarray = field(init=False, repr=False)
    _dilated: np.ndarray = field(init=False, repr=False)
    _pad_err: np.ndarray = field(init=False, repr=False)
    _floor: float = field(init=False, repr=False)

    def __post_init__(self):
        mask = self.domain.mask
        v = np.asarray(self.values, dtype=float)
        if v.shape == mask.shape:
            full = np.where(mask, v, 0.0)
        elif v.ndim == 1 and v.size == mask.sum():
            full = np.zeros(mask.shape)
            full[mask] = v
        else:
            raise DomainError("values must match the mask shape or the masked cell count")
        if not np.all(np.isfinite(full)):
            raise DomainError("field values must be finite")
        full.setflags(write=False)
        object.__setattr__(self, "values", full)
        object.__setattr__(self, "_pad_values", np.pad(full, 1))
        pad_mask = np.pad(mask, 1, constant_values=False)
        object.__setattr__(self, "_pad_mask", pad_mask)
        object.__setattr__(self, "_dilated",
                           ndimage.binary_dilation(pad_mask, structure=np.ones((3, 3), bool)))
        object.__setattr__(self, "_pad_err", self._error_bound())
        object.__setattr__(self, "_floor", 1e-12 * float(np.max(np.abs(full), initial=0.0)) + 1e-300)

    @classmethod
    def from_function(cls, domain: DomainGrid, func) -> "FieldOnGrid":
        """Sample ``func`` (vectorised over ball points of shape (N, 2)) on masked cells."""
        pts = domain.masked_centers()
        return cls(domain, np.asarray(func(pts), dtype=float).reshape(-1))

    @classmethod
    def radial(cls, domain: DomainGrid, center, profile) -> "FieldOnGrid":
        """u = profile(d(., center)); ``profile`` may return nan past its range (mapped to 0)."""
        c = center.ball_coords() if isinstance(center, ModelPoint) else np.asarray(center, float)
        d = ball_distance(domain.masked_centers(), c)
        vals = np.nan_to_num(np.asarray(profile(d), dtype=float), nan=0.0)
        return cls(domain, vals)

    @property
    def masked_values(self) -> np.ndarray:
        return self.values[self.domain.mask]

    def _fractional(self, points):
        res = self.domain.resolution
        i0, j0 = self.domain.origin
        fx = points[..., 0] * res - 0.5 - i0 + 1.0
        fy = points[..., 1] * res - 0.5 - j0 + 1.0
        return fx, fy

    def interpolate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bilinear values at ``points`` and whether all four stencil cells are masked."""
        points = np.asarray(points, dtype=float)
        fx, fy = self._fractional(points)
        nx, ny = self._pad_values.shape
        i = np.floor(fx).astype(np.int64)
        j = np.floor(fy).astype(np.int64)
        ok = (i >= 0) & (i < nx - 1) & (j >= 0) & (j < ny - 1)
        i = np.clip(i, 0, nx - 2)
        j = np.clip(j, 0, ny - 2)
        a = fx - i
        b = fy - j
        V, M = self._pad_values, self._pad_mask
        val = ((1 - a) * (1 - b) * V[i, j] + a * (1 - b) * V[i + 1, j]
               + (1 - a) * b * V[i, j + 1] + a * b * V[i + 1, j + 1])
        full = M[i, j] & M[i + 1, j] & M[i, j + 1] & M[i + 1, j + 1]
        return np.where(ok, val, 0.0), full & ok

    def contains_tol(self, points: np.ndarray) -> np.ndarray:
        """Mask lookup accepting any masked cell in the 3x3 block around each point."""
        i, j = self.domain.cell_index(np.asarray(points, dtype=float))
        i, j = i + 1, j + 1
        nx, ny = self._dilated.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(np.shape(i), dtype=bool)
        out[ok] = self._dilated[i[ok], j[ok]]
        return out

    def _error_bound(self) -> np.ndarray:
        """Per-cell bilinear error bound (|D2x u| + |D2y u|)/8, padded like the values.

        Each cell takes the largest bound in its 5x5 neighbourhood, which keeps
        the bound honest where a second derivative changes sign and lets cells
        without a complete masked stencil borrow from their neighbours.
        """
        V, M = self.values, self.domain.mask
        E = np.zeros(V.shape)
        ok_all = M.copy()
        for axis in (0, 1):
            d2 = np.zeros(V.shape)
            ok = np.zeros(V.shape, dtype=bool)
            if V.shape[axis] >= 3:
                lo, mid, hi = [slice(None)] * 2, [slice(None)] * 2, [slice(None)] * 2
                lo[axis], mid[axis], hi[axis] = slice(0, -2), slice(1, -1), slice(2, None)
                lo, mid, hi = tuple(lo), tuple(mid), tuple(hi)
                d2[mid] = np.abs(V[hi] - 2.0 * V[mid] + V[lo])
                ok[mid] = M[hi] & M[mid] & M[lo]
            E += np.where(ok, d2, 0.0)
            ok_all &= ok
        E = ndimage.maximum_filter(np.where(ok_all, E, 0.0), size=5) / 8.0
        return np.pad(E, 1)

    def local_tolerance(self, points: np.ndarray) -> np.ndarray:
        """3 x the largest error bound over the bilinear stencil of each point, floored."""
        points = np.asarray(points, dtype=float)
        E = self._pad_err
        fx, fy = self._fractional(points)
        nx, ny = E.shape
        i = np.clip(np.floor(fx).astype(np.int64), 0, nx - 2)
        j = np.clip(np.floor(fy).astype(np.int64), 0, ny - 2)
        e = np.maximum(np.maximum(E[i, j], E[i + 1, j]), np.maximum(E[i, j + 1], E[i + 1, j + 1]))
        return TOL_FACTOR * e + self._floor

    def interpolation_tolerance(self) -> float:
        """Largest local tolerance over the grid (3 x the bilinear error bound)."""
        return TOL_FACTOR * float(self._pad_err.max()) + self._floor

    def to_dict(self) -> dict:
        mv = self.masked_values
        return {"domain": self.domain.to_dict(), "cells": int(mv.size),
                "min": float(mv.min()) if mv.size else None,
                "max": float(mv.max()) if mv.size else None}


# ----------------------------------------------------------------------------
# foliations and planar hyperplane helpers


def foliation_plane(gamma: Geodesic, t: float) -> TotallyGeodesicHyperplane:
    """Ball-model hyperplane orthogonal to gamma at gamma(t).

    In the chart of gamma.x the geodesic is the vertical line over Y* and
    P(t) is the hemisphere of radius h0 e^t centred at (Y*, 0).
    """
    H = TotallyGeodesicHyperplane.hemisphere(gamma.ystar, gamma.h0 * math.exp(float(t)))
    return gamma.chart.hyperplane_to_ball(H)


def hyperplane_geodesic(P: TotallyGeodesicHyperplane) -> Geodesic:
    """The planar hyperplane P as a geodesic (ideal endpoints in the disk)."""
    B = P.to(Model.BALL)
    if B.n != 2:
        raise DomainError("hyperplane_geodesic is planar")
    if B.kind == "plane":
        u = np.array([-B.normal[1], B.normal[0]])
        return Geodesic(u, -u)
    c = B.center
    nc = float(np.linalg.norm(c))
    phi = math.atan2(c[1], c[0])
    half = math.acos(min(1.0, 1.0 / nc))
    a = np.array([math.cos(phi + half), math.sin(phi + half)])
    b = np.array([math.cos(phi - half), math.sin(phi - half)])
    return Geodesic(a, b)


def _line_plane(g: Geodesic) -> TotallyGeodesicHyperplane:
    """Planar hyperplane supported on the geodesic g."""
    a, b = g.x, g.y
    if abs(float(a @ b) + 1.0) < 1e-12:
        return TotallyGeodesicHyperplane.ball_plane(np.array([-a[1], a[0]]))
    return TotallyGeodesicHyperplane.ball_sphere((a + b) / (1.0 + float(a @ b)))


def transform_hyperplane(P: TotallyGeodesicHyperplane, iso: IsometryDescriptor) -> TotallyGeodesicHyperplane:
    """Image of a planar hyperplane under an isometry (through two interior points)."""
    g = hyperplane_geodesic(P)
    p = iso.apply_ball(g.point_ball(-1.0))
    q = iso.apply_ball(g.point_ball(1.0))
    return _line_plane(geodesic_through(ModelPoint(p, Model.BALL), ModelPoint(q, Model.BALL)))


def direction_geodesic(point, angle: float) -> Geodesic:
    """Geodesic through a ball point with Euclidean tangent direction ``angle``."""
    b = point.ball_coords() if isinstance(point, ModelPoint) else np.asarray(point, float)
    u = np.array([math.cos(angle), math.sin(angle)])
    x = mobius_to_origin(-b, u)
    y = mobius_to_origin(-b, -u)
    return Geodesic(x / np.linalg.norm(x), y / np.linalg.norm(y))


def _mismatch(fld: FieldOnGrid, vals, stencil, src_tol, q, trusted=None):
    """Largest |u(q) - u(c)| in units of the local tolerance, and the count of q off the mask.

    Also returns the raw RMS mismatch, which is smooth in the map and is
    what the searches minimise; the unit-scaled maximum is the acceptance
    test.

    Only interior sources c take part in the value comparison.  Images well
    outside the mask compare against u(q) = 0; images in the one-cell band
    around the boundary are skipped.
    """
    dom = fld.domain
    lim = 1.0 - dom.epsilon_boundary - 2.0 * dom.step
    representable = np.sum(q * q, axis=-1) < lim * lim
    trusted = representable if trusted is None else trusted & representable
    uq, full = fld.interpolate(q)
    inside = fld.contains_tol(q)
    keep = stencil & trusted
    cand = []
    both = keep & full
    diff = uq - vals
    if both.any():
        tol_q = fld.local_tolerance(q[both])
        cand.append(float(np.max(np.abs(diff[both]) / np.maximum(tol_q, src_tol[both]))))
    out = keep & ~inside
    if out.any():
        cand.append(float(np.max(np.abs(vals[out]) / src_tol[out])))
    off = trusted & ~inside
    worst = max(cand) if cand else math.inf
    sq = np.concatenate([diff[both] ** 2, vals[out] ** 2])
    rms = float(np.sqrt(np.mean(sq))) if sq.size else math.inf
    coverage = float(np.count_nonzero(trusted)) / max(q.shape[0], 1)
    if coverage < MIN_COVERAGE:
        worst = rms = math.inf
    return worst, int(np.count_nonzero(off)), diff, both, inside, coverage, rms


# ----------------------------------------------------------------------------
# reflection sweeps


@dataclass
class SweepResult:
    gamma: Geodesic
    t1: float
    t_end: float
    ts: np.ndarray
    min_w: np.ndarray
    containment_misses: np.ndarray
    asymmetry: np.ndarray
    tolerance: float
    t_bar: float | None
    t_bar_residual: float
    t_bar_misses: int
    t_bar_coverage: float
    violations: list
    first_violation: float | None

    @property
    def symmetric(self) -> bool:
        return self.t_bar is not None

    def symmetry_line(self) -> Geodesic | None:
        if self.t_bar is None:
            return None
        return Geodesic(*_perpendicular_endpoints(self.gamma, self.t_bar))

    def to_dict(self) -> dict:
        line = self.symmetry_line()
        return {
            "gamma": {"x": self.gamma.x.tolist(), "y": self.gamma.y.tolist()},
            "t1": self.t1,
            "t_end": self.t_end,
            "ts": self.ts.tolist(),
            "min_w": [None if not math.isfinite(v) else v for v in self.min_w.tolist()],
            "containment_misses": self.containment_misses.tolist(),
            "asymmetry": [None if not math.isfinite(v) else v for v in self.asymmetry.tolist()],
            "tolerance": self.tolerance,
            "t_bar": self.t_bar,
            "t_bar_residual": self.t_bar_residual,
            "t_bar_misses": self.t_bar_misses,
            "t_bar_coverage": self.t_bar_coverage,
            "symmetry_point": None if self.t_bar is None
            else self.gamma.point_ball(self.t_bar).tolist(),
            "symmetry_line": None if line is None else {"x": line.x.tolist(), "y": line.y.tolist()},
            "first_violation": self.first_violation,
            "violations": self.violations,
        }


def _boundary_cells(mask: np.ndarray) -> np.ndarray:
    pad = np.pad(mask, 1, constant_values=False)
    inner = pad[1:-1, 1:-1] & pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    return mask & ~inner


class _Sweeper:
    """Per-t evaluations for a fixed field and direction (optionally on a cell sample)."""

    def __init__(self, fld: FieldOnGrid, gamma: Geodesic, sample=None):
        if gamma.n != 2:
            raise DomainError("sweeps are planar")
        self.field = fld
        self.gamma = gamma
        pts = fld.domain.masked_centers()
        vals = fld.masked_values
        if sample is not None:
            pts, vals = pts[sample], vals[sample]
        self.pts = pts
        self.vals = vals
        self.tau = gamma.tau(pts) if pts.size else np.empty(0)
        self.stencil = fld.interpolate(pts)[1]
        self.src_tol = fld.local_tolerance(pts)

    def evaluate(self, t: float) -> dict:
        P = foliation_plane(self.gamma, t)
        q = P.reflect_coords(self.pts)
        asym, misses, diff, both, inside, coverage, rms = _mismatch(self.field, self.vals, self.stencil,
                                                     self.src_tol, q)
        cap = self.tau < t
        sel = cap & both
        w = diff[sel]
        scale = np.maximum(self.field.local_tolerance(q[sel]), self.src_tol[sel])
        return {
            "min_w": float(w.min()) if w.size else math.inf,
            "min_w_ratio": float(np.min(w / scale)) if w.size else math.inf,
            "cap_misses": int(np.count_nonzero(cap & ~inside & self._representable(q))),
            "misses": misses,
            "asymmetry": asym,
            "coverage": coverage,
            "rms": rms,
        }

    def _representable(self, q):
        dom = self.field.domain
        lim = 1.0 - dom.epsilon_boundary - 2.0 * dom.step
        return np.sum(q * q, axis=-1) < lim * lim

    def asymmetry(self, t: float) -> float:
        return self.evaluate(t)["asymmetry"]

    def rms(self, t: float) -> float:
        return self.evaluate(t)["rms"]


def _orthogonal_contacts(fld: FieldOnGrid, gamma: Geodesic):
    """Boundary cells with unit inward normals, foliation coordinates and plane normals."""
    dom = fld.domain
    mask = dom.mask
    bnd = _boundary_cells(mask)
    pts = dom.centers()[bnd]
    if pts.size == 0:
        return None
    smooth = ndimage.gaussian_filter(np.pad(mask.astype(float), 4), sigma=2.0)[4:-4, 4:-4]
    gx, gy = np.gradient(smooth)
    normals = np.stack([gx[bnd], gy[bnd]], axis=-1)
    nn = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.where(nn > 0, nn, 1.0)
    delta = 1e-6
    tx = (gamma.tau(pts + [delta, 0.0]) - gamma.tau(pts - [delta, 0.0])) / (2 * delta)
    ty = (gamma.tau(pts + [0.0, delta]) - gamma.tau(pts - [0.0, delta])) / (2 * delta)
    tgrad = np.stack([tx, ty], axis=-1)
    tgrad /= np.linalg.norm(tgrad, axis=1, keepdims=True)
    angle = np.degrees(np.arccos(np.clip(np.abs(np.sum(normals * tgrad, axis=1)), 0.0, 1.0)))
    ux, uy = np.gradient(fld.values, dom.step)
    grad_h = 0.5 * (1.0 - np.sum(pts * pts, axis=1)) * np.hypot(ux[bnd], uy[bnd])
    return {"pts": pts, "tau": gamma.tau(pts), "angle": angle, "grad": grad_h,
            "half_cell": 0.5 * dom.cell_size_hyperbolic(pts)}


def _finite(fn, big=1e100):
    """Wrap a scalar objective so Brent never sees inf (low coverage) or nan."""
    def wrapped(x):
        v = float(fn(x))
        return v if math.isfinite(v) else big
    return wrapped


def _refine_t_bar(sw: _Sweeper, ts: np.ndarray, rms: np.ndarray):
    """Minimise the RMS mismatch around its best grid value; returns (t, evaluation)."""
    finite = np.isfinite(rms)
    if not finite.any():
        return None
    k = int(np.argmin(np.where(finite, rms, np.inf)))
    lo = ts[max(k - 1, 0)]
    hi = ts[min(k + 1, ts.size - 1)]
    t = float(ts[k])
    if hi > lo:
        res = minimize_scalar(_finite(sw.rms), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-9})
        if res.fun <= rms[k]:
            t = float(res.x)
    return t, sw.evaluate(t)


def reflection_sweep(field: FieldOnGrid, gamma: Geodesic, t_grid=None, *,
                     n_steps: int = 61, _sample=None) -> SweepResult:
    """Sweep the foliation orthogonal to gamma over the field's domain.

    ``t_grid`` defaults to ``n_steps`` evenly spaced values strictly between
    the first contact t1 (smallest foliation coordinate of a masked cell) and
    the last one.  Mismatches are measured in units of the local tolerance
    (3 x the bilinear error bound from second differences of u).  w_t is
    flagged negative below -1 unit; a symmetry parameter is recorded when
    the largest mismatch |u o R_t - u| over the whole domain is at most one
    unit and every reflected cell lands in the mask.  ``tolerance`` in the
    result is the largest local tolerance, for reference.
    """
    if not field.domain.mask.any():
        raise DomainError("empty sweep range: the mask is empty")
    sw = _Sweeper(field, gamma, sample=_sample)
    t1 = float(sw.tau.min())
    t_end = float(sw.tau.max())
    if t_grid is None:
        ts = np.linspace(t1, t_end, n_steps + 2)[1:-1]
    else:
        ts = np.asarray(t_grid, dtype=float).reshape(-1)
        ts = np.sort(ts[(ts > t1) & (ts < t_end)])
    if ts.size == 0:
        raise DomainError("empty sweep range: no parameter lies past the first contact")
    tol = field.interpolation_tolerance()
    contacts = _orthogonal_contacts(field, gamma) if _sample is None else None
    min_w = np.empty(ts.size)
    misses = np.empty(ts.size, dtype=np.int64)
    asym = np.empty(ts.size)
    rms = np.empty(ts.size)
    log = []
    first = None
    for idx, t in enumerate(ts):
        ev = sw.evaluate(float(t))
        min_w[idx] = ev["min_w"]
        misses[idx] = ev["cap_misses"]
        asym[idx] = ev["asymmetry"]
        rms[idx] = ev["rms"]
        bad = False
        if ev["cap_misses"]:
            log.append({"kind": "containment", "t": float(t), "cells": ev["cap_misses"]})
            bad = True
        if ev["min_w_ratio"] < -1.0:
            log.append({"kind": "w-negative", "t": float(t), "min_w": ev["min_w"],
                        "tolerance_units": ev["min_w_ratio"]})
            bad = True
        if bad and first is None:
            first = float(t)
        if contacts is not None:
            near = np.abs(contacts["tau"] - t) <= contacts["half_cell"]
            if near.any():
                a = contacts["angle"][near]
                j = int(np.argmax(a))
                if a[j] >= 90.0 - ORTHOGONAL_TOL_DEG:
                    log.append({"kind": "orthogonal-contact", "t": float(t),
                                "point": contacts["pts"][near][j].tolist(),
                                "angle_deg": float(a[j]),
                                "normal_derivative": float(contacts["grad"][near][j])})
    t_bar, resid, bar_misses, coverage = None, math.inf, -1, 0.0
    found = _refine_t_bar(sw, ts, rms)
    if found is not None:
        cand, ev = found
        resid, bar_misses, coverage = ev["asymmetry"], ev["misses"], ev["coverage"]
        if resid <= 1.0 and bar_misses == 0:
            t_bar = cand
    return SweepResult(gamma, t1, t_end, ts, min_w, misses, asym, tol, t_bar, resid,
                       bar_misses, coverage, log, first)


# ----------------------------------------------------------------------------
# symmetry classification


@dataclass
class SymmetryClassification:
    kind: str
    center: np.ndarray | None = None
    geodesic: Geodesic | None = None
    ideal_point: IdealPoint | None = None
    tolerance: float = 0.0
    residuals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "classification": self.kind,
            "center": None if self.center is None else self.center.tolist(),
            "geodesic": None if self.geodesic is None
            else {"x": self.geodesic.x.tolist(), "y": self.geodesic.y.tolist()},
            "ideal_point": None if self.ideal_point is None
            else self.ideal_point.direction.tolist(),
            "tolerance": self.tolerance,
            "residuals": self.residuals,
        }


def _workers(max_workers):
    if max_workers is not None:
        return max(1, int(max_workers))
    return min(8, os.cpu_count() or 1)


def _sample_indices(count: int, size: int = _SEARCH_SAMPLE):
    if count <= size:
        return None
    rng = np.random.default_rng(0)
    return np.sort(rng.choice(count, size=size, replace=False))


def _radial(field, bary, n_directions, workers):
    angles = [math.pi * k / n_directions for k in range(n_directions)]
    gammas = [direction_geodesic(bary, a) for a in angles]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        sweeps = list(ex.map(lambda g: reflection_sweep(field, g), gammas))
    lines = [s.symmetry_line() for s in sweeps]
    report = {"directions": n_directions,
              "t_bar": [s.t_bar for s in sweeps],
              "residual": [s.t_bar_residual for s in sweeps]}
    if any(line is None for line in lines):
        report["symmetric_directions"] = sum(line is not None for line in lines)
        return None, report

    def cost(z):
        if float(z @ z) >= 1.0:
            return math.inf
        return sum(float(line.distance_to(z)) ** 2 for line in lines)

    res = minimize(cost, bary, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 2000})
    center = np.asarray(res.x)
    dists = [float(line.distance_to(center)) for line in lines]
    cell = float(field.domain.cell_size_hyperbolic(center))
    report.update({"symmetric_directions": n_directions, "center": center.tolist(),
                   "line_distances": dists, "cell_size": cell})
    return (center if max(dists) <= 2.0 * cell else None), report


def _horo_residual(field, x_dir, pts, vals, stencil, src_tol, bary, distances):
    """Max mismatch of u and mask misses under parabolic translations fixing x.

    Only images that stay two cells inside the grid box and the boundary
    margin are trusted, so clipped domains are not penalised for the clip.
    """
    dom = field.domain
    height = float(IdealChart(x_dir).from_ball(bary)[-1])
    lo_x, hi_x, lo_y, hi_y = dom.bbox
    pad = 2.0 * dom.step
    lim = 1.0 - dom.epsilon_boundary - pad
    worst, misses, trusted_total = 0.0, 0, 0
    for d in distances:
        for sign in (1.0, -1.0):
            v = np.array([sign * 2.0 * height * math.sinh(0.5 * d)])
            q = ParabolicTranslation(IdealPoint(x_dir), v).apply_ball(pts)
            trusted = ((q[:, 0] > lo_x + pad) & (q[:, 0] < hi_x - pad)
                       & (q[:, 1] > lo_y + pad) & (q[:, 1] < hi_y - pad)
                       & (np.sum(q * q, axis=1) < lim * lim))
            trusted_total += int(trusted.sum())
            m, off = _mismatch(field, vals, stencil, src_tol, q, trusted)[:2]
            if math.isfinite(m):
                worst = max(worst, m)
            misses += off
    return worst, misses, trusted_total


def _horospherical(field, bary, n_angles=72):
    pts_all = field.domain.masked_centers()
    vals_all = field.masked_values
    sten_all = field.interpolate(pts_all)[1]
    tol_all = field.local_tolerance(pts_all)
    idx = _sample_indices(pts_all.shape[0])
    pts, vals, sten, stol = ((pts_all, vals_all, sten_all, tol_all) if idx is None
                             else (pts_all[idx], vals_all[idx], sten_all[idx], tol_all[idx]))
    distances = (0.2, 0.5)

    def score(theta):
        x = np.array([math.cos(theta), math.sin(theta)])
        m, off, trusted = _horo_residual(field, x, pts, vals, sten, stol, bary, distances)
        return m + off / max(trusted, 1)

    thetas = 2.0 * math.pi * np.arange(n_angles) / n_angles
    scores = np.array([score(th) for th in thetas])
    k = int(np.argmin(scores))
    width = 2.0 * math.pi / n_angles
    res = minimize_scalar(_finite(score), bounds=(thetas[k] - width, thetas[k] + width),
                          method="bounded", options={"xatol": 1e-9})
    theta = float(res.x) if res.fun <= scores[k] else float(thetas[k])
    x = np.array([math.cos(theta), math.sin(theta)])
    worst, misses, trusted = _horo_residual(field, x, pts_all, vals_all, sten_all, tol_all,
                                            bary, distances)
    ok = worst <= 1.0 and misses == 0 and trusted >= 0.25 * len(distances) * 2 * pts_all.shape[0]
    report = {"angle": theta, "residual": worst, "misses": misses, "trusted": trusted}
    return (IdealPoint(x) if ok else None), report


def _axial(field, bary, workers, n_angles=36):
    """Search sweep directions through the barycentre for a reflection symmetry line.

    Directions are scored by their smallest RMS mismatch; among symmetric ones the
    line whose reflection keeps the most images on the grid wins, so that a
    tube reports its own axis rather than one of its perpendiculars.  The
    winning line is then swept along itself, since a symmetry axis meeting it
    orthogonally is one of its foliation planes.
    """
    idx = _sample_indices(field.domain.count)

    def best(phi):
        sw = _Sweeper(field, direction_geodesic(bary, phi), sample=idx)
        ts = np.linspace(sw.tau.min(), sw.tau.max(), 33)[1:-1]
        found = _refine_t_bar(sw, ts, np.array([sw.rms(float(t)) for t in ts]))
        if found is None:
            return math.inf, math.inf, 0.0
        ev = found[1]
        return ev["rms"], ev["asymmetry"], ev["coverage"]

    phis = math.pi * np.arange(n_angles) / n_angles
    with ThreadPoolExecutor(max_workers=workers) as ex:
        found = list(ex.map(best, phis))
    symmetric = [a <= 1.0 for _, a, _ in found]
    if any(symmetric):
        k = max((i for i in range(n_angles) if symmetric[i]), key=lambda i: found[i][2])
        phi = float(phis[k])
    else:
        k = int(np.argmin([r for r, _, _ in found]))
        width = math.pi / n_angles
        res = minimize_scalar(_finite(lambda p: best(p)[0]), bounds=(phis[k] - width, phis[k] + width),
                              method="bounded", options={"xatol": 1e-7})
        phi = float(res.x) if res.fun <= found[k][0] else float(phis[k])
    sweep = reflection_sweep(field, direction_geodesic(bary, phi))
    line = sweep.symmetry_line()
    report = {"angle": phi, "residual": sweep.t_bar_residual, "misses": sweep.t_bar_misses,
              "coverage": sweep.t_bar_coverage}
    if line is not None:
        # lines orthogonal to a symmetry line are its foliation planes: one sweep along it
        try:
            second = reflection_sweep(field, line)
        except DomainError:
            second = None
        if second is not None and second.symmetric and \
                second.t_bar_coverage > sweep.t_bar_coverage:
            line = second.symmetry_line()
            report.update({"residual": second.t_bar_residual, "misses": second.t_bar_misses,
                           "coverage": second.t_bar_coverage, "refined_along_line": True})
    return line, report


def symmetry_classify(field: FieldOnGrid, *, n_directions: int = 8,
                      max_workers: int | None = None) -> SymmetryClassification:
    """Classify a sampled field as radially, horospherically or axially symmetric, or none.

    The checks run in that order.  Radial: sweeps along ``n_directions``
    geodesics through the mask barycentre must each find a symmetry line,
    and the lines must pass within two hyperbolic cell sizes of a common
    point.  Horospherical: parabolic translations by hyperbolic distances
    0.2 and 0.5 (both signs) at the best ideal point must preserve mask and
    u on cells that stay inside the grid box.  Axial: some sweep direction
    through the barycentre admits a symmetry line, which is the axis (in
    the plane the rotations about a geodesic are the identity and the
    reflection across it).
    """
    dom = field.domain
    if not dom.mask.any():
        raise DomainError("cannot classify a field on an empty mask")
    workers = _workers(max_workers)
    tol = field.interpolation_tolerance()
    bary = dom.masked_centers().mean(axis=0)
    residuals = {}
    center, residuals["radial"] = _radial(field, bary, n_directions, workers)
    if center is not None:
        return SymmetryClassification("radially-symmetric", center=center, tolerance=tol,
                                      residuals=residuals)
    ideal, residuals["horospherical"] = _horospherical(field, bary)
    if ideal is not None:
        return SymmetryClassification("horospherically-symmetric", ideal_point=ideal,
                                      tolerance=tol, residuals=residuals)
    axis, residuals["axial"] = _axial(field, bary, workers)
    if axis is not None:
        return SymmetryClassification("axially-symmetric", geodesic=axis, tolerance=tol,
                                      residuals=residuals)
    return SymmetryClassification("none", tolerance=tol, residuals=residuals)


# ----------------------------------------------------------------------------
# caps as graphs over a hyperplane


@dataclass
class CapGraphReport:
    is_graph: bool
    orbits: int
    bad_orbits: int
    max_crossings: int
    height: float
    R: float | None
    height_bound_holds: bool | None
    beta: Geodesic

    def __bool__(self) -> bool:
        return self.is_graph

    def to_dict(self) -> dict:
        return {"graph": self.is_graph, "orbits": self.orbits, "bad_orbits": self.bad_orbits,
                "max_crossings": self.max_crossings, "height": self.height, "R": self.R,
                "height_bound_holds": self.height_bound_holds,
                "beta": {"x": self.beta.x.tolist(), "y": self.beta.y.tolist()}}


def _crossings(state: np.ndarray) -> int:
    """State changes along an orbit, ignoring undetermined samples (state 0)."""
    det = state[state != 0]
    if det.size == 0:
        return 0
    return int(np.count_nonzero(det[1:] != det[:-1]))


def _lookup(domain: DomainGrid, arr: np.ndarray, points: np.ndarray) -> np.ndarray:
    i, j = domain.cell_index(points)
    nx, ny = arr.shape
    ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
    out = np.zeros(np.shape(i), dtype=bool)
    out[ok] = arr[i[ok], j[ok]]
    return out


def _side_sign(P: TotallyGeodesicHyperplane, side) -> float:
    if isinstance(side, ModelPoint):
        s = float(P.side(side.ball_coords()))
        if s == 0.0:
            raise DomainError("the exterior reference point lies on the hyperplane")
        return math.copysign(1.0, s)
    side = float(side)
    if side not in (1.0, -1.0):
        raise DomainError("side must be +1, -1 or a reference point")
    return side


def cap_graph_check(domain: DomainGrid, P: TotallyGeodesicHyperplane, R: float | None = None,
                    *, side=1, beta: Geodesic | None = None) -> CapGraphReport:
    """Check that the part C of the domain beyond P is a graph over P.

    ext(P) is the side where ``P.side`` has the sign ``side`` (or the side
    of a reference point).  The Killing field is the hyperbolic translation
    along beta, a geodesic orthogonal to P (by default through the foot of
    the barycentre of C).  Its orbits are the curves at constant distance
    from beta; each is marched from P outwards and C is a graph iff no orbit
    crosses the boundary of C more than once.  Samples count as inside when
    their whole 3x3 cell block is masked and as outside when none of it is;
    samples in the band between keep the previous state, so pixelated
    boundaries grazed by an orbit do not register as crossings.  The height h(C) is the largest
    distance from a boundary cell of C to P.
    """
    B = P.to(Model.BALL)
    if B.n != 2:
        raise DomainError("cap_graph_check is planar")
    sgn = _side_sign(B, side)
    centers = domain.centers()
    ext_mask = domain.mask & (np.sign(B.side(centers)) == sgn)
    if not ext_mask.any():
        raise DomainError("no masked cell lies beyond the hyperplane")
    pts = centers[ext_mask]
    edge = 1.0 - domain.epsilon_boundary - 2.0 * domain.step
    if np.any(np.sum(pts * pts, axis=1) >= edge * edge):
        raise PreconditionError("the exterior component reaches the ideal boundary")
    line = hyperplane_geodesic(B)
    if beta is None:
        s_foot = float(line.foot_parameter(pts.mean(axis=0)))
        beta = Geodesic(*_perpendicular_endpoints(line, s_foot))
    if float(np.sign(B.side(beta.point_ball(50.0)))) != sgn:
        beta = beta.reversed()
    # P is a leaf of the foliation orthogonal to beta: all its points share one foot
    feet = beta.foot_parameter(line.point_ball(np.array([-1.0, 0.0, 1.0])))
    if np.ptp(feet) > 1e-8:
        raise DomainError("beta must be orthogonal to P")
    sigma_P = float(feet[1])
    # orbit coordinates: signed distance d from beta and translation parameter sigma
    Q = beta.chart.from_ball(pts)
    d = np.arcsinh((Q[:, 0] - beta.ystar[0]) / Q[:, 1])
    sig = beta.foot_parameter(pts)
    cell = float(np.min(domain.cell_size_hyperbolic(pts)))
    dd = 0.5 * cell
    d_lo, d_hi = float(d.min()) - cell, float(d.max()) + cell
    n_orbits = int(min(4000, max(2, math.ceil((d_hi - d_lo) / dd))))
    ds = np.linspace(d_lo, d_hi, n_orbits)
    sig_hi = float(sig.max()) + 2.0 * cell
    # hysteresis: inside needs the whole 3x3 block masked, outside needs none of it
    block = np.ones((3, 3), dtype=bool)
    solid = ndimage.binary_erosion(np.pad(domain.mask, 1), structure=block)[1:-1, 1:-1]
    near = ndimage.binary_dilation(np.pad(domain.mask, 1), structure=block)[1:-1, 1:-1]
    bad, worst = 0, 0
    for di in ds:
        step = dd / math.cosh(di)
        m = int(min(20000, max(2, math.ceil((sig_hi - sigma_P) / step))))
        ss = np.linspace(sigma_P, sig_hi, m)
        phi = math.atan(math.sinh(di))
        r = beta.h0 * np.exp(ss)
        chart_pts = np.stack([beta.ystar[0] + r * math.sin(phi), r * math.cos(phi)], axis=-1)
        z = beta.chart.to_ball(chart_pts)
        state = np.where(_lookup(domain, solid, z), 1, np.where(_lookup(domain, near, z), 0, -1))
        c = _crossings(state)
        worst = max(worst, c)
        bad += c > 1
    bnd = _boundary_cells(domain.mask) & ext_mask
    height = float(np.max(line.distance_to(centers[bnd]))) if bnd.any() else 0.0
    holds = None if R is None else bool(height <= 3.0 * float(R))
    return CapGraphReport(bad == 0, n_orbits, int(bad), int(worst), height,
                          None if R is None else float(R), holds, beta)
