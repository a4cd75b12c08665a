"""Masked grids of planar domains in the Poincare disk.

Every grid lives on the global lattice of square cells of side 1/resolution
with centres ((i + 0.5)/res, (j + 0.5)/res).  A grid stores the lattice index
of its first cell and a boolean mask indexed [i, j] (x index first), so grids
at equal resolution can be combined cell by cell.  Cells are classified by
their centres only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .asymptotic import Horoball, IdealPoint
from .errors import DomainError, PreconditionError, ResolutionError
from .hypgeom import (Geodesic, HyperbolicTranslation, IsometryDescriptor, Model, ModelPoint,
                      ball_distance, geodesic_through)
from .spectral import mckean_threshold, radius_for_lambda

__all__ = [
    "DomainGrid",
    "make_ball_grid",
    "make_horoball_grid",
    "make_tube_grid",
    "make_dumbbell_grid",
    "union_grids",
    "grid_from_predicate",
    "InradiusEstimate",
    "inradius",
    "inradius_estimate",
    "NarrowVerdict",
    "narrow_check",
    "write_grid",
    "read_grid",
    "transform_grid",
    "CHAMFER_EXCESS",
]

# 8-neighbour paths overestimate length by at most sqrt(4 - 2 sqrt 2) - 1
CHAMFER_EXCESS = math.sqrt(4.0 - 2.0 * math.sqrt(2.0)) - 1.0
GRID_FORMAT = "hyperoep-grid"


@dataclass(frozen=True, eq=False)
class DomainGrid:
    resolution: int
    origin: tuple[int, int]
    mask: np.ndarray
    generator: dict = field(default_factory=dict)
    epsilon_cells: float = 10.0

    def __post_init__(self):
        res = int(self.resolution)
        if res < 4:
            raise DomainError("resolution must be at least 4 cells per unit")
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise DomainError("mask must be two-dimensional")
        mask.setflags(write=False)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(self, "mask", mask)
        if mask.any():
            c = self.centers()[mask]
            if np.max(np.sum(c * c, axis=1)) >= (1.0 - self.epsilon_boundary) ** 2:
                raise DomainError("masked cells must stay inside the boundary margin")

    @property
    def step(self) -> float:
        return 1.0 / self.resolution

    @property
    def epsilon_boundary(self) -> float:
        return self.epsilon_cells / self.resolution

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        i0, j0 = self.origin
        nx, ny = self.shape
        h = self.step
        return (i0 * h, (i0 + nx) * h, j0 * h, (j0 + ny) * h)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        i0, j0 = self.origin
        nx, ny = self.shape
        return ((i0 + np.arange(nx) + 0.5) / self.resolution,
                (j0 + np.arange(ny) + 0.5) / self.resolution)

    def centers(self) -> np.ndarray:
        xs, ys = self.axes()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def masked_centers(self) -> np.ndarray:
        return self.centers()[self.mask]

    def cell_index(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=float)
        gi = np.floor(points[..., 0] * self.resolution).astype(np.int64)
        gj = np.floor(points[..., 1] * self.resolution).astype(np.int64)
        return gi - self.origin[0], gj - self.origin[1]

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Mask lookup of the cells containing the given points (False off-grid)."""
        i, j = self.cell_index(points)
        nx, ny = self.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(np.shape(i), dtype=bool)
        out[ok] = self.mask[i[ok], j[ok]]
        return out

    def cell_size_hyperbolic(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return 2.0 * self.step / (1.0 - np.sum(p * p, axis=-1))

    def representable_lattice(self) -> np.ndarray:
        """Centres of all lattice cells of the disk within the boundary margin."""
        res = self.resolution
        lim = 1.0 - self.epsilon_boundary
        idx = np.arange(-res, res)
        xs = (idx + 0.5) / res
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        keep = X * X + Y * Y < lim * lim
        return np.stack([X[keep], Y[keep]], axis=-1)

    def unmasked_representable_centers(self) -> np.ndarray:
        pts = self.representable_lattice()
        return pts[~self.contains(pts)]

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def with_mask(self, mask: np.ndarray, generator: dict | None = None) -> "DomainGrid":
        return DomainGrid(self.resolution, self.origin, mask,
                          self.generator if generator is None else generator, self.epsilon_cells)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "origin": list(self.origin),
            "shape": list(self.shape),
            "bbox": list(self.bbox),
            "cells": self.count,
            "generator": self.generator,
        }


def _lattice_box(res: int, lo: np.ndarray, hi: np.ndarray):
    i0 = int(math.floor(lo[0] * res)) - 1
    j0 = int(math.floor(lo[1] * res)) - 1
    i1 = int(math.ceil(hi[0] * res)) + 1
    j1 = int(math.ceil(hi[1] * res)) + 1
    i0, j0 = max(i0, -res), max(j0, -res)
    i1, j1 = min(i1, res), min(j1, res)
    return (i0, j0), (max(i1 - i0, 1), max(j1 - j0, 1))


def grid_from_predicate(predicate, resolution: int, lo=(-1.0, -1.0), hi=(1.0, 1.0),
                        generator: dict | None = None, epsilon_cells: float = 10.0) -> DomainGrid:
    """Grid of cells whose centres satisfy ``predicate`` (vectorised on (..., 2))."""
    res = int(resolution)
    origin, shape = _lattice_box(res, np.asarray(lo, float), np.asarray(hi, float))
    xs = (origin[0] + np.arange(shape[0]) + 0.5) / res
    ys = (origin[1] + np.arange(shape[1]) + 0.5) / res
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    lim = 1.0 - epsilon_cells / res
    keep = X * X + Y * Y < lim * lim
    mask = np.zeros(X.shape, dtype=bool)
    mask[keep] = np.asarray(predicate(pts[keep]), dtype=bool)
    return DomainGrid(res, origin, mask, generator or {}, epsilon_cells)


def _ball_euclidean(center: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
    """Euclidean centre and radius of a hyperbolic disk in the Poincare disk."""
    a = float(np.linalg.norm(center))
    u = center / a if a > 0 else np.array([1.0, 0.0])
    s = 2.0 * math.atanh(a)
    t1 = math.tanh((s + radius) / 2.0)
    t2 = math.tanh((s - radius) / 2.0)
    return 0.5 * (t1 + t2) * u, 0.5 * (t1 - t2)


def make_ball_grid(center: ModelPoint, radius: float, resolution: int) -> DomainGrid:
    """Cells within hyperbolic distance ``radius`` of ``center`` (n = 2)."""
    if center.n != 2:
        raise DomainError("grids are planar")
    radius = float(radius)
    if not radius >= 0:
        raise DomainError("radius must be nonnegative")
    c = center.ball_coords()
    res = int(resolution)
    eps = 10.0 / res
    gen = {"kind": "ball", "center": c.tolist(), "radius": radius}
    if radius == 0.0:
        return DomainGrid(res, _lattice_box(res, c, c)[0], np.zeros((1, 1), bool), gen)
    ec, er = _ball_euclidean(c, radius)
    if float(np.linalg.norm(ec)) + er >= 1.0 - eps:
        raise ResolutionError(
            f"ball of radius {radius} does not fit inside the {eps:g} boundary margin at "
            f"resolution {res}")
    return grid_from_predicate(lambda p: ball_distance(p, c) < radius, res,
                               ec - er, ec + er, gen)


def make_horoball_grid(x, level: float, resolution: int, extent: float) -> DomainGrid:
    """Horoball {B_x < level} clipped to the box |z_i| < tanh(extent/2)."""
    x = x if isinstance(x, IdealPoint) else IdealPoint(x)
    if x.n != 2:
        raise DomainError("grids are planar")
    res = int(resolution)
    half = min(math.tanh(float(extent) / 2.0), 1.0)
    D = Horoball(x, level)
    ec, er = D.euclidean_disk()
    lo = np.maximum(ec - er, -half)
    hi = np.minimum(ec + er, half)
    gen = {"kind": "horoball", "base": x.direction.tolist(), "level": float(level),
           "extent": float(extent)}

    def pred(p):
        return D.contains_ball(p) & (np.abs(p[:, 0]) < half) & (np.abs(p[:, 1]) < half)

    return grid_from_predicate(pred, res, lo, hi, gen)


def make_tube_grid(beta: Geodesic, radius: float, resolution: int) -> DomainGrid:
    """Cells within hyperbolic distance ``radius`` of the complete geodesic beta."""
    if beta.n != 2:
        raise DomainError("grids are planar")
    gen = {"kind": "tube", "x": beta.x.tolist(), "y": beta.y.tolist(), "radius": float(radius)}
    return grid_from_predicate(lambda p: beta.distance_to(p) < radius, resolution,
                               generator=gen)


def _union_masks(grids):
    res = grids[0].resolution
    if any(g.resolution != res for g in grids):
        raise DomainError("grids must share a resolution")
    i0 = min(g.origin[0] for g in grids)
    j0 = min(g.origin[1] for g in grids)
    i1 = max(g.origin[0] + g.shape[0] for g in grids)
    j1 = max(g.origin[1] + g.shape[1] for g in grids)
    mask = np.zeros((i1 - i0, j1 - j0), dtype=bool)
    for g in grids:
        a, b = g.origin[0] - i0, g.origin[1] - j0
        mask[a:a + g.shape[0], b:b + g.shape[1]] |= g.mask
    return res, (i0, j0), mask


def union_grids(*grids: DomainGrid, generator: dict | None = None) -> DomainGrid:
    res, origin, mask = _union_masks(grids)
    gen = generator or {"kind": "union", "parts": [g.generator for g in grids]}
    return DomainGrid(res, origin, mask, gen)


def make_dumbbell_grid(c1: ModelPoint, r1: float, c2: ModelPoint, r2: float,
                       neck_radius: float, resolution: int, neck_shift: float = 0.0) -> DomainGrid:
    """Two balls joined by a neck around the segment between the centres.

    ``neck_shift`` moves the neck sideways by that hyperbolic distance, which
    breaks the reflection symmetry across the line of centres.
    """
    b1 = make_ball_grid(c1, r1, resolution)
    b2 = make_ball_grid(c2, r2, resolution)
    p, q = c1.ball_coords(), c2.ball_coords()
    axis = geodesic_through(ModelPoint(p, Model.BALL), ModelPoint(q, Model.BALL))
    s1 = float(axis.foot_parameter(p))
    s2 = float(axis.foot_parameter(q))
    neck_axis = axis
    if neck_shift:
        # parallel-displace the neck: move the axis along its perpendicular at the midpoint
        normal = Geodesic(*_perpendicular_endpoints(axis, 0.5 * (s1 + s2)))
        shift = HyperbolicTranslation(normal, neck_shift)
        neck_axis = Geodesic(shift.apply_ball(axis.x), shift.apply_ball(axis.y))

    def neck(pts):
        sig = neck_axis.foot_parameter(pts)
        lo = float(neck_axis.foot_parameter(p))
        hi = float(neck_axis.foot_parameter(q))
        return (neck_axis.distance_to(pts) < neck_radius) & (sig > min(lo, hi)) & (sig < max(lo, hi))

    grid_neck = grid_from_predicate(neck, resolution)
    gen = {"kind": "dumbbell", "c1": p.tolist(), "r1": float(r1), "c2": q.tolist(),
           "r2": float(r2), "neck_radius": float(neck_radius), "neck_shift": float(neck_shift)}
    return union_grids(b1, b2, grid_neck, generator=gen)


def _perpendicular_endpoints(g: Geodesic, s: float):
    """Endpoints of the geodesic orthogonal to g at g(s): the foliation hyperplane P(s)."""
    Y = g.ystar[0]
    r = g.h0 * math.exp(s)
    a = np.array([Y + r, 0.0])
    b = np.array([Y - r, 0.0])
    ea, eb = g.chart.to_ball(a), g.chart.to_ball(b)
    return ea / np.linalg.norm(ea), eb / np.linalg.norm(eb)


# ----------------------------------------------------------------------------
# inradius


@dataclass
class InradiusEstimate:
    value: float
    error_bound: float
    argmax: tuple[float, float] | None
    cells: int

    def to_dict(self) -> dict:
        return {"inradius": self.value, "error_bound": self.error_bound,
                "argmax": None if self.argmax is None else list(self.argmax),
                "cells": self.cells}


_NEIGHBOURS = ((1, 0), (0, 1), (1, 1), (1, -1))


def inradius_estimate(domain: DomainGrid, empty_ok: bool = False) -> InradiusEstimate:
    """Max over masked cells of the graph distance to the inner boundary.

    The graph joins 8-neighbour masked cells with edge weights equal to the
    exact hyperbolic distance between their centres.  Sources are masked
    cells with an unmasked 8-neighbour (the mask is padded with False).
    The bound folds in the chamfer excess of 8-neighbour paths and two
    hyperbolic cell widths at the maximiser for centre sampling.
    """
    mask = domain.mask
    if not mask.any():
        if empty_ok:
            return InradiusEstimate(0.0, 0.0, None, 0)
        raise DomainError("inradius of an empty mask")
    pad = np.pad(mask, 1, constant_values=False)
    interior = pad[1:-1, 1:-1].copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                interior &= pad[1 + di:pad.shape[0] - 1 + di, 1 + dj:pad.shape[1] - 1 + dj]
    boundary = mask & ~interior
    nx, ny = mask.shape
    ids = -np.ones(mask.shape, dtype=np.int64)
    ids[mask] = np.arange(int(mask.sum()))
    centers = domain.centers()
    rows, cols, weights = [], [], []
    for di, dj in _NEIGHBOURS:
        sl_a = (slice(max(0, -di), nx - max(0, di)), slice(max(0, -dj), ny - max(0, dj)))
        sl_b = (slice(max(0, di), nx - max(0, -di)), slice(max(0, dj), ny - max(0, -dj)))
        both = mask[sl_a] & mask[sl_b]
        ia = ids[sl_a][both]
        ib = ids[sl_b][both]
        w = ball_distance(centers[sl_a][both], centers[sl_b][both])
        rows.append(ia)
        cols.append(ib)
        weights.append(w)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    weights = np.concatenate(weights)
    N = int(mask.sum())
    graph = sparse.coo_matrix((weights, (rows, cols)), shape=(N, N)).tocsr()
    sources = ids[boundary]
    dist = dijkstra(graph, directed=False, indices=sources, min_only=True)
    k = int(np.argmax(dist))
    value = float(dist[k])
    where = centers[mask][k]
    cell = float(domain.cell_size_hyperbolic(where))
    bound = CHAMFER_EXCESS * value + 2.0 * cell
    return InradiusEstimate(value, bound, (float(where[0]), float(where[1])), N)


def inradius(domain: DomainGrid, empty_ok: bool = False) -> float:
    return inradius_estimate(domain, empty_ok=empty_ok).value


@dataclass
class NarrowVerdict:
    verdict: str
    inradius: float
    error_bound: float
    critical_radius: float
    n: int
    k: float
    lam: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "inradius": self.inradius,
                "error_bound": self.error_bound, "critical_radius": self.critical_radius,
                "n": self.n, "k": self.k, "lambda": self.lam}


def narrow_check(domain: DomainGrid, n: int = 2, k: float = 1.0, lam: float = 1.0) -> NarrowVerdict:
    """Compare the inradius with the critical radius R_{lam,n}.

    consistent: inradius + bound < R;  violating: inradius - bound >= R.
    """
    if n != 2:
        raise DomainError("grids are planar (n = 2)")
    thr = mckean_threshold(n, k)
    if not lam > thr:
        raise PreconditionError(f"lambda must exceed (n-1)^2 k/4 = {thr}")
    R = radius_for_lambda(n, k, lam)
    est = inradius_estimate(domain, empty_ok=True)
    if est.value + est.error_bound < R:
        verdict = "consistent"
    elif est.value - est.error_bound >= R:
        verdict = "violating"
    else:
        verdict = "inconclusive"
    return NarrowVerdict(verdict, est.value, est.error_bound, R, n, float(k), float(lam))


def transform_grid(domain: DomainGrid, iso: IsometryDescriptor) -> DomainGrid:
    """Grid of the image iso(Omega): pull every lattice cell back through iso^{-1}."""
    inv = iso.inverse()
    gen = {"kind": "image", "source": domain.generator, "isometry": iso.kind}
    return grid_from_predicate(lambda p: domain.contains(inv.apply_ball(p)), domain.resolution,
                               generator=gen, epsilon_cells=domain.epsilon_cells)


# ----------------------------------------------------------------------------
# grid files: JSON header line, then row-major run lengths starting with the
# value of the first cell


def _rle(mask: np.ndarray) -> tuple[int, list[int]]:
    flat = mask.reshape(-1).astype(np.int8)
    if flat.size == 0:
        return 0, []
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    return int(flat[0]), np.diff(bounds).astype(int).tolist()


def write_grid(path, domain: DomainGrid) -> None:
    first, runs = _rle(domain.mask)
    header = {
        "format": GRID_FORMAT,
        "version": 1,
        "resolution": domain.resolution,
        "origin": list(domain.origin),
        "shape": list(domain.shape),
        "bbox": list(domain.bbox),
        "epsilon_cells": domain.epsilon_cells,
        "generator": domain.generator,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(f"{first} " + " ".join(map(str, runs)) + "\n")


def read_grid(path) -> DomainGrid:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if len(text) < 2:
        raise DomainError(f"{path}: truncated grid file")
    header = json.loads(text[0])
    if header.get("format") != GRID_FORMAT:
        raise DomainError(f"{path}: not a {GRID_FORMAT} file")
    fields = text[1].split()
    value = bool(int(fields[0]))
    nx, ny = header["shape"]
    flat = np.zeros(nx * ny, dtype=bool)
    pos = 0
    for run in map(int, fields[1:]):
        flat[pos:pos + run] = value
        pos += run
        value = not value
    if pos != nx * ny:
        raise DomainError(f"{path}: run lengths cover {pos} cells, expected {nx * ny}")
    return DomainGrid(header["resolution"], tuple(header["origin"]), flat.reshape(nx, ny),
                      header.get("generator", {}), header.get("epsilon_cells", 10.0))
