import math

import numpy as np
import pytest

from hyperoep.asymptotic import busemann_ball
from hyperoep.domains import (
    DomainGrid,
    inradius,
    inradius_estimate,
    make_ball_grid,
    make_dumbbell_grid,
    make_horoball_grid,
    make_tube_grid,
    narrow_check,
    read_grid,
    transform_grid,
    union_grids,
    write_grid,
)
from hyperoep.errors import DomainError, PreconditionError, ResolutionError
from hyperoep.hypgeom import (
    Geodesic,
    HyperbolicTranslation,
    IdealPoint,
    ModelPoint,
    ParabolicTranslation,
    Rotation,
    ball_distance,
)
from hyperoep.spectral import lambda1_ball

ORIGIN = ModelPoint([0.0, 0.0])
LAM_UNIT = lambda1_ball(2, 1, 1).lam  # R_{lambda,2} = 1


def test_ball_grid_mask_and_margin():
    c = np.array([0.2, -0.1])
    g = make_ball_grid(ModelPoint(c), 0.7, 100)
    assert np.all(ball_distance(g.masked_centers(), c) < 0.7)
    assert g.epsilon_boundary == pytest.approx(0.1)
    with pytest.raises(ResolutionError):
        make_ball_grid(ORIGIN, 4.0, 100)


def test_unit_ball_inradius_at_400():
    assert 0.99 <= inradius(make_ball_grid(ORIGIN, 1.0, 400)) <= 1.0


def test_inradius_converges_at_first_order():
    errs = [1.0 - inradius(make_ball_grid(ORIGIN, 1.0, res)) for res in (100, 200, 400)]
    assert errs[0] > errs[2] > 0
    for res, err in zip((100, 200, 400), errs):
        assert err * res < 5.0


def test_empty_ball():
    g = make_ball_grid(ORIGIN, 0.0, 100)
    assert g.count == 0
    assert inradius(g, empty_ok=True) == 0.0
    with pytest.raises(DomainError):
        inradius(g)


def test_union_inradius_is_max_of_components():
    a = make_ball_grid(ModelPoint([-0.5, 0.0]), 0.4, 200)
    b = make_ball_grid(ModelPoint([0.4, 0.0]), 0.6, 200)
    u = union_grids(a, b)
    assert u.count == a.count + b.count
    assert inradius(u) == pytest.approx(max(inradius(a), inradius(b)), abs=1e-12)


def test_inradius_monotone_under_inclusion():
    small = make_ball_grid(ModelPoint([0.1, 0.1]), 0.5, 200)
    big = make_ball_grid(ModelPoint([0.1, 0.1]), 0.8, 200)
    assert inradius(small) <= inradius(union_grids(small, big))


def test_tube_inradius():
    est = inradius_estimate(make_tube_grid(Geodesic.through_origin([1.0, 0.0]), 0.3, 200))
    assert abs(est.value - 0.3) <= est.error_bound


def test_horoball_grid_properties():
    x = IdealPoint([0.0, 1.0])
    g = make_horoball_grid(x, 0.0, 200, 3.0)
    # every masked cell is in the horoball, every unmasked interior cell in the box is not
    assert np.all(busemann_ball(x, g.masked_centers()) < 0.0)
    cells = g.centers()[~g.mask]
    box = np.all(np.abs(cells) < math.tanh(1.5), axis=1) & (np.sum(cells**2, axis=1) < 1)
    assert np.all(busemann_ball(x, cells[box]) >= 0.0)
    # parabolic image of masked cells stays masked up to one cell
    T = ParabolicTranslation(x, np.array([0.3]))
    img = T.apply_ball(g.masked_centers())
    keep = np.all(np.abs(img) < math.tanh(1.5) - 2 * g.step, axis=1)
    deep = busemann_ball(x, img) < -2 * g.step * 10
    assert g.contains(img[keep & deep]).all()


def test_horoball_inradius_grows_with_extent():
    x = IdealPoint([0.0, 1.0])
    vals = [inradius(make_horoball_grid(x, 0.0, 200, e)) for e in (1, 2, 3, 4)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_dumbbell_is_connected_union():
    g = make_dumbbell_grid(ModelPoint([-0.35, 0.0]), 0.5, ModelPoint([0.35, 0.0]), 0.35, 0.15, 200)
    assert g.contains(np.array([[0.0, 0.0]]))[0]
    assert not g.contains(np.array([[0.0, 0.25]]))[0]


@pytest.mark.parametrize("radius,verdict", [(0.5, "consistent"), (1.5, "violating")])
def test_narrow_ball_verdicts(radius, verdict):
    v = narrow_check(make_ball_grid(ORIGIN, radius, 200), n=2, k=1, lam=LAM_UNIT)
    assert v.critical_radius == pytest.approx(1.0, abs=1e-8)
    assert v.verdict == verdict


def test_narrow_horoball_violating():
    g = make_horoball_grid(IdealPoint([1.0, 0.0]), 0.0, 200, 3.0)
    assert narrow_check(g, k=1, lam=LAM_UNIT).verdict == "violating"


def test_narrow_inconclusive_near_critical_radius():
    assert narrow_check(make_ball_grid(ORIGIN, 1.0, 200), lam=LAM_UNIT).verdict == "inconclusive"


def test_narrow_preconditions():
    g = make_ball_grid(ORIGIN, 0.5, 100)
    with pytest.raises(PreconditionError):
        narrow_check(g, k=1, lam=0.25)
    with pytest.raises(DomainError):
        narrow_check(g, n=3, lam=2.0)


@pytest.mark.parametrize("iso", [
    HyperbolicTranslation(Geodesic(np.array([0.6, 0.8]), np.array([-1.0, 0.0])), 0.5),
    ParabolicTranslation(IdealPoint([0.0, -1.0]), np.array([0.4])),
    Rotation(Geodesic(np.array([0.0, 1.0]), np.array([1.0, 0.0])), math.pi),
], ids=["hyperbolic", "parabolic", "flip"])
def test_narrow_verdict_isometry_invariant(iso):
    g = make_ball_grid(ModelPoint([0.1, 0.0]), 0.5, 200)
    moved = transform_grid(g, iso)
    a, b = narrow_check(g, lam=LAM_UNIT), narrow_check(moved, lam=LAM_UNIT)
    assert a.verdict == b.verdict
    assert abs(a.inradius - b.inradius) <= a.error_bound + b.error_bound


def test_grid_file_roundtrip(tmp_path):
    g = make_dumbbell_grid(ModelPoint([-0.3, 0.0]), 0.4, ModelPoint([0.3, 0.1]), 0.3, 0.1, 100)
    path = tmp_path / "d.grid"
    write_grid(path, g)
    h = read_grid(path)
    assert h.resolution == g.resolution and h.origin == g.origin
    assert np.array_equal(h.mask, g.mask)
    assert h.generator == g.generator
    assert path.read_text().splitlines()[0].startswith("{")


def test_bad_grid_file(tmp_path):
    p = tmp_path / "x.grid"
    p.write_text('{"format": "other"}\n0 4\n')
    with pytest.raises(DomainError):
        read_grid(p)


def test_grid_validates_margin():
    with pytest.raises(DomainError):
        DomainGrid(10, (-10, -10), np.ones((20, 20), bool))
