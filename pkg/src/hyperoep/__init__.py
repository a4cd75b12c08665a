"""Hyperbolic spectral bounds, radial overdetermined problems and symmetry verifiers."""

__version__ = "0.1.0"

from .asymptotic import busemann, conical_radius_estimate, cone_contains, horoball_contains
from .domains import DomainGrid, inradius, narrow_check, read_grid, write_grid
from .errors import HyperOEPError
from .hypgeom import Geodesic, IdealPoint, Model, ModelPoint, hyperbolic_distance, reflect
from .movingplane import FieldOnGrid, cap_graph_check, reflection_sweep, symmetry_classify
from .oep import height_levelset_check, solve_radial_oep, torsion_profile, verify_p1
from .spectral import eigen_bounds, lambda1_ball, radius_for_lambda, shoot_first_zero

__all__ = [
    "__version__",
    "DomainGrid",
    "FieldOnGrid",
    "Geodesic",
    "HyperOEPError",
    "IdealPoint",
    "Model",
    "ModelPoint",
    "busemann",
    "cap_graph_check",
    "cone_contains",
    "conical_radius_estimate",
    "eigen_bounds",
    "height_levelset_check",
    "horoball_contains",
    "hyperbolic_distance",
    "inradius",
    "lambda1_ball",
    "narrow_check",
    "radius_for_lambda",
    "read_grid",
    "reflect",
    "reflection_sweep",
    "shoot_first_zero",
    "solve_radial_oep",
    "symmetry_classify",
    "torsion_profile",
    "verify_p1",
    "write_grid",
]
