"""Anisotropic curvature measures, Wulff shapes and their integral identities."""
from .bodies import ConvexBody, Ellipsoid, HPolytope, WulffBody, body_from_json
from .errors import WulffkitError
from .identities import (
    IdentityReport,
    complement_curvature_check,
    heintze_karcher_check,
    lambda_bound_check,
    minkowski_check,
    wulff_detector,
)
from .measures import (
    MeasureEstimate,
    anisotropic_perimeter,
    curvature_measure_direct,
    elem_sym,
    polygon_sector_exact,
    shape_operator_smooth,
)
from .norms import EllipsoidalNorm, EuclideanNorm, NormSpec, PerturbedNorm, norm_from_json
from .projection import (
    CurvatureSpectrum,
    ProjectionResult,
    chi_spectrum,
    complement_of,
    distance_project,
    kappa_spectrum,
    optimality_residual,
    reach_estimate,
)
from .regions import Cut, Region
from .steiner import SteinerFit, steiner_fit, tube_volume_mc
from .tolerances import DEFAULTS, Tolerances
from .wulff import wulff_mesh, wulff_normal, wulff_point, wulff_volume

__all__ = [name for name in dir() if not name.startswith("_")]
