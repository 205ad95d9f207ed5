"""Numerical tolerances used throughout the package.

Every threshold the library relies on lives here so a caller can inspect or
override it (``dataclasses.replace(DEFAULTS, ...)``) and pass it explicitly
where an operation accepts a ``tol`` argument.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    zero_vector: float = 1e-14
    dual_kkt: float = 1e-10
    dual_max_iter: int = 60
    min_ellipticity: float = 1e-3
    ellipticity_samples: int = 2000
    on_wulff: float = 1e-6
    boundary: float = 1e-8
    projection_max_iter: int = 80
    projection_residual: float = 1e-12
    fd_step: float = 1e-4
    eigen_residual: float = 1e-4
    richardson: float = 1e-4
    kappa_infinite: float = 1e-6
    ambiguity_gap: float = 1e-7
    ambiguity_separation: float = 1e-3
    reach_predicate: float = 1e-7
    reach_rel: float = 1e-5
    reach_probe: float = 1e-4
    steiner_residual: float = 0.1
    roundoff_floor: float = 1e-10
    sigma_factor: float = 3.0
    constancy: float = 1e-3
    complement_pairing: float = 1e-2
    detector_ratio: float = 0.15
    detector_fit: float = 1e-2


DEFAULTS = Tolerances()
