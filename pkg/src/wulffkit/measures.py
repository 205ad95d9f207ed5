"""Anisotropic principal curvatures and curvature measures by direct quadrature.

For a smooth body the boundary is the image of the unit sphere under its
inverse Gauss map, so every boundary integral here is a sphere integral with
Jacobian ``det(s D^2 psi)`` restricted to the tangent plane.  The anisotropic
principal curvatures are the generalised eigenvalues of
``(D^2 phi, s D^2 psi)`` on that plane.

Mean curvatures are the unnormalised elementary symmetric polynomials of the
curvatures: ``e_j(kappa)``, with ``e_0 = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bodies import ConvexBody, HPolytope, SmoothBody
from .errors import NotPolygon, NotSmoothVariant
from .norms import NormSpec
from .projection import CurvatureSpectrum, _sorted_eig
from .regions import WHOLE, Region
from .tolerances import DEFAULTS, Tolerances
from .wulff import sphere_mesh, spherical_triangle_area, tangent_hessian


@dataclass(frozen=True)
class MeasureEstimate:
    order: int
    region: Region
    value: float
    stderr: float
    method: str  # direct | steiner_mc | sector_exact

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "region": self.region.to_json(),
            "value": self.value,
            "stderr": self.stderr,
            "method": self.method,
        }


def elem_sym(kappa, j: int) -> float:
    """e_j(kappa), the elementary symmetric polynomial of degree j."""
    k = np.asarray(kappa, dtype=float)
    n = k.shape[-1]
    if not 0 <= j <= n:
        raise ValueError(f"degree {j} outside 0..{n}")
    return elem_sym_all(k)[..., j]


def elem_sym_all(kappa) -> np.ndarray:
    """All e_0..e_n at once (last axis), by the product expansion of prod(1 + k_i t)."""
    k = np.asarray(kappa, dtype=float)
    n = k.shape[-1]
    e = np.zeros(k.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        e[..., 1:] = e[..., 1:] + k[..., i : i + 1] * e[..., :-1]
    return e


def _require_smooth(body) -> SmoothBody:
    if not isinstance(body, SmoothBody):
        raise NotSmoothVariant(f"{body.label()} has no smooth boundary parametrisation")
    return body


def principal_curvatures(body: SmoothBody, spec: NormSpec, eta) -> tuple[np.ndarray, np.ndarray]:
    """Sorted anisotropic curvatures and the area Jacobian at outer normals eta (batched)."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    Q, Hphi = tangent_hessian(spec, eta)
    _, Hpsi = tangent_hessian(body.psi, eta)
    R = body.scale * Hpsi
    jac = np.linalg.det(R)
    L = np.linalg.cholesky(R)
    Li = np.linalg.inv(L)
    S = Li @ Hphi @ np.swapaxes(Li, -1, -2)
    kappa = np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))
    return kappa, jac


def shape_operator_smooth(body, spec: NormSpec, x, tol: Tolerances = DEFAULTS) -> CurvatureSpectrum:
    """Eigen-decomposition of D nu = D^2 phi(eta) W on the tangent plane at a boundary point."""
    body = _require_smooth(body)
    x = np.asarray(x, dtype=float)
    if abs(float(body.gauge(x)) - 1.0) > tol.boundary:
        raise ValueError("x is not on the boundary")
    eta = body.outer_normal(x)
    Q, Hphi = tangent_hessian(spec, eta)
    _, Hpsi = tangent_hessian(body.psi, eta)
    R = body.scale * Hpsi
    # D nu restricted to the tangent plane, in the basis Q: Hphi R^{-1}
    S = Hphi @ np.linalg.inv(R)
    w, y = np.linalg.eig(S)
    w = np.real(w)
    vecs = Q @ np.real(y)
    kappa, vecs = _sorted_eig(w, vecs)
    return CurvatureSpectrum(
        chi=kappa.copy(),
        kappa=kappa,
        radius_used=0.0,
        eigvectors=vecs,
        kappa_infinite=np.zeros(len(kappa), dtype=bool),
    )


# ---------------------------------------------------------------------------
# boundary quadrature with region clipping

@dataclass(frozen=True)
class _Quadrature:
    points: np.ndarray  # boundary points at sphere nodes
    eta: np.ndarray
    kappa: np.ndarray  # (N, n)
    jac: np.ndarray  # (N,)
    elements: np.ndarray
    sphere_area: np.ndarray  # per element, on the unit sphere
    body: SmoothBody


def _quadrature(body: SmoothBody, spec: NormSpec, resolution: int) -> _Quadrature:
    sm = sphere_mesh(body.dim, resolution)
    eta = np.asarray(sm.nodes)
    kappa, jac = principal_curvatures(body, spec, eta)
    P = body.boundary_point(eta)
    if body.dim == 2:
        area = np.full(len(sm.elements), 2.0 * np.pi / resolution)
    else:
        E = sm.elements
        area = spherical_triangle_area(eta[E[:, 0]], eta[E[:, 1]], eta[E[:, 2]])
    return _Quadrature(P, eta, kappa, jac, sm.elements, area, body)


def _element_fractions(q: _Quadrature, region: Region, sub: int = 12) -> np.ndarray:
    """Fraction of each element selected by the region (subsampled on mixed elements)."""
    if region.empty:
        return np.zeros(len(q.elements))
    node = region.mask(q.points).astype(float)
    E = q.elements
    frac = node[E].mean(axis=1)
    mixed = np.flatnonzero((frac > 0) & (frac < 1))
    if len(mixed) == 0:
        return frac
    k = E.shape[1]
    if k == 2:
        t = (np.arange(sub) + 0.5) / sub
        bary = np.stack([1 - t, t], axis=1)
    else:
        pts = [((i + 1 / 3) / sub, (j + 1 / 3) / sub) for i in range(sub) for j in range(sub - i)]
        pts += [((i + 2 / 3) / sub, (j + 2 / 3) / sub) for i in range(sub) for j in range(sub - i - 1)]
        bary = np.array([(1 - a - b, a, b) for a, b in pts])
    # sample on the sphere, then map through the inverse Gauss map
    V = q.eta[E[mixed]]  # (M, k, d)
    S = np.einsum("sk,mkd->msd", bary, V)
    S /= np.linalg.norm(S, axis=-1, keepdims=True)
    X = q.body.boundary_point(S)
    frac[mixed] = region.mask(X.reshape(-1, X.shape[-1])).reshape(len(mixed), -1).mean(axis=1)
    return frac


def _integrate(q: _Quadrature, values: np.ndarray, region: Region) -> float:
    """Integral over region of a nodal density (per unit sphere area)."""
    frac = _element_fractions(q, region)
    elem = values[q.elements].mean(axis=1)
    return float(np.sum(elem * q.sphere_area * frac))


def _direct_value(body, spec, m, region, resolution):
    q = _quadrature(body, spec, resolution)
    n = body.dim - 1
    e = elem_sym_all(q.kappa)[:, n - m]
    dens = spec.value(q.eta) * e * q.jac
    return _integrate(q, dens, region) / (n - m + 1)


def curvature_measure_direct(body, spec: NormSpec, m: int, region: Region = WHOLE, resolution: int = 64) -> MeasureEstimate:
    """C_m(body, region) = 1/(n-m+1) * integral of phi(eta) e_{n-m}(kappa) over region."""
    body = _require_smooth(body)
    n = body.dim - 1
    if not 0 <= m <= n:
        raise ValueError(f"order {m} outside 0..{n}")
    v = _direct_value(body, spec, m, region, resolution)
    coarse = _direct_value(body, spec, m, region, max(8, resolution // 2))
    return MeasureEstimate(m, region, v, abs(v - coarse), "direct")


def anisotropic_perimeter(body: ConvexBody, spec: NormSpec, resolution: int = 64) -> float:
    """C_n: integral of phi(eta) over the boundary."""
    if isinstance(body, HPolytope):
        return float(sum(area * spec.value(body.A[i]) for i, area in body.facet_measures()))
    return curvature_measure_direct(body, spec, body.dim - 1, WHOLE, resolution).value


def boundary_integral(body, spec: NormSpec, density, region: Region = WHOLE, resolution: int = 64) -> float:
    """Integral over the boundary of density(x, eta, kappa) -> (N,) array."""
    body = _require_smooth(body)
    q = _quadrature(body, spec, resolution)
    return _integrate(q, density(q.points, q.eta, q.kappa) * q.jac, region)


# ---------------------------------------------------------------------------
# planar polygon oracle

def _vertex_sector_area(spec: NormSpec, n1, n2, nodes: int) -> float:
    """Area of {z : phi*(z) <= 1} between the rays through grad phi(n1) and grad phi(n2)."""
    a = spec.gradient(np.asarray(n1, float))
    b = spec.gradient(np.asarray(n2, float))
    t0 = np.arctan2(a[1], a[0])
    dt = (np.arctan2(b[1], b[0]) - t0) % (2 * np.pi)
    x, w = np.polynomial.legendre.leggauss(nodes)
    th = t0 + 0.5 * dt * (x + 1)
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    r = 1.0 / spec.dual_value(e)
    return float(0.25 * dt * np.dot(w, r**2))


def polygon_sector_exact(body, spec: NormSpec, face, nodes: int = 64) -> list[MeasureEstimate]:
    """Exact (C_0, C_1) contributions of one vertex or edge of a convex polygon."""
    if not isinstance(body, HPolytope) or body.dim != 2:
        raise NotPolygon("sector oracle needs a 2D polytope")
    fi = face.face if isinstance(face, Region) else int(face)
    f = body.faces[fi]
    region = face if isinstance(face, Region) else Region(face=fi, name=f"face{fi}")
    if f.dim == 1:
        a, b = body.vertices[list(f.vertices)]
        c1 = float(np.linalg.norm(b - a) * spec.value(body.A[f.constraints[0]]))
        return [MeasureEstimate(0, region, 0.0, 0.0, "sector_exact"), MeasureEstimate(1, region, c1, 0.0, "sector_exact")]
    i, j = f.constraints[:2]
    n1, n2 = body.A[i], body.A[j]
    # order the two normals counter-clockwise so the cone is the short arc
    if n1[0] * n2[1] - n1[1] * n2[0] < 0:
        n1, n2 = n2, n1
    v = _vertex_sector_area(spec, n1, n2, nodes)
    v2 = _vertex_sector_area(spec, n1, n2, 2 * nodes)
    return [MeasureEstimate(0, region, v2, abs(v2 - v), "sector_exact"), MeasureEstimate(1, region, 0.0, 0.0, "sector_exact")]


def polygon_measures_exact(body: HPolytope, spec: NormSpec) -> tuple[float, float]:
    """Whole-boundary (C_0, C_1) of a convex polygon from the sector oracle."""
    c0 = c1 = 0.0
    for fi in range(len(body.faces)):
        e0, e1 = polygon_sector_exact(body, spec, fi)
        c0 += e0.value
        c1 += e1.value
    return c0, c1

