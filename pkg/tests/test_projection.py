import numpy as np
import pytest
from scipy.optimize import linprog, minimize

from wulffkit.bodies import Ellipsoid, HPolytope, WulffBody
from wulffkit.errors import InsideBody, NotNormalDirection
from wulffkit.norms import EllipsoidalNorm, EuclideanNorm, PerturbedNorm, random_unit_vectors
from wulffkit.projection import (
    chi_spectrum,
    complement_of,
    distance_project,
    kappa_spectrum,
    optimality_residual,
    project_batch,
    reach_estimate,
)
from wulffkit.wulff import sphere_mesh

E2, E3 = EuclideanNorm(2), EuclideanNorm(3)
A41 = EllipsoidalNorm(np.diag([4.0, 1.0]))
P2, P3 = PerturbedNorm(2, 0.1), PerturbedNorm(3, 0.1)


def dense_boundary(body, res):
    """Boundary samples: sphere nodes pushed through the Gauss map, or facet grids."""
    if isinstance(body, HPolytope) and body.dim == 2:
        V = body.vertices
        t = np.linspace(0, 1, res)[:, None]
        return np.concatenate([V[i] + t * (V[(i + 1) % len(V)] - V[i]) for i in range(len(V))])
    if isinstance(body, HPolytope):
        i, j = np.meshgrid(np.arange(res + 1), np.arange(res + 1))
        keep = i + j <= res
        bary = np.stack([i[keep], j[keep]], axis=1) / res
        pts = []
        for f in body.faces:
            if f.dim == 2:
                ring = body.vertices[body.facet_polygon(f)]
                for k in range(1, len(ring) - 1):
                    pts.append(ring[0] + bary @ np.stack([ring[k] - ring[0], ring[k + 1] - ring[0]]))
        return np.concatenate(pts)
    return body.boundary_point(sphere_mesh(body.dim, res).nodes)


def scan_and_polish(body, spec, x):
    """Coarse normal scan, then Nelder-Mead on the unnormalised normal."""
    V = sphere_mesh(body.dim, 64 if body.dim == 2 else 8).nodes
    v0 = V[np.argmin(spec.dual_value(x - body.boundary_point(V)))]

    def f(v):
        return float(spec.dual_value(x - body.boundary_point(v / np.linalg.norm(v))))

    res = minimize(f, v0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return res.fun


def test_ball_example():
    r = distance_project(Ellipsoid(np.zeros(3), np.eye(3)), E3, [0, 0, 2.0])
    assert r.distance == pytest.approx(1.0)
    np.testing.assert_allclose(r.foot, [0, 0, 1], atol=1e-10)
    np.testing.assert_allclose(r.cahn_hoffman, [0, 0, 1], atol=1e-10)
    assert r.is_unique


def test_anisotropic_polytope_example():
    K = HPolytope.box([-3.0, -1.0], [3.0, 0.0])
    r = distance_project(K, A41, [0.0, 1.0])
    c = np.linspace(-3, 3, 600001)
    brute = np.sqrt(c**2 / 4 + 1)
    assert r.distance == pytest.approx(brute.min(), abs=1e-10)
    np.testing.assert_allclose(r.foot, [c[brute.argmin()], 0.0], atol=1e-5)


@pytest.mark.parametrize("spec", [A41, P2, P3], ids=lambda s: s.label())
def test_wulff_body_gauge_radial(spec):
    a = np.arange(spec.dim) * 0.2 - 0.1
    K = WulffBody(a, 1.3, spec)
    rng = np.random.default_rng(0)
    for v in rng.standard_normal((5, spec.dim)):
        x = a + v / spec.dual_value(v) * (1.3 + 0.4)
        r = distance_project(K, spec, x)
        assert r.distance == pytest.approx(0.4, rel=1e-9)
        np.testing.assert_allclose(r.foot, a + 1.3 * (x - a) / spec.dual_value(x - a), atol=1e-8)
        B = dense_boundary(K, 8000 if spec.dim == 2 else 96)
        assert spec.dual_value(x - B).min() >= r.distance - 1e-12
        assert spec.dual_value(x - B).min() <= r.distance * (1 + 3e-3)


BODIES = [
    (Ellipsoid.from_axes([1.0, 2.0]), P2),
    (Ellipsoid.from_axes([1.0, 2.0]), A41),
    (WulffBody(np.zeros(2), 1.0, A41), P2),
    (HPolytope(np.array([[1.0, 1], [-1, 0], [0, -1]]), np.array([1.0, 0, 0])), P2),
    (HPolytope.box([-1, -1], [1, 1]), A41),
    (Ellipsoid.from_axes([1.0, 2.0, 2.0]), P3),
    (HPolytope.box([0, 0, 0], [1, 2, 1]), P3),
]


@pytest.mark.parametrize("body,spec", BODIES, ids=lambda v: v.label())
def test_projection_invariants_and_brute_force(body, spec):
    rng = np.random.default_rng(8)
    lo, hi = body.extents()
    X = lo - 1.0 + (hi - lo + 2.0) * rng.random((400, body.dim))
    X = X[~body.contains(X)]
    bp = project_batch(body, spec, X)
    np.testing.assert_allclose(spec.dual_value(X - bp.foot), bp.distance, rtol=1e-8)
    # a sampled boundary overestimates the distance by O(spacing^2 / distance)
    far = bp.distance >= 0.2
    X, bp = X[far][:20], project_batch(body, spec, X[far][:20])
    if isinstance(body, HPolytope):
        B = dense_boundary(body, 4000 if body.dim == 2 else 60)
        brute = np.array([spec.dual_value(x - B).min() for x in X])
        rel = 3e-3
    else:
        brute = np.array([scan_and_polish(body, spec, x) for x in X])
        rel = 1e-8
    assert np.all(bp.distance <= brute + 1e-12)
    assert np.all(bp.distance >= brute * (1 - rel))
    for x, xi in zip(X[:10], bp.foot[:10]):
        assert optimality_residual(body, spec, x, xi) <= 1e-6


def test_optimality_residual_examples():
    ball = Ellipsoid(np.zeros(3), np.eye(3))
    assert optimality_residual(ball, E3, [0, 0, 2.0], [0, 0, 1.0]) <= 1e-10
    assert optimality_residual(ball, E3, [0, 0, 2.0], [1.0, 0, 0]) > 0.1


def test_vertex_normal_cone_membership_by_lp():
    sq = HPolytope.box([0, 0], [1, 1])
    x = np.array([1.7, 1.3])
    r = distance_project(sq, P2, x)
    np.testing.assert_allclose(r.foot, [1.0, 1.0], atol=1e-12)
    g = P2.dual_gradient(x - r.foot)
    N = sq.A[sq.active(r.foot)]
    # feasibility LP: g = N^T lam with lam >= 0
    lp = linprog(np.zeros(len(N)), A_eq=N.T, b_eq=g, bounds=[(0, None)] * len(N), method="highs")
    assert lp.status == 0
    assert optimality_residual(sq, P2, x, r.foot) <= 1e-8


@pytest.mark.parametrize("body,spec", BODIES[:3] + BODIES[5:6], ids=lambda v: v.label())
def test_idempotence(body, spec):
    rng = np.random.default_rng(2)
    for eta in random_unit_vectors(5, body.dim, rng):
        x = body.support_point(eta) + 0.7 * spec.gradient(eta)
        r = distance_project(body, spec, x)
        for t in (0.1, 0.5, 1.0):
            y = r.foot + t * r.distance * r.cahn_hoffman
            np.testing.assert_allclose(distance_project(body, spec, y).foot, r.foot, atol=1e-7)


def test_inside_rejected():
    with pytest.raises(InsideBody):
        distance_project(Ellipsoid(np.zeros(2), np.eye(2)), E2, [0.1, 0.2])


def test_complement_examples():
    ball = Ellipsoid(np.zeros(3), np.eye(3))
    C = complement_of(ball)
    r = distance_project(C, E3, [0.0, 0.0, 0.4])
    assert r.distance == pytest.approx(0.6)
    np.testing.assert_allclose(r.foot, [0, 0, 1.0], atol=1e-8)
    assert distance_project(C, E3, [0.0, 0.0, 0.0]).multiplicity == "ambiguous"
    assert distance_project(complement_of(HPolytope.box([0, 0], [2, 1])), E2, [1.0, 0.2]).distance == pytest.approx(0.2)


def test_reach_examples():
    ball = Ellipsoid(np.zeros(3), np.eye(3))
    a = np.array([0.0, 0.6, 0.8])
    assert reach_estimate(complement_of(ball), E3, a, -a) == pytest.approx(1.0, rel=1e-5)
    s = 1.6
    W = WulffBody(np.zeros(2), s, P2)
    eta = np.array([0.6, 0.8])
    a = W.boundary_point(eta)
    u = -P2.gradient(eta)
    assert reach_estimate(complement_of(W), P2, a, u) == pytest.approx(s, rel=1e-5)
    box = HPolytope.box([0, 0], [2, 1])
    # brute: distance to the walls along the segment, largest s with delta = s
    assert reach_estimate(complement_of(box), E2, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5, rel=1e-5)
    with pytest.raises(NotNormalDirection):
        reach_estimate(complement_of(box), E2, [1.0, 0.0], [0.6, 0.8])


def test_chi_examples():
    ball = Ellipsoid(np.zeros(3), np.eye(3))
    cs = chi_spectrum(ball, E3, [0, 0, 1.5])
    np.testing.assert_allclose(cs.chi, 1 / 1.5, atol=1e-5)
    assert np.all(cs.chi <= 1 / cs.radius_used + 1e-6)
    sq = HPolytope.box([0, 0], [1, 1])
    np.testing.assert_allclose(chi_spectrum(sq, E2, [0.5, 1.3]).chi, 0.0, atol=1e-8)
    for s in (0.5, 1.7):
        W = WulffBody(np.zeros(3), s, P3)
        eta = np.array([0.48, 0.6, 0.64])
        x = W.boundary_point(eta) + 0.3 * P3.gradient(eta)
        np.testing.assert_allclose(chi_spectrum(W, P3, x).chi, 1 / (s + 0.3), rtol=1e-4)


def test_kappa_examples():
    ball = Ellipsoid(np.zeros(3), np.eye(3))
    a = np.array([0.0, 0.0, 1.0])
    for r in (0.1, 0.5, 2.0):
        np.testing.assert_allclose(kappa_spectrum(ball, E3, a, a, r).kappa, 1.0, rtol=1e-4)
    sq = HPolytope.box([0, 0], [1, 1])
    ks = kappa_spectrum(sq, E2, [1.0, 1.0], np.array([1.0, 1.0]) / np.sqrt(2), 0.2)
    assert ks.kappa_infinite.all()
    assert ks.kappa_report() == [1e300]
    W = WulffBody(np.zeros(2), 2.0, P2)
    eta = np.array([0.8, -0.6])
    np.testing.assert_allclose(kappa_spectrum(W, P2, W.boundary_point(eta), P2.gradient(eta), 0.3).kappa, 0.5, rtol=1e-4)


def test_kappa_nonnegative_and_reach_bound():
    E = Ellipsoid.from_axes([1.0, 2.0, 2.0])
    rng = np.random.default_rng(4)
    C = complement_of(E)
    for eta in random_unit_vectors(4, 3, rng):
        a = E.boundary_point(eta)
        ks = kappa_spectrum(E, P3, a, P3.gradient(eta), 0.2)
        assert np.all(ks.kappa >= -1e-6)
        u = -P3.gradient(eta)
        kc = kappa_spectrum(C, P3, a, u, 0.02)
        reach = reach_estimate(C, P3, a, u)
        assert np.all(kc.kappa >= -1 / reach - 1e-3)
