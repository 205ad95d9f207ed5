from math import comb

import numpy as np
import pytest
from scipy.integrate import quad

from wulffkit.bodies import Ellipsoid, HPolytope, WulffBody
from wulffkit.errors import NotSmoothVariant
from wulffkit.identities import (
    complement_curvature_check,
    heintze_karcher_check,
    lambda_bound_check,
    minkowski_check,
    wulff_detector,
)
from wulffkit.norms import EllipsoidalNorm, EuclideanNorm, PerturbedNorm
from wulffkit.projection import complement_of, kappa_spectrum
from wulffkit.wulff import wulff_volume

E2, E3 = EuclideanNorm(2), EuclideanNorm(3)
A41 = EllipsoidalNorm(np.diag([4.0, 1.0]))
P2, P3 = PerturbedNorm(2, 0.1), PerturbedNorm(3, 0.1)

SMOOTH = [
    (Ellipsoid.from_axes([1.0, 2.0]), E2),
    (Ellipsoid.from_axes([1.0, 2.0]), P2),
    (WulffBody(np.array([0.3, -0.2]), 1.7, A41), A41),
    (Ellipsoid.from_axes([1.0, 2.0, 2.0]), E3),
    (Ellipsoid.from_axes([1.0, 2.0, 2.0], center=[0.5, 0.0, 0.0]), P3),
    (WulffBody(np.zeros(3), 1.2, P3), P3),
]


def ellipse_integrals(a, b):
    """Perimeter, int (x.eta) kappa ds and int 1/kappa ds for x = (a cos t, b sin t)."""
    speed = lambda t: np.hypot(a * np.sin(t), b * np.cos(t))
    kappa = lambda t: a * b / speed(t) ** 3
    support = lambda t: a * b / speed(t)
    per = quad(speed, 0, 2 * np.pi, epsabs=1e-13)[0]
    mink = quad(lambda t: support(t) * kappa(t) * speed(t), 0, 2 * np.pi, epsabs=1e-13)[0]
    hk = quad(lambda t: speed(t) / kappa(t), 0, 2 * np.pi, epsabs=1e-13)[0]
    return per, mink, hk


def test_minkowski_ball():
    rep = minkowski_check(Ellipsoid(np.zeros(3), np.eye(3)), E3, 1)
    assert rep.lhs == pytest.approx(8 * np.pi, rel=1e-4)
    assert rep.rhs == pytest.approx(8 * np.pi, rel=1e-4)
    assert rep.verdict == "equality"


@pytest.mark.parametrize("spec", [A41, P2, P3], ids=lambda s: s.label())
def test_minkowski_wulff_closed_form(spec):
    s = 1.4
    W = WulffBody(np.zeros(spec.dim), s, spec)
    n = spec.dim - 1
    V = wulff_volume(spec)
    for r in range(1, n + 1):
        rep = minkowski_check(W, spec, r)
        exact = (n - r + 1) * comb(n, r - 1) * s ** (1 - r) * (n + 1) * s**n * V
        assert rep.lhs == pytest.approx(exact, rel=1e-3)
        assert rep.rhs == pytest.approx(exact, rel=1e-3)
        assert rep.defect / rep.lhs <= 1e-3


def test_minkowski_ellipse_against_quad():
    per, mink, _ = ellipse_integrals(1.0, 2.0)
    rep = minkowski_check(Ellipsoid.from_axes([1.0, 2.0]), E2, 1)
    assert abs(rep.lhs - per) <= 3 * rep.combined_error
    assert abs(rep.rhs - mink) <= 3 * rep.combined_error
    assert rep.verdict == "equality"


@pytest.mark.parametrize("body,spec", SMOOTH, ids=lambda v: v.label())
def test_minkowski_catalog(body, spec):
    for r in range(1, body.dim):
        rep = minkowski_check(body, spec, r)
        assert rep.verdict == "equality"
        assert rep.defect <= 3 * rep.combined_error


def test_minkowski_rejects_polytope():
    with pytest.raises(NotSmoothVariant):
        minkowski_check(HPolytope.box([0, 0], [1, 1]), E2, 1)


def test_heintze_karcher_examples():
    for body, spec in [(Ellipsoid(np.zeros(3), np.eye(3)), E3), (WulffBody(np.zeros(3), 0.8, P3), P3),
                       (WulffBody(np.array([0.3, -0.2]), 1.7, A41), A41)]:
        assert heintze_karcher_check(body, spec).verdict == "equality"
    for axes, spec in (([1.0, 2.0], E2), ([1.0, 2.0, 2.0], E3)):
        rep = heintze_karcher_check(Ellipsoid.from_axes(axes), spec)
        assert rep.verdict == "holds"
        assert rep.slack > 3 * rep.combined_error


def test_heintze_karcher_ellipse_against_quad():
    _, _, hk = ellipse_integrals(1.0, 2.0)
    rep = heintze_karcher_check(Ellipsoid.from_axes([1.0, 2.0]), E2)
    assert rep.lhs == pytest.approx(2 * 2 * np.pi)
    assert abs(rep.rhs - hk) <= 3 * rep.combined_error


@pytest.mark.parametrize("body,spec", SMOOTH, ids=lambda v: v.label())
def test_heintze_karcher_never_violated(body, spec):
    rep = heintze_karcher_check(body, spec)
    assert rep.slack >= -3 * rep.combined_error
    assert (rep.verdict == "equality") == isinstance(body, WulffBody)


def test_lambda_bound_examples():
    rep = lambda_bound_check(WulffBody(np.zeros(2), 1.0, A41), A41, 1)
    assert rep.parameters["lambda"] == pytest.approx(0.5, rel=1e-4)
    assert rep.rhs == pytest.approx(1.0, rel=1e-4)
    assert rep.verdict == "equality"
    for r in (1, 2):
        assert lambda_bound_check(WulffBody(np.zeros(3), 1.6, P3), P3, r).verdict == "equality"
    rep = lambda_bound_check(Ellipsoid.from_axes([1.0, 2.0]), E2, 1)
    assert rep.verdict == "skipped"
    assert rep.parameters["constancy_defect"] > 3 * rep.combined_error


def test_complement_examples():
    ball = Ellipsoid(np.zeros(3), np.eye(3))
    a = np.array([0.0, 0.6, 0.8])
    np.testing.assert_allclose(kappa_spectrum(complement_of(ball), E3, a, -a, 0.05).kappa, -1.0, rtol=1e-4)
    W = WulffBody(np.zeros(2), 2.0, P2)
    eta = np.array([0.6, -0.8])
    ks = kappa_spectrum(complement_of(W), P2, W.boundary_point(eta), -P2.gradient(eta), 0.05)
    np.testing.assert_allclose(ks.kappa, -0.5, rtol=1e-4)
    ell = Ellipsoid.from_axes([2.0, 1.0])
    ks = kappa_spectrum(complement_of(ell), E2, [2.0, 0.0], [-1.0, 0.0], 0.005)
    np.testing.assert_allclose(ks.kappa, -2.0, rtol=1e-4)


@pytest.mark.parametrize("body,spec", SMOOTH[1:3] + SMOOTH[4:5], ids=lambda v: v.label())
def test_complement_check(body, spec):
    rep = complement_curvature_check(body, spec, sample_count=6, seed=3)
    assert rep.verdict == "equality"
    assert rep.lhs <= 1e-2


def test_detector_examples():
    v = wulff_detector(WulffBody(np.array([0.3, -0.2]), 1.7, A41), A41)
    assert v.is_wulff
    np.testing.assert_allclose(v.fitted_center, [0.3, -0.2], atol=1e-2)
    assert v.fitted_scale == pytest.approx(1.7, abs=1e-2)
    v = wulff_detector(Ellipsoid.from_axes([1.0, 2.0]), E2)
    assert not v.is_wulff
    assert v.ratio_deviation > 0.15
    v = wulff_detector(Ellipsoid(np.zeros(3), np.eye(3)), E3)
    assert v.is_wulff
    assert v.fitted_scale == pytest.approx(1.0, abs=1e-2)
    np.testing.assert_allclose(v.fitted_center, 0.0, atol=1e-2)


def test_detector_rejects_other_norm_wulff_shape():
    v = wulff_detector(WulffBody(np.zeros(2), 1.0, A41), P2)
    assert not v.is_wulff


def test_detector_translation_equivariance():
    t = np.array([0.7, -1.1])
    a = wulff_detector(WulffBody(np.zeros(2), 1.3, P2), P2)
    b = wulff_detector(WulffBody(t, 1.3, P2), P2)
    np.testing.assert_allclose(b.fitted_center - a.fitted_center, t, atol=1e-3)
    assert b.fitted_scale == pytest.approx(a.fitted_scale, abs=1e-3)
    assert b.ratio_deviation == pytest.approx(a.ratio_deviation, abs=1e-6)
    assert b.is_wulff == a.is_wulff


def test_report_json():
    rep = minkowski_check(Ellipsoid.from_axes([1.0, 2.0]), E2, 1)
    js = rep.to_json()
    assert js["verdict"] == "equality"
    assert js["parameters"]["r"] == 1


def test_detector_labelled_grid():
    norms = [E2, A41, P2]
    bodies = [WulffBody(np.array([0.2, 0.1]), 1.1, spec) for spec in norms] + [
        Ellipsoid.from_axes([1.0, 2.0]),
        HPolytope.box([-1, -1], [1, 1]),
        HPolytope(np.array([[1.0, 1], [-1, 0], [0, -1]]), np.array([2.0, 0, 0])),
    ]
    for body in bodies:
        for spec in norms:
            label = isinstance(body, WulffBody) and body.norm is spec
            # small caps of the triangle need more samples to resolve the ratios
            samples = 25 * 10**5 if body is bodies[-1] else 10**6
            v = wulff_detector(body, spec, seed=1, samples=samples)
            assert v.is_wulff == label, (body.label(), spec.label(), v)
