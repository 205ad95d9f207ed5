import numpy as np
import pytest

from wulffkit.bodies import Ellipsoid, HPolytope, WulffBody
from wulffkit.errors import SingularDesign
from wulffkit.norms import EllipsoidalNorm, EuclideanNorm, PerturbedNorm
from wulffkit.regions import EMPTY, Region, quadrant_partition
from wulffkit.steiner import fit_coefficients, steiner_fit, steiner_fit_regions, tube_volume_mc

E2, E3 = EuclideanNorm(2), EuclideanNorm(3)
A41 = EllipsoidalNorm(np.diag([4.0, 1.0]))


def within(value, exact, se, k=3.0):
    return abs(value - exact) <= k * se


def test_ball_tube_volume():
    v, se = tube_volume_mc(Ellipsoid(np.zeros(3), np.eye(3)), E3, 0.5, samples=200_000, seed=1)
    assert within(v, 4 * np.pi / 3 * (1.5**3 - 1), se)


def test_square_tube_volume():
    v, se = tube_volume_mc(HPolytope.box([0, 0], [1, 1]), E2, 0.1, samples=200_000, seed=2)
    assert within(v, 0.4 + np.pi * 0.01, se)


def test_empty_region_is_zero():
    v, se = tube_volume_mc(HPolytope.box([0, 0], [1, 1]), E2, 0.1, region=EMPTY, samples=10_000)
    assert v == 0.0
    assert se > 0


def test_face_region_on_square():
    sq = HPolytope.box([0, 0], [1, 1])
    edge = next(i for i, f in enumerate(sq.faces) if f.dim == 1)
    v, se = tube_volume_mc(sq, E2, 0.2, region=Region(face=edge), samples=200_000, seed=3)
    assert within(v, 0.2, se)


def test_wulff_tube_scaling():
    W = WulffBody(np.zeros(2), 1.0, A41)
    v, se = tube_volume_mc(W, A41, 0.3, samples=200_000, seed=4)
    assert within(v, 2 * np.pi * (1.3**2 - 1), se)


def test_fit_exact_data():
    rho = np.array([0.1, 0.2, 0.4])
    c = np.array([4.0, 12.0, 12.0])
    vol = c[0] * rho**3 + c[1] * rho**2 + c[2] * rho
    beta, cov, res = fit_coefficients(rho, vol, np.full(3, 1e-3), 3)
    np.testing.assert_allclose(beta, c, rtol=1e-9)
    assert res <= 1e-12


def test_singular_design():
    with pytest.raises(SingularDesign):
        fit_coefficients([0.1, 0.1, 0.1], np.ones(3), np.ones(3), 2)
    with pytest.raises(SingularDesign):
        steiner_fit(HPolytope.box([0, 0], [1, 1]), E2, rho_grid=(0.1,), samples=1000)


def test_square_fit_and_region_additivity():
    sq = HPolytope.box([-0.5, -0.5], [0.5, 0.5])
    regions = [Region()] + quadrant_partition(np.zeros(2))
    fits = steiner_fit_regions(sq, E2, regions, (0.05, 0.1, 0.2, 0.4), samples=200_000, seed=5)
    whole = fits[0]
    assert not whole.failed
    assert within(whole.coefficients[0], np.pi, whole.stderr[0])
    assert within(whole.coefficients[1], 4.0, whole.stderr[1])
    total = sum(f.coefficients for f in fits[1:])
    err = np.sqrt(sum(f.stderr**2 for f in fits[1:])) + whole.stderr
    assert np.all(np.abs(total - whole.coefficients) <= 3 * err)
    # the pieces are disjoint, so the sampled counts add up exactly
    np.testing.assert_allclose(sum(f.volumes for f in fits[1:]), whole.volumes, rtol=1e-12)


def test_determinism_across_workers():
    body = Ellipsoid.from_axes([1.0, 2.0])
    spec = PerturbedNorm(2, 0.1)
    a = steiner_fit(body, spec, samples=150_000, seed=9, workers=1)
    b = steiner_fit(body, spec, samples=150_000, seed=9, workers=3)
    assert a.coefficients.tobytes() == b.coefficients.tobytes()
    assert a.volumes.tobytes() == b.volumes.tobytes()
    c = steiner_fit(body, spec, samples=150_000, seed=10, workers=1)
    assert c.volumes.tobytes() != a.volumes.tobytes()


def test_fit_json():
    fit = steiner_fit(HPolytope.box([0, 0], [1, 1]), E2, samples=20_000, seed=0)
    js = fit.to_json()
    assert set(js) >= {"coefficients", "stderr", "residual", "rho_grid", "samples_per_rho", "seed"}
    assert len(js["coefficients"]) == 2
