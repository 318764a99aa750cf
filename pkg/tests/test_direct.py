import numpy as np
import pytest
from numpy.testing import assert_allclose

from sphere_gridder.direct import check_vector, direct_analysis, direct_synthesis
from sphere_gridder.errors import DomainError

par1 = {"n_vis": 7, "n_pix": 11, "weighted": False}
par2 = {"n_vis": 40, "n_pix": 25, "weighted": True}


@pytest.mark.parametrize("par", [(par1), (par2)])
def test_direct_against_loops(par, make_instance):
    baselines, pixels = make_instance(1, par["n_vis"], par["n_pix"], weighted=par["weighted"])
    rng = np.random.default_rng(2)
    intensity = rng.standard_normal(len(pixels))
    visibilities = rng.standard_normal(len(baselines)) + 1j * rng.standard_normal(len(baselines))

    expected_vis = np.zeros(len(baselines), dtype=complex)
    expected_image = np.zeros(len(pixels))
    for i, p in enumerate(baselines.points):
        for k, r in enumerate(pixels.points):
            expected_vis[i] += intensity[k] * pixels.weights[k] * np.exp(-1j * np.dot(r, p))
            expected_image[k] += pixels.weights[k] * np.real(visibilities[i] * np.exp(1j * np.dot(r, p)))

    assert_allclose(direct_analysis(intensity, pixels, baselines), expected_vis, rtol=1e-10, atol=1e-10)
    assert_allclose(direct_synthesis(visibilities, baselines, pixels), expected_image, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("par", [(par1), (par2)])
def test_direct_adjoint(par, make_instance):
    baselines, pixels = make_instance(5, par["n_vis"], par["n_pix"], weighted=par["weighted"])
    rng = np.random.default_rng(6)
    intensity = rng.standard_normal(len(pixels))
    visibilities = rng.standard_normal(len(baselines)) + 1j * rng.standard_normal(len(baselines))
    lhs = np.real(np.vdot(visibilities, direct_analysis(intensity, pixels, baselines)))
    rhs = np.dot(direct_synthesis(visibilities, baselines, pixels), intensity)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs))


def test_point_source_has_unit_modulus(make_instance):
    baselines, pixels = make_instance(7, 30, 20)
    intensity = np.zeros(len(pixels))
    intensity[3] = 1.0
    visibilities = direct_analysis(intensity, pixels, baselines)
    assert_allclose(np.abs(visibilities), 1.0, rtol=1e-12)


def test_zero_inputs(make_instance):
    baselines, pixels = make_instance(8, 10, 12)
    assert not np.any(direct_analysis(np.zeros(len(pixels)), pixels, baselines))
    assert not np.any(direct_synthesis(np.zeros(len(baselines), dtype=complex), baselines, pixels))


def test_check_vector():
    with pytest.raises(DomainError):
        check_vector(np.zeros(4), 5, "intensity", np.float64)
    with pytest.raises(DomainError):
        check_vector(np.zeros((2, 2)), 4, "intensity", np.float64)
    with pytest.raises(DomainError):
        check_vector(np.ones(3) * 1j, 3, "intensity", np.float64)
    with pytest.raises(DomainError):
        check_vector(np.array([1.0, np.nan]), 2, "visibilities", np.complex128)
    assert check_vector([1.0, 2.0], 2, "visibilities", np.complex128).dtype == np.complex128
