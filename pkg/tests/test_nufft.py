import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sphere_gridder.data_structures import BaselineSet, PixelSet
from sphere_gridder.direct import direct_analysis, direct_synthesis
from sphere_gridder.errors import CapacityError, DomainError
from sphere_gridder.kernel import KernelSpec, es_kernel_eval
from sphere_gridder.nufft import (
    GRID_MONITOR,
    UniformGrid3,
    execute_analysis,
    execute_synthesis,
    fine_grid_shape,
    grid_nbytes,
    interpolate,
    make_plan,
    source_spacing,
    spread,
    transform_grid,
)
from sphere_gridder.utils import relative_error

par1 = {"n_vis": 300, "n_pix": 400, "scale": 150.0, "fov": 30.0, "weighted": False}
par2 = {"n_vis": 500, "n_pix": 300, "scale": 400.0, "fov": 60.0, "weighted": True}


def test_fine_grid_shape():
    assert fine_grid_shape(np.zeros(3), np.zeros(3), 1.25, 10) == (20, 20, 20)
    shape = fine_grid_shape([100.0, 100.0, 0.0], [1.0, 1.0, 0.0], 1.25, 10)
    assert shape[0] == shape[1] >= 1.25 * 100 / (2 * np.pi) + 20
    assert shape[2] == 20
    assert grid_nbytes((20, 20, 20)) == 16 * 8000


@pytest.mark.parametrize("extents", [(500.0, 0.5), (10.0, 1e-3), (1e4, 2.0)])
def test_source_spacing_balances_bands(extents):
    vis_extent, pix_extent = extents
    support = 15
    n = fine_grid_shape([vis_extent], [pix_extent], 1.25, support)[0]
    a = source_spacing(vis_extent, pix_extent, n, support)
    target_band = pix_extent * a / (4 * np.pi)
    source_band = vis_extent / (2 * n * a) + support / (2 * n)
    assert_allclose(target_band, source_band, rtol=1e-10)
    assert target_band <= 0.5 / np.sqrt(1.25)


def test_plan_geometry(make_instance):
    baselines, pixels = make_instance(0, 100, 100)
    plan = make_plan(baselines, pixels, 1e-6)
    assert plan.kernel == KernelSpec.resolve(1e-6)
    assert_allclose(plan.kernel.upsamp, 1.35)
    assert plan.n_sources == 100 and plan.n_targets == 100
    assert_allclose(plan.target_spacing * plan.source_spacing * np.asarray(plan.shape), 2 * np.pi)
    origin, spacing = plan.lattice("source")
    middle = origin + (np.asarray(plan.shape) // 2) * spacing
    assert_allclose(middle, plan.source_box.center)
    with pytest.raises(DomainError):
        plan.lattice("sky")


def test_plan_budget(make_instance):
    baselines, pixels = make_instance(0, 100, 100)
    plan = make_plan(baselines, pixels, 1e-6)
    make_plan(baselines, pixels, 1e-6, budget_bytes=plan.grid_bytes)
    with pytest.raises(CapacityError):
        make_plan(baselines, pixels, 1e-6, budget_bytes=plan.grid_bytes - 1)


def test_spread_interpolate_adjoint(make_instance):
    baselines, pixels = make_instance(1, 200, 50)
    plan = make_plan(baselines, pixels, 1e-5)
    rng = np.random.default_rng(2)
    values = rng.standard_normal(200) + 1j * rng.standard_normal(200)
    origin, spacing = plan.lattice("source")
    grid = UniformGrid3(rng.standard_normal(plan.shape) + 1j * rng.standard_normal(plan.shape), origin, spacing)
    lhs = np.vdot(values, interpolate(grid, plan.sources, plan, "source"))
    rhs = np.vdot(spread(plan.sources, values, plan, "source").values, grid.values)
    assert_allclose(lhs, rhs, rtol=1e-12)


def test_spread_rejects_outside_points(make_instance):
    baselines, pixels = make_instance(1, 50, 50)
    plan = make_plan(baselines, pixels, 1e-3)
    outside = plan.source_box.upper + 10.0
    with pytest.raises(DomainError):
        spread(outside, [1.0], plan, "source")


def test_grid_monitor(make_instance):
    baselines, pixels = make_instance(3, 80, 60)
    plan = make_plan(baselines, pixels, 1e-4)
    GRID_MONITOR.reset()
    execute_synthesis(plan, np.ones(80, dtype=complex))
    assert GRID_MONITOR.peak_bytes == plan.grid_bytes
    assert GRID_MONITOR.allocations == 1


def test_transform_grid_point_source(make_instance):
    baselines, pixels = make_instance(3, 80, 60)
    plan = make_plan(baselines, pixels, 1e-4)
    grid = spread(plan.sources, np.zeros(80), plan, "source")
    center = tuple(n // 2 for n in plan.shape)
    grid.values[center] = 1.0
    # a unit sample at the lattice center transforms to a constant
    transformed = transform_grid(grid, plan, "target")
    assert_allclose(transformed.values, 1.0, atol=1e-12)


@pytest.mark.parametrize("par", [(par1), (par2)])
@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
def test_synthesis_accuracy(par, eps, make_instance):
    baselines, pixels = make_instance(10, par["n_vis"], par["n_pix"], par["scale"], par["fov"], par["weighted"])
    rng = np.random.default_rng(11)
    visibilities = rng.standard_normal(len(baselines)) + 1j * rng.standard_normal(len(baselines))
    plan = make_plan(baselines, pixels, eps)
    estimate = execute_synthesis(plan, visibilities)
    assert relative_error(estimate, direct_synthesis(visibilities, baselines, pixels)) <= 3 * eps


@pytest.mark.parametrize("par", [(par1), (par2)])
@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
def test_analysis_accuracy(par, eps, make_instance):
    baselines, pixels = make_instance(20, par["n_vis"], par["n_pix"], par["scale"], par["fov"], par["weighted"])
    rng = np.random.default_rng(21)
    intensity = rng.standard_normal(len(pixels))
    plan = make_plan(baselines, pixels, eps)
    estimate = execute_analysis(plan, intensity)
    assert relative_error(estimate, direct_analysis(intensity, pixels, baselines)) <= 3 * eps


@pytest.mark.parametrize("eps", [1e-3, 1e-7])
def test_nufft_adjoint(eps, make_instance):
    baselines, pixels = make_instance(30, 250, 350, weighted=True)
    rng = np.random.default_rng(31)
    intensity = rng.standard_normal(len(pixels))
    visibilities = rng.standard_normal(len(baselines)) + 1j * rng.standard_normal(len(baselines))
    plan = make_plan(baselines, pixels, eps)
    lhs = np.real(np.vdot(visibilities, execute_analysis(plan, intensity)))
    rhs = np.dot(execute_synthesis(plan, visibilities), intensity)
    assert abs(lhs - rhs) <= 10 * eps * max(abs(lhs), abs(rhs))


def test_degenerate_geometry():
    # all pixels at the pole and a single baseline: every extent is zero
    baselines = BaselineSet(np.array([[10.0, -3.0, 2.0]]))
    pixels = PixelSet(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]))
    plan = make_plan(baselines, pixels, 1e-6)
    estimate = execute_analysis(plan, np.array([1.0, 2.0]))
    assert_allclose(estimate, direct_analysis(np.array([1.0, 2.0]), pixels, baselines), rtol=1e-5)


def test_zero_input(make_instance):
    baselines, pixels = make_instance(4, 40, 30)
    plan = make_plan(baselines, pixels, 1e-5)
    assert_array_equal(execute_synthesis(plan, np.zeros(40, dtype=complex)), np.zeros(30))
    assert_array_equal(execute_analysis(plan, np.zeros(30)), np.zeros(40, dtype=complex))


@pytest.mark.parametrize("fov", [30.0, 60.0])
def test_accuracy_tracks_eps(fov, make_instance):
    baselines, pixels = make_instance(40, 400, 300, scale=300.0, fov_deg=fov)
    rng = np.random.default_rng(41)
    intensity = rng.standard_normal(len(pixels))
    reference = direct_analysis(intensity, pixels, baselines)
    errors = []
    for eps in [1e-3, 1e-5, 1e-7, 1e-9]:
        estimate = execute_analysis(make_plan(baselines, pixels, eps), intensity)
        errors.append(relative_error(estimate, reference))
        assert errors[-1] <= 3 * eps
    assert np.all(np.diff(errors) < 0)


def test_spread_center_is_separable_stencil(make_instance):
    baselines, pixels = make_instance(5, 60, 40)
    plan = make_plan(baselines, pixels, 1e-4)
    support, beta = plan.kernel.support, plan.kernel.beta
    # odd support puts the middle node on the point itself
    assert support % 2 == 1
    grid = spread(plan.source_box.center, [1.0], plan, "source")
    weights = es_kernel_eval((np.arange(support) - support // 2) / plan.kernel.halfwidth_samples, beta)
    expected = np.zeros(plan.shape)
    lo = np.asarray(plan.shape) // 2 - support // 2
    hi = lo + support
    stencil = np.multiply.outer(np.multiply.outer(weights, weights), weights)
    expected[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = stencil
    assert_allclose(grid.values, expected, rtol=1e-10, atol=1e-14)


def test_spread_superposition(make_instance):
    baselines, pixels = make_instance(6, 60, 40)
    plan = make_plan(baselines, pixels, 1e-5)
    first, second = plan.sources[3], plan.sources[17]
    both = spread(np.stack([first, second]), [2.0, -1.0 + 0.5j], plan, "source").values
    separate = spread(first, [2.0], plan, "source").values + spread(second, [-1.0 + 0.5j], plan, "source").values
    assert_allclose(both, separate, rtol=1e-12, atol=1e-15)


def test_interpolate_delta_grid(make_instance):
    baselines, pixels = make_instance(7, 60, 40)
    plan = make_plan(baselines, pixels, 1e-5)
    origin, spacing = plan.lattice("target")
    point = plan.targets[11]
    position = (point - origin) / spacing
    node = np.round(position).astype(int)
    values = np.zeros(plan.shape, dtype=complex)
    values[tuple(node)] = 1.0
    value = interpolate(UniformGrid3(values, origin, spacing), point, plan, "target")
    expected = np.prod(es_kernel_eval((node - position) / plan.kernel.halfwidth_samples, plan.kernel.beta))
    assert_allclose(value, [expected], rtol=1e-12)


def test_transform_grid_round_trip(make_instance):
    baselines, pixels = make_instance(8, 80, 60)
    plan = make_plan(baselines, pixels, 1e-4)
    rng = np.random.default_rng(9)
    origin, spacing = plan.lattice("source")
    values = rng.standard_normal(plan.shape) + 1j * rng.standard_normal(plan.shape)
    grid = UniformGrid3(values.copy(), origin, spacing)
    back = transform_grid(transform_grid(grid, plan, "target"), plan, "source")
    assert relative_error(back.values / np.prod(plan.shape), values) <= 1e-13


def test_grid_shape_ignores_pixel_density(make_instance):
    baselines, pixels = make_instance(12, 100, 200)
    plan = make_plan(baselines, pixels, 1e-6)
    _, dense = make_instance(13, 1, 5000)
    lower, upper = pixels.points.min(axis=0), pixels.points.max(axis=0)
    inside = np.all((dense.points >= lower) & (dense.points <= upper), axis=1)
    assert np.count_nonzero(inside) > 1000
    densified = PixelSet(np.concatenate([pixels.points, dense.points[inside]]))
    dense_plan = make_plan(baselines, densified, 1e-6)
    assert dense_plan.shape == plan.shape
    assert dense_plan.grid_bytes == plan.grid_bytes
