import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sphere_gridder.data_structures import ObservationConfig
from sphere_gridder.errors import DomainError
from sphere_gridder.geometry import (
    NORTH_POLE,
    bounding_box,
    load_antenna_layout,
    make_dcos_mesh,
    make_fibonacci_cap_mesh,
    simulate_baselines,
    truncate_layout,
)

par_pole = {"phase_center": [0.0, 0.0, 1.0]}
par_tilted = {"phase_center": [1.0, 0.0, 1.0]}
par_equator = {"phase_center": [0.0, 1.0, 0.0]}
par_south = {"phase_center": [0.0, 0.0, -1.0]}


def test_bounding_box():
    points = np.array([[0.0, 1.0, 2.0], [-1.0, 3.0, 2.0], [4.0, 2.0, 2.0]])
    box = bounding_box(points)
    assert_array_equal(box.lower, [-1.0, 1.0, 2.0])
    assert_array_equal(box.upper, [4.0, 3.0, 2.0])
    assert_array_equal(box.extents, [5.0, 2.0, 0.0])
    assert np.all(box.contains(points))


def test_bounding_box_rejects_bad_points():
    with pytest.raises(DomainError):
        bounding_box(np.zeros((0, 3)))
    with pytest.raises(DomainError):
        bounding_box(np.array([[0.0, np.nan, 1.0]]))


def test_simulate_single_pair():
    cfg = ObservationConfig(antennas=[[0.0, 0.0, 0.0], [100.0, 0.0, 0.0]], n_times=1)
    baselines = simulate_baselines(cfg)
    assert len(baselines) == 1
    # rotation preserves the baseline length
    assert_allclose(np.linalg.norm(baselines.points[0]), 2 * np.pi * 100.0 / cfg.wavelength_m, rtol=1e-12)


def test_simulate_pair_count():
    _, positions = load_antenna_layout("ska_low_251")
    cfg = ObservationConfig(antennas=positions, n_times=3)
    assert len(simulate_baselines(cfg)) == 94_125


def test_simulate_antisymmetric():
    rng = np.random.default_rng(3)
    antennas = rng.uniform(-500, 500, (2, 3))
    forward = simulate_baselines(ObservationConfig(antennas=antennas, n_times=4))
    backward = simulate_baselines(ObservationConfig(antennas=antennas[::-1], n_times=4))
    assert_allclose(forward.points, -backward.points, atol=1e-12)


def test_simulate_time_major():
    rng = np.random.default_rng(4)
    antennas = rng.uniform(-500, 500, (5, 3))
    cfg = ObservationConfig(antennas=antennas, n_times=3, span_hours=6.0)
    baselines = simulate_baselines(cfg)
    assert len(baselines) == cfg.n_pairs * cfg.n_times
    # each time block holds every pair once, so lengths repeat block to block
    lengths = np.linalg.norm(baselines.points, axis=1).reshape(cfg.n_times, cfg.n_pairs)
    assert_allclose(lengths[0], lengths[1], rtol=1e-12)
    assert_allclose(lengths[0], lengths[2], rtol=1e-12)


def test_hour_angles():
    cfg = ObservationConfig(antennas=np.eye(3), n_times=3, span_hours=8.0)
    assert_allclose(cfg.hour_angles_rad, [-np.pi / 3, 0.0, np.pi / 3])
    single = ObservationConfig(antennas=np.eye(3), n_times=1)
    assert_array_equal(single.hour_angles_rad, [0.0])


def test_hour_angles_follow_right_ascension():
    # a source at RA 60 deg (4 h) observed around LST 6 h sits 2 h past transit
    cfg = ObservationConfig(
        antennas=np.eye(3), n_times=3, span_hours=2.0, right_ascension_deg=60.0, mid_lst_hours=6.0
    )
    assert_allclose(cfg.hour_angles_rad, np.array([1.0, 2.0, 3.0]) * np.pi / 12)
    wrapped = ObservationConfig(antennas=np.eye(3), n_times=1, right_ascension_deg=330.0, mid_lst_hours=1.0)
    assert_allclose(wrapped.hour_angles_rad, [3.0 * np.pi / 12])
    transit = ObservationConfig(antennas=np.eye(3), right_ascension_deg=90.0, mid_lst_hours=6.0)
    assert_allclose(transit.hour_angles_rad, ObservationConfig(antennas=np.eye(3)).hour_angles_rad, atol=1e-15)
    antennas = np.eye(3) * 100
    later = simulate_baselines(ObservationConfig(antennas=antennas, right_ascension_deg=0.0, mid_lst_hours=6.0))
    assert not np.allclose(later.points, simulate_baselines(ObservationConfig(antennas=antennas)).points)


def test_observation_validation():
    with pytest.raises(DomainError):
        ObservationConfig(antennas=[[0.0, 0.0, 0.0]])
    with pytest.raises(DomainError):
        ObservationConfig(antennas=np.eye(3), frequency_hz=0.0)
    with pytest.raises(DomainError):
        ObservationConfig(antennas=np.eye(3), declination_deg=120.0)
    with pytest.raises(DomainError):
        ObservationConfig(antennas=np.eye(3), right_ascension_deg=360.0)
    with pytest.raises(DomainError):
        ObservationConfig(antennas=np.eye(3), mid_lst_hours=24.0)


@pytest.mark.parametrize("par", [(par_pole), (par_tilted), (par_equator), (par_south)])
def test_dcos_mesh(par):
    pixels = make_dcos_mesh(par["phase_center"], 30.0, 5)
    assert len(pixels) == 25
    assert_allclose(np.linalg.norm(pixels.points, axis=1), 1.0, atol=1e-12)
    center = np.asarray(par["phase_center"]) / np.linalg.norm(par["phase_center"])
    # l and m are both zero in the middle of an odd mesh
    assert_allclose(pixels.points[12], center, atol=1e-12)
    assert_array_equal(pixels.weights, np.ones(25))


def test_dcos_mesh_size():
    pixels = make_dcos_mesh(NORTH_POLE, 30.0, 80)
    assert len(pixels) == 6400
    half_width = np.sin(np.deg2rad(15.0))
    assert_allclose(np.abs(pixels.points[:, :2]).max(), half_width)


def test_dcos_mesh_rejects_wide_fov():
    with pytest.raises(DomainError):
        make_dcos_mesh(NORTH_POLE, 150.0, 10)
    with pytest.raises(DomainError):
        make_dcos_mesh(NORTH_POLE, 30.0, 0)


@pytest.mark.parametrize("par", [(par_pole), (par_tilted), (par_south)])
def test_fibonacci_cap(par):
    fov = 40.0
    pixels = make_fibonacci_cap_mesh(par["phase_center"], fov, 500)
    center = np.asarray(par["phase_center"]) / np.linalg.norm(par["phase_center"])
    assert len(pixels) == 500
    assert np.all(pixels.points @ center >= np.cos(np.deg2rad(fov / 2)) - 1e-12)
    cap_area = 2 * np.pi * (1 - np.cos(np.deg2rad(fov / 2)))
    assert_allclose(pixels.weights.sum(), cap_area)


def test_fibonacci_single_point():
    pixels = make_fibonacci_cap_mesh(NORTH_POLE, 10.0, 1)
    assert_array_equal(pixels.points, [[0.0, 0.0, 1.0]])
    assert_allclose(pixels.weights, [2 * np.pi * (1 - np.cos(np.deg2rad(5.0)))])


def test_builtin_layouts():
    names, positions = load_antenna_layout("ska_low_251")
    assert len(names) == 251
    assert positions.shape == (251, 3)
    names, positions = load_antenna_layout("lofar_hba_38")
    assert positions.shape == (38, 3)


def test_layout_from_csv(tmp_path):
    path = tmp_path / "layout.csv"
    path.write_text("name,east_m,north_m,up_m\nA,0,0,0\nB,10,0,0\nC,0,2000,0\n")
    names, positions = load_antenna_layout(path)
    assert names == ["A", "B", "C"]
    assert_array_equal(truncate_layout(positions, 100.0), [[0, 0, 0], [10, 0, 0]])


def test_layout_bad_header(tmp_path):
    path = tmp_path / "layout.csv"
    path.write_text("id,x,y,z\nA,0,0,0\n")
    with pytest.raises(DomainError):
        load_antenna_layout(path)
    with pytest.raises(DomainError):
        load_antenna_layout(tmp_path / "missing.csv")


@pytest.mark.parametrize("radius_m,count", [(100.0, 14), (300.0, 94), (1000.0, 251)])
def test_truncated_layout_sizes(radius_m, count):
    _, positions = load_antenna_layout("ska_low_251")
    assert len(truncate_layout(positions, radius_m)) == count
