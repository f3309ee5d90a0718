import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exotic_spin_lab import presets
from exotic_spin_lab.errors import ConfigError, InvalidResolutionError
from exotic_spin_lab.geometry import (CCW, CW, RotationSpec, SourceSpec, VoxelCloud,
                                      build_voxel_cloud, kinematics, pose_at, rotation_angle)

NU = presets.ROTATION_FREQUENCY


def test_bgo_coarse_grid_is_exact_subdivision(bgo):
    cloud = build_voxel_cloud(bgo, 12.5e-3)
    assert len(cloud) == 8
    np.testing.assert_allclose(cloud.counts, 8.3875e24, rtol=1e-12)


def test_resolution_equal_to_edge_gives_single_voxel(bgo):
    cloud = build_voxel_cloud(bgo, bgo.edges[0])
    assert len(cloud) == 1
    assert cloud.counts[0] == pytest.approx(bgo.nucleons, rel=1e-12)
    np.testing.assert_allclose(cloud.positions[0], bgo.offset, atol=1e-15)


def test_rod_counts_follow_density(rod):
    cloud = build_voxel_cloud(rod, 7.6e-3)
    assert cloud.total == pytest.approx(rod.nucleons, rel=1e-9)
    # 30.5 and 487.6 mm are not multiples of 7.6 mm: clipped cells on both ends
    n_axis = [2 * math.ceil(e / 2 / 7.6e-3 - 1e-9) for e in rod.edges]
    assert len(cloud) == np.prod(n_axis)
    # interior voxels hold density * full voxel volume
    full = rod.nucleon_density * 7.6e-3 ** 3
    assert np.isclose(cloud.counts, full, rtol=1e-9).sum() > 0
    assert cloud.counts.max() == pytest.approx(full, rel=1e-9)


def test_voxel_centers_inside_box(rod):
    cloud = build_voxel_cloud(rod, 7.6e-3)
    rel = np.abs(cloud.positions - np.asarray(rod.offset))
    assert np.all(rel <= np.asarray(rod.edges) / 2 + 1e-15)


@pytest.mark.parametrize("res", [0.0, -1e-3, 26e-3])
def test_invalid_resolution(bgo, res):
    with pytest.raises(InvalidResolutionError):
        build_voxel_cloud(bgo, res)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SourceSpec((0.0, 1.0, 1.0), (0, 0, 0), 1.0, 1.0)
    with pytest.raises(ConfigError):
        SourceSpec((1.0, 1.0, 1.0), (0, 0, 0), 1.0, -1.0)
    with pytest.raises(ConfigError):
        RotationSpec((0, 0, 0), (0, 1.0, 0.1), 1.0)
    with pytest.raises(ConfigError):
        RotationSpec((0, 0, 0), (0, 1.0, 0), 0.0)


@pytest.mark.parametrize("direction,t,expected", [
    (CW, 0.0, 0.0),
    (CW, 1 / (4 * NU), math.pi / 2),
    (CCW, 1 / (4 * NU), -math.pi / 2),
])
def test_rotation_angle(direction, t, expected):
    rot = presets.default_rotation(direction)
    assert rotation_angle(rot, t) == pytest.approx(expected, abs=1e-12)


def test_point_on_axis_is_static(cw):
    cloud = VoxelCloud.point((0.0, 0.05, 0.0))
    _, vel = kinematics(cloud, cw, np.linspace(0, 1, 17))
    np.testing.assert_allclose(vel, 0.0, atol=1e-15)


def test_speed_at_lever_arm(cw):
    cloud = VoxelCloud.point((0.0, 0.0, -0.2438))
    pose = pose_at(cloud, cw, 0.123)
    assert np.linalg.norm(pose.velocities[0]) == pytest.approx(7.655, rel=1e-3)
    assert np.linalg.norm(pose.velocities[0]) == pytest.approx(2 * math.pi * NU * 0.2438, rel=1e-12)


def test_speed_proportional_to_axis_distance(bgo, cw):
    cloud = build_voxel_cloud(bgo, 5e-3)
    pose = pose_at(cloud, cw, 0.41)
    rel = pose.positions - np.asarray(cw.pivot)
    axial = rel @ np.asarray(cw.normal)
    dist = np.linalg.norm(rel - np.outer(axial, cw.normal), axis=1)
    np.testing.assert_allclose(np.linalg.norm(pose.velocities, axis=1),
                               2 * math.pi * NU * dist, rtol=1e-9)


def test_periodicity(bgo, cw):
    cloud = build_voxel_cloud(bgo, 5e-3)
    a = pose_at(cloud, cw, 0.3)
    b = pose_at(cloud, cw, 0.3 + 1 / NU)
    np.testing.assert_allclose(a.positions, b.positions, atol=1e-9)


def test_rigid_body_distances(bgo, cw):
    cloud = build_voxel_cloud(bgo, 12.5e-3)
    pos, _ = kinematics(cloud, cw, np.linspace(0, 1 / NU, 50))
    d = np.linalg.norm(pos[:, :, None] - pos[:, None, :], axis=-1)
    assert np.abs(d - d[0]).max() < 1e-12


def test_direction_reversal(bgo, cw, ccw):
    cloud = build_voxel_cloud(bgo, 12.5e-3)
    t = np.linspace(0, 0.3, 11)
    p_cw, v_cw = kinematics(cloud, cw, -t)
    p_ccw, v_ccw = kinematics(cloud, ccw, t)
    np.testing.assert_allclose(p_ccw, p_cw, atol=1e-14)
    np.testing.assert_allclose(v_ccw, -v_cw, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(res=st.floats(1e-3, 25e-3), a=st.floats(5e-3, 0.1), b=st.floats(25e-3, 0.1))
def test_nucleon_conservation_any_resolution(res, a, b):
    spec = SourceSpec((a, b, 25e-3), (0.01, 0.0, -0.2), 1.0, 1.234e25)
    if res > min(spec.edges):
        with pytest.raises(InvalidResolutionError):
            build_voxel_cloud(spec, res)
        return
    cloud = build_voxel_cloud(spec, res)
    assert cloud.total == pytest.approx(spec.nucleons, rel=1e-9)
    assert np.all(cloud.counts > 0)
