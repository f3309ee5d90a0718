import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exotic_spin_lab import presets
from exotic_spin_lab.constants import DEFAULT_CONSTANTS, PhysicalConstants
from exotic_spin_lab.errors import ConfigError, LeakageError, SingularDistanceError
from exotic_spin_lab.fields import (V45, V1213, FieldTimeSeries, field_timeseries,
                                    first_harmonic_vs_lambda, harmonic_amplitudes,
                                    integrate_field, kernel_v45, kernel_v1213, rod_field_spectrum,
                                    v45_prefactor, v1213_prefactor)
from exotic_spin_lab.geometry import VoxelCloud, build_voxel_cloud, pose_at

HBAR, C, M_N = DEFAULT_CONSTANTS.hbar, DEFAULT_CONSTANTS.c, DEFAULT_CONSTANTS.neutron_mass
MU = DEFAULT_CONSTANTS.gamma_n * HBAR / 2

vec = st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3).map(np.array)


def test_mu_consistent_with_gamma():
    c = PhysicalConstants.with_gamma_option("bias-pair")
    assert c.mu_xe == pytest.approx(c.gamma_n * c.hbar / 2, rel=1e-12)


@pytest.mark.parametrize("k", [kernel_v45, kernel_v1213])
def test_zero_velocity_gives_zero(k):
    np.testing.assert_array_equal(k([0, 0, 0.5], [0, 0, 0], 1.0), 0.0)


def test_v45_parallel_velocity_gives_zero():
    r = np.array([0.1, 0.2, 0.5])
    np.testing.assert_allclose(kernel_v45(r, 3.0 * r, 1.0), 0.0, atol=1e-40)


def test_v45_closed_form():
    r, v, lam = 0.5832, 7.655, 1.0
    B = kernel_v45([0, 0, r], [v, 0, 0], lam)
    expected = HBAR ** 2 / (8 * math.pi * M_N * C * MU) * v * (1 / (lam * r) + 1 / r ** 2) * math.exp(-r / lam)
    assert abs(B[1]) == pytest.approx(expected, rel=1e-12)
    assert B[0] == 0 and B[2] == 0
    # x cross z = -y, positive sign constant
    assert B[1] < 0


def test_v1213_closed_form():
    r, v, lam = 0.5832, 7.655, 1.0
    B = kernel_v1213([0, 0, r], [v, 0, 0], lam)
    expected = HBAR / (8 * math.pi * MU) * v / r * math.exp(-0.5832)
    assert np.linalg.norm(B) == pytest.approx(expected, rel=1e-12)
    assert B[0] < 0  # antiparallel to v


@pytest.mark.parametrize("k", [kernel_v45, kernel_v1213])
def test_kernel_errors(k):
    with pytest.raises(SingularDistanceError):
        k([0, 0, 0], [1, 0, 0], 1.0)
    with pytest.raises(ConfigError):
        k([0, 0, 1], [1, 0, 0], 0.0)


@settings(max_examples=100, deadline=None)
@given(r=vec, v=vec, lam=st.floats(0.01, 100.0))
def test_v45_orthogonal_to_v_and_r(r, v, lam):
    if np.linalg.norm(r) < 1e-3 or np.linalg.norm(v) < 1e-3:
        return
    B = kernel_v45(r, v, lam)
    d = np.linalg.norm(r)
    # largest magnitude the kernel can reach for these |v|, r
    bmax = v45_prefactor() * np.linalg.norm(v) * (1 / (lam * d) + 1 / d ** 2) * math.exp(-d / lam)
    assert abs(B @ v) <= 1e-12 * bmax * np.linalg.norm(v)
    assert abs(B @ r) <= 1e-12 * bmax * d


@settings(max_examples=100, deadline=None)
@given(r=vec, v=vec, lam=st.floats(0.01, 100.0))
def test_v1213_parallel_to_v(r, v, lam):
    if np.linalg.norm(r) < 1e-3:
        return
    B = kernel_v1213(r, v, lam)
    assert np.linalg.norm(np.cross(B, v)) <= 1e-12 * np.linalg.norm(B) * np.linalg.norm(v) + 1e-300


@settings(max_examples=60, deadline=None)
@given(r=vec, v=vec, lam=st.floats(0.01, 50.0))
def test_kernel_magnitudes_increase_with_lambda(r, v, lam):
    if np.linalg.norm(r) < 1e-3 or np.linalg.norm(np.cross(v, r)) < 1e-3:
        return
    for k in (kernel_v45, kernel_v1213):
        assert np.linalg.norm(k(r, v, lam * 1.5)) > np.linalg.norm(k(r, v, lam))


def test_prefactors_positive():
    assert v45_prefactor() > 0 and v1213_prefactor() > 0


def test_integrate_empty_and_single(cw):
    pose = pose_at(VoxelCloud.empty(), cw, 0.0)
    np.testing.assert_array_equal(integrate_field(VoxelCloud.empty(), pose, 1.0), 0.0)
    cloud = VoxelCloud.point((0.0, 0.0, -0.22), 3.5e20)
    pose = pose_at(cloud, cw, 0.05)
    B = integrate_field(cloud, pose, 1.0, 1.0, V1213)
    np.testing.assert_allclose(B, 3.5e20 * kernel_v1213(-pose.positions[0], pose.velocities[0], 1.0),
                               rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-1e3, 1e3), t=st.floats(0, 0.2))
def test_integrate_linear_in_f(bgo, cw, a, t):
    cloud = build_voxel_cloud(bgo, 12.5e-3)
    pose = pose_at(cloud, cw, t)
    for tag in (V45, V1213):
        base = integrate_field(cloud, pose, 1.0, 1.0, tag)
        np.testing.assert_allclose(integrate_field(cloud, pose, 1.0, a, tag), a * base, rtol=1e-15,
                                   atol=1e-300)


def test_refinements_agree(bgo, cw):
    vals = []
    for res in (5e-3, 2.5e-3, 1.25e-3):
        cloud = build_voxel_cloud(bgo, res)
        vals.append(np.linalg.norm(integrate_field(cloud, pose_at(cloud, cw, 0.07), 1.0)))
    assert abs(vals[1] / vals[0] - 1) < 5e-3
    assert abs(vals[2] / vals[1] - 1) < 5e-3


@pytest.mark.parametrize("tag", [V45, V1213])
def test_grid_convergence_order(bgo, cw, tag):
    m = []
    for res in (12.5e-3, 6.25e-3, 3.125e-3):
        cloud = build_voxel_cloud(bgo, res)
        m.append(np.linalg.norm(integrate_field(cloud, pose_at(cloud, cw, 0.037), 1.0, 1.0, tag)))
    order = math.log2(abs(m[1] - m[0]) / abs(m[2] - m[1]))
    assert order >= 1.99


def test_deterministic_mode_matches(bgo, cw):
    a = field_timeseries(bgo, cw, 1.0, 1.0, V45, 64, 1, resolution=5e-3)
    b = field_timeseries(bgo, cw, 1.0, 1.0, V45, 64, 1, resolution=5e-3, deterministic=True)
    np.testing.assert_allclose(a.samples, b.samples, rtol=1e-12, atol=1e-12 * np.abs(a.samples).max())


def test_deterministic_mode_is_order_independent(bgo, cw):
    cloud = build_voxel_cloud(bgo, 5e-3)
    perm = np.random.default_rng(0).permutation(len(cloud))
    shuffled = VoxelCloud(cloud.positions[perm], cloud.counts[perm], cloud.resolution)
    p1, p2 = pose_at(cloud, cw, 0.1), pose_at(shuffled, cw, 0.1)
    a = integrate_field(cloud, p1, 1.0, deterministic=True)
    b = integrate_field(shuffled, p2, 1.0, deterministic=True)
    assert np.array_equal(a, b)


def test_in_plane_symmetry(bgo):
    rot = presets.default_rotation(pivot=(6.0e-3, 0.0, 583.2e-3))
    s = field_timeseries(bgo, rot, 1.0, 1.0, V45, 128, resolution=5e-3)
    peak = np.abs(s.samples[:, 1]).max()
    assert np.abs(s.samples[:, [0, 2]]).max() < 1e-6 * peak
    s = field_timeseries(bgo, presets.default_rotation(), 1.0, 1.0, V1213, 128, resolution=5e-3)
    assert np.abs(s.samples[:, 1]).max() < 1e-6 * np.abs(s.samples).max()


@pytest.mark.parametrize("tag", [V45, V1213])
def test_direction_reversal_antisymmetry(bgo, cw, ccw, tag):
    a = field_timeseries(bgo, cw, 1.0, 1.0, tag, 128, resolution=5e-3)
    b = field_timeseries(bgo, ccw, 1.0, 1.0, tag, 128, resolution=5e-3)
    # sample k of CCW is at t_k; CW at -t_k is sample (-k mod n)
    mirrored = np.roll(a.samples[::-1], 1, axis=0)
    np.testing.assert_allclose(b.samples, -mirrored, atol=1e-9 * np.abs(a.samples).max())


def test_series_periodic(bgo, cw):
    s = field_timeseries(bgo, cw, 1.0, 1.0, V45, 64, 2, resolution=12.5e-3)
    np.testing.assert_allclose(s.samples[:64], s.samples[64:], atol=1e-9 * np.abs(s.samples).max())


def test_series_linear_in_f(bgo, cw):
    s = field_timeseries(bgo, cw, 1.0, 1.0, V45, 64, resolution=12.5e-3)
    s2 = field_timeseries(bgo, cw, 1.0, 2.79e-19, V45, 64, resolution=12.5e-3)
    np.testing.assert_allclose(s2.samples, 2.79e-19 * s.samples, rtol=1e-15)
    np.testing.assert_allclose(s.scaled(3.0).samples, 3.0 * s.samples)


@pytest.mark.parametrize("spp,n", [(63, 1), (64.5, 1), (64, 0)])
def test_invalid_sampling(bgo, cw, spp, n):
    with pytest.raises(ConfigError):
        field_timeseries(bgo, cw, 1.0, 1.0, V45, spp, n, resolution=12.5e-3)


def test_pure_cosine_spectrum():
    n, nu, A = 256, 4.997, 3.7e-15
    t = np.arange(n) / (n * nu)
    s = FieldTimeSeries(1 / (n * nu), nu, np.outer(A * np.cos(2 * np.pi * nu * t + 0.4), [0, 1, 0]))
    spec = harmonic_amplitudes(s, 10)
    assert spec.amplitude(1, 1) == pytest.approx(A, rel=1e-12)
    assert spec.phase(1, 1) == pytest.approx(0.4, abs=1e-12)
    assert spec.amplitudes[1:, 1].max() < 1e-9 * A


def test_non_integer_periods_rejected():
    s = FieldTimeSeries(1 / (64 * 4.997), 4.997, np.ones((100, 3)))
    with pytest.raises(LeakageError):
        harmonic_amplitudes(s, 3)


def test_parseval(bgo, cw):
    s = field_timeseries(bgo, cw, 1.0, 1.0, V45, 256, resolution=5e-3)
    spec = harmonic_amplitudes(s, 100)
    ms = np.mean((s.samples - spec.dc) ** 2, axis=0)
    assert np.all((spec.amplitudes ** 2).sum(axis=0) / 2 <= ms * (1 + 1e-6))


def test_spectrum_reconstructs_series(bgo, cw):
    s = field_timeseries(bgo, cw, 1.0, 1.0, V1213, 128, resolution=12.5e-3)
    spec = harmonic_amplitudes(s, 63)
    t = s.times
    rec = spec.dc + sum(spec.amplitudes[k] * np.cos(2 * np.pi * (k + 1) * s.frequency * t[:, None]
                                                      + spec.phases[k]) for k in range(63))
    assert np.abs(rec - s.samples).max() < 1e-3 * np.abs(s.samples).max()


@pytest.mark.parametrize("tag,comp,ratios", [(V45, 1, (2.9 / 5.1, 1.4 / 5.1)),
                                             (V1213, 0, (1.7 / 5.5, 0.5 / 5.5))])
def test_bgo_harmonic_ratios(bgo, cw, tag, comp, ratios):
    s = field_timeseries(bgo, cw, 1.0, 1.0, tag, resolution=presets.BGO_RESOLUTION)
    r = harmonic_amplitudes(s, 3).ratios(comp)
    assert r[1] == pytest.approx(ratios[0], rel=0.05)
    assert r[2] == pytest.approx(ratios[1], rel=0.05)


@pytest.mark.parametrize("tag,comp", [(V45, 1), (V1213, 0)])
def test_rod_even_harmonics(rod, cw, tag, comp):
    spec = rod_field_spectrum(rod, cw, 1.0, 1.0, tag)
    assert spec.dominant_order(comp) == 2
    assert spec.amplitudes[0::2, comp].max() < 1e-3 * spec.amplitude(2, comp)


def test_offset_rod_breaks_symmetry(rod, cw):
    shifted = dataclasses.replace(rod, offset=(0.0, 0.0, rod.edges[2] / 2))
    with pytest.raises(ConfigError):
        rod_field_spectrum(shifted, cw, 1.0)
    s = field_timeseries(shifted, cw, 1.0, 1.0, V45, resolution=presets.ROD_RESOLUTION)
    spec = harmonic_amplitudes(s, 4)
    assert spec.amplitude(1, 1) > 0.1 * spec.amplitude(2, 1)


def test_first_harmonic_vs_lambda_matches_series(bgo, cw):
    lams = np.array([0.1, 1.0, 10.0])
    fast = first_harmonic_vs_lambda(bgo, cw, lams, V45, resolution=5e-3)
    for lam, b in zip(lams, fast):
        s = field_timeseries(bgo, cw, lam, 1.0, V45, resolution=5e-3)
        assert b == pytest.approx(harmonic_amplitudes(s, 1).amplitude(1, 1), rel=1e-10)
    assert np.all(np.diff(fast) > 0)
