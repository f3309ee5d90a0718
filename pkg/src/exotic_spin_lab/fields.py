"""Pseudo-magnetic fields of rotating unpolarized sources.

Two velocity-dependent potentials are supported, tagged ``"V45"`` and
``"V1213"``.  Each is mapped to a field through ``-mu_Xe . B = V``; the
per-nucleon kernels below are evaluated with unit coupling and the
coupling ``f`` multiplies the integrated result.

``r_vec`` always points from the source point to the field point (the
polarized spin), and ``v_vec`` is the source velocity in the lab frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import math

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import ConfigError, LeakageError, SingularDistanceError
from .geometry import RotationSpec, SourceSpec, VoxelCloud, build_voxel_cloud, kinematics

V45 = "V45"
V1213 = "V1213"
KERNELS = (V45, V1213)

# sign mapping potential -> field for a spin along B; amplitudes are sign-blind
SIGN_V45 = +1.0
SIGN_V1213 = -1.0

# component the amplifier is sensitive to, per interaction, for the default geometry
READOUT_COMPONENT = {V45: 1, V1213: 0}

DEFAULT_SAMPLES_PER_PERIOD = 720

# vapor cell: 0.5 cm^3 cube
CELL_EDGE = 0.5e-6 ** (1.0 / 3.0)


def _check_kernel(tag):
    if tag not in KERNELS:
        raise ConfigError(f"unknown interaction tag {tag!r}; expected one of {KERNELS}")
    return tag


def v45_prefactor(constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """hbar^2 / (8 pi m c mu_Xe), SI units."""
    return constants.hbar ** 2 / (8.0 * math.pi * constants.neutron_mass * constants.c * constants.mu_xe)


def v1213_prefactor(constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    return constants.hbar / (8.0 * math.pi * constants.mu_xe)


def _distance(r_vec):
    r = np.linalg.norm(r_vec, axis=-1)
    if np.any(r <= 0.0):
        raise SingularDistanceError("source point coincides with the field point")
    return r


def kernel_v45(r_vec, v_vec, lam, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Field of one nucleon for the V45 potential (T, unit coupling).

    Broadcasts over leading dimensions of ``r_vec`` and ``v_vec``.
    """
    if not lam > 0:
        raise ConfigError("force range must be positive")
    r_vec = np.asarray(r_vec, dtype=float)
    v_vec = np.asarray(v_vec, dtype=float)
    r = _distance(r_vec)
    radial = (1.0 / (lam * r) + 1.0 / r ** 2) * np.exp(-r / lam)
    cross = np.cross(v_vec, r_vec / r[..., None])
    return SIGN_V45 * v45_prefactor(constants) * cross * radial[..., None]


def kernel_v1213(r_vec, v_vec, lam, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Field of one nucleon for the V1213 potential (T, unit coupling); parallel to ``v_vec``."""
    if not lam > 0:
        raise ConfigError("force range must be positive")
    r_vec = np.asarray(r_vec, dtype=float)
    v_vec = np.asarray(v_vec, dtype=float)
    r = _distance(r_vec)
    radial = np.exp(-r / lam) / r
    return SIGN_V1213 * v1213_prefactor(constants) * v_vec * radial[..., None]


def kernel(tag, r_vec, v_vec, lam, constants=DEFAULT_CONSTANTS):
    return (kernel_v45 if _check_kernel(tag) == V45 else kernel_v1213)(r_vec, v_vec, lam, constants)


def field_points(cell_average=False, cell_edge=CELL_EDGE):
    """Points at which the field is sampled: the cell center or its 8 corners."""
    if not cell_average:
        return np.zeros((1, 3))
    h = 0.5 * cell_edge
    return np.array([[sx * h, sy * h, sz * h] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])


def _weighted_sum(values, weights, deterministic):
    """Sum ``weights[n] * values[..., n, :]`` over the voxel axis."""
    if not deterministic:
        return np.einsum("...nk,n->...k", values, weights)
    terms = values * weights[:, None]
    flat = terms.reshape(-1, terms.shape[-2], 3)
    out = np.array([[math.fsum(flat[i, :, k]) for k in range(3)] for i in range(flat.shape[0])])
    return out.reshape(values.shape[:-2] + (3,))


def integrate_field(cloud: VoxelCloud, pose, lam, f=1.0, kernel_tag=V45,
                    constants=DEFAULT_CONSTANTS, points=None, deterministic=False):
    """Field at the cell for one pose: sum over voxels of count x kernel.

    ``points`` defaults to the cell center; with several points the
    result is their mean.  ``deterministic`` uses exactly rounded
    summation so the result is independent of voxel order.
    """
    if len(cloud) == 0:
        return np.zeros(3)
    pts = field_points() if points is None else np.asarray(points, dtype=float).reshape(-1, 3)
    r_vec = pts[:, None, :] - pose.positions[None, :, :]
    v_vec = np.broadcast_to(pose.velocities, r_vec.shape)
    per_voxel = kernel(kernel_tag, r_vec, v_vec, lam, constants)
    B = _weighted_sum(per_voxel, cloud.counts, deterministic)
    return f * B.mean(axis=0)


def geometry_hash(*parts) -> str:
    text = "|".join(repr(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FieldTimeSeries:
    """Uniformly sampled 3-vector field over an integer number of periods.

    ``samples[k]`` is the field at ``t0 + k * dt``.
    """

    dt: float
    frequency: float
    samples: np.ndarray
    kernel: str = V45
    lam: float = 1.0
    f: float = 1.0
    t0: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None] * np.array([0.0, 1.0, 0.0])
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.shape[0])

    @property
    def n_periods(self) -> float:
        return self.samples.shape[0] * self.dt * self.frequency

    @property
    def samples_per_period(self) -> float:
        return 1.0 / (self.dt * self.frequency)

    def scaled(self, a):
        return FieldTimeSeries(self.dt, self.frequency, a * self.samples, self.kernel,
                               self.lam, a * self.f, self.t0, dict(self.meta))

    def with_samples(self, samples, **meta):
        return FieldTimeSeries(self.dt, self.frequency, samples, self.kernel, self.lam,
                               self.f, self.t0, {**self.meta, **meta})


@dataclass(frozen=True)
class HarmonicSpectrum:
    """``B(t) = dc + sum_N amplitudes[N-1] * cos(2 pi N nu t + phases[N-1])`` per component."""

    frequency: float
    orders: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    dc: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def amplitude(self, order, component):
        return float(self.amplitudes[order - 1, component])

    def phase(self, order, component):
        return float(self.phases[order - 1, component])

    def ratios(self, component, orders=(1, 2, 3)):
        ref = self.amplitude(orders[0], component)
        return tuple(self.amplitude(n, component) / ref for n in orders)

    def dominant_order(self, component):
        return int(self.orders[np.argmax(self.amplitudes[:, component])])

    def complex_amplitudes(self):
        """Phasors ``A exp(i phase)``, shape ``(N_max, 3)``."""
        return self.amplitudes * np.exp(1j * self.phases)


def _sample_times(frequency, samples_per_period, n_periods):
    if int(samples_per_period) != samples_per_period or samples_per_period < 64:
        raise ConfigError(f"samples_per_period must be an integer >= 64, got {samples_per_period!r}")
    if int(n_periods) != n_periods or n_periods < 1:
        raise ConfigError(f"n_periods must be a positive integer, got {n_periods!r}")
    n = int(samples_per_period) * int(n_periods)
    dt = 1.0 / (frequency * int(samples_per_period))
    return dt, dt * np.arange(n)


def _field_over_times(cloud, rotation, times, lam, kernel_tag, constants, points, deterministic,
                      chunk=64):
    out = np.empty((times.shape[0], 3))
    for start in range(0, times.shape[0], chunk):
        tt = times[start:start + chunk]
        pos, vel = kinematics(cloud, rotation, tt)
        r_vec = points[None, :, None, :] - pos[:, None, :, :]
        v_vec = np.broadcast_to(vel[:, None, :, :], r_vec.shape)
        per_voxel = kernel(kernel_tag, r_vec, v_vec, lam, constants)
        out[start:start + chunk] = _weighted_sum(per_voxel, cloud.counts, deterministic).mean(axis=1)
    return out


def field_timeseries(spec: SourceSpec, rotation: RotationSpec, lam, f=1.0, kernel_tag=V45,
                     samples_per_period=DEFAULT_SAMPLES_PER_PERIOD, n_periods=1,
                     constants=DEFAULT_CONSTANTS, resolution=None, cloud=None,
                     cell_average=False, deterministic=False) -> FieldTimeSeries:
    """Field at the cell sampled uniformly over ``n_periods`` rotations.

    Either ``resolution`` (voxel pitch, m) or a prebuilt ``cloud`` must
    be given.
    """
    _check_kernel(kernel_tag)
    if not lam > 0:
        raise ConfigError("force range must be positive")
    if cloud is None:
        if resolution is None:
            resolution = min(spec.edges) / 10.0
        cloud = build_voxel_cloud(spec, resolution)
    dt, times = _sample_times(rotation.frequency, samples_per_period, n_periods)
    B = _field_over_times(cloud, rotation, times, lam, kernel_tag, constants,
                          field_points(cell_average), deterministic)
    meta = {
        "geometry_hash": geometry_hash(spec, rotation, cloud.resolution, cell_average),
        "source": getattr(spec, "name", "source"),
        "direction": rotation.direction,
    }
    return FieldTimeSeries(dt, rotation.frequency, f * B, kernel_tag, float(lam), float(f), 0.0, meta)


def harmonic_amplitudes(series: FieldTimeSeries, n_max=10) -> HarmonicSpectrum:
    """Amplitude and phase of each harmonic N*nu by projection onto exact DFT bins."""
    n = series.samples.shape[0]
    periods = series.n_periods
    k = int(round(periods))
    if k < 1 or abs(periods - k) > 1e-9 * max(1.0, periods):
        raise LeakageError(f"series spans {periods!r} periods; need an integer")
    if n_max * k >= n / 2:
        raise ConfigError(f"n_max={n_max} exceeds the Nyquist limit for {n} samples")
    X = np.fft.rfft(series.samples, axis=0)
    # phase referenced to t = 0 rather than the first sample
    orders = np.arange(1, n_max + 1)
    bins = X[orders * k] * np.exp(-2j * np.pi * orders[:, None] * series.frequency * series.t0)
    amps = 2.0 * np.abs(bins) / n
    phases = np.angle(bins)
    dc = X[0].real / n
    return HarmonicSpectrum(series.frequency, orders, amps, phases, dc, dict(series.meta))


def rod_field_spectrum(rod: SourceSpec, rotation: RotationSpec, lam, f=1.0, kernel_tag=V45,
                       resolution=7.6e-3, n_max=6, constants=DEFAULT_CONSTANTS,
                       samples_per_period=DEFAULT_SAMPLES_PER_PERIOD) -> HarmonicSpectrum:
    """Spectrum of the field from a rod centered on the pivot (even harmonics only)."""
    if np.linalg.norm(rod.offset) > 1e-12:
        raise ConfigError("rod_field_spectrum expects a rod centered on the pivot; "
                          "use field_timeseries for offset sources")
    series = field_timeseries(rod, rotation, lam, f, kernel_tag, samples_per_period, 1,
                              constants, resolution=resolution)
    return harmonic_amplitudes(series, n_max)


def first_harmonic_vs_lambda(spec: SourceSpec, rotation: RotationSpec, lams, kernel_tag=V45,
                             component=None, resolution=2.5e-3, constants=DEFAULT_CONSTANTS,
                             samples_per_period=DEFAULT_SAMPLES_PER_PERIOD, cell_average=False):
    """First-harmonic amplitude (f = 1) of one field component for many force ranges.

    The kinematics are computed once and only the radial factor is
    re-evaluated per force range.
    """
    _check_kernel(kernel_tag)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise ConfigError("force ranges must be positive")
    if component is None:
        component = READOUT_COMPONENT[kernel_tag]
    cloud = build_voxel_cloud(spec, resolution)
    dt, times = _sample_times(rotation.frequency, samples_per_period, 1)
    pos, vel = kinematics(cloud, rotation, times)
    pts = field_points(cell_average)
    r_vec = pts[None, :, None, :] - pos[:, None, :, :]
    r = _distance(r_vec)
    if kernel_tag == V45:
        direction = np.cross(vel[:, None, :, :], r_vec / r[..., None])[..., component]
        pref = SIGN_V45 * v45_prefactor(constants)
    else:
        direction = np.broadcast_to(vel[:, None, :, component], r.shape)
        pref = SIGN_V1213 * v1213_prefactor(constants)
    weighted = direction * cloud.counts
    n = times.shape[0]
    phasor = np.exp(-2j * np.pi * np.arange(n) / n)
    out = np.empty(lams.shape[0])
    for i, lam in enumerate(lams):
        if kernel_tag == V45:
            radial = (1.0 / (lam * r) + 1.0 / r ** 2) * np.exp(-r / lam)
        else:
            radial = np.exp(-r / lam) / r
        b = pref * (weighted * radial).sum(axis=2).mean(axis=1)
        out[i] = 2.0 * abs(np.dot(phasor, b)) / n
    return out
