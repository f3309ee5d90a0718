"""Rb-Xe spin-based amplifier.

Analytic pieces (steady state, effective field, gain, lineshape) use the
rotating-wave approximation; ``integrate_bloch`` solves the full coupled
equations without it, so the two can be checked against each other.

All gyromagnetic ratios are magnitudes in rad s^-1 T^-1.  Magnetizations
``M0e``, ``M0n`` are expressed as fields (T) so that ``beta * M0 * P``
is the Fermi-contact field seen by the other species.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.optimize import curve_fit

from . import bloch
from .constants import DEFAULT_CONSTANTS, GAMMA_E_RAD_PER_S_PER_T
from .errors import ConfigError, FitError
from .fields import FieldTimeSeries

# Rb contact field on the Xe, beta*M0e*P0e, stays near 1 pT so the Larmor
# shift it causes is < 1% of the linewidth
DEFAULT_M0E = 5e-16


@dataclass(frozen=True)
class AmplifierParams:
    gamma_e: float = GAMMA_E_RAD_PER_S_PER_T
    gamma_n: float = DEFAULT_CONSTANTS.gamma_n
    Q: float = 6.0
    Te: float = 1e-3
    T1n: float = 42.4
    T2n: float = 42.4
    P0e: float = 0.5
    P0n: float = 0.30
    M0e: float = DEFAULT_M0E
    M0n: float = 5.4e-11
    kappa0: float = 540.0
    Bz0: float = 423e-9

    def __post_init__(self):
        for name in ("Te", "T1n", "T2n"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("P0e", "P0n"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.Q < 1:
            raise ConfigError("slowing-down factor Q must be >= 1")
        if not self.kappa0 > 0:
            raise ConfigError("kappa0 must be positive")

    @property
    def beta(self) -> float:
        return 8.0 * math.pi * self.kappa0 / 3.0

    @property
    def larmor_frequency(self) -> float:
        return larmor_frequency(self.Bz0, self.gamma_n)

    @property
    def linewidth(self) -> float:
        """Lineshape parameter Lambda = 1 / (pi T2n), Hz."""
        return 1.0 / (math.pi * self.T2n)

    @property
    def fwhm(self) -> float:
        return math.sqrt(3.0) * self.linewidth

    @property
    def eta(self) -> float:
        return amplification_factor(self)

    def replace(self, **changes) -> "AmplifierParams":
        return replace(self, **changes)

    def tuned_to(self, frequency) -> "AmplifierParams":
        """Same amplifier with the bias field set so that nu0 = ``frequency``."""
        return replace(self, Bz0=2.0 * math.pi * frequency / self.gamma_n)

    @classmethod
    def calibrated(cls, eta=116.0, fwhm=13e-3, kappa0=540.0, P0n=0.30, Bz0=423e-9,
                   gamma_n=DEFAULT_CONSTANTS.gamma_n, T1n=None, **electron):
        """Parameter set hitting a target gain and bandwidth.

        T2n follows from the FWHM, T2n = sqrt(3) / (pi * fwhm); M0n is then
        solved from the gain.  T1n defaults to T2n.
        """
        T2n = math.sqrt(3.0) / (math.pi * fwhm)
        M0n = eta / ((4.0 * math.pi / 3.0) * kappa0 * P0n * gamma_n * T2n)
        return cls(gamma_n=gamma_n, T1n=T2n if T1n is None else T1n, T2n=T2n, P0n=P0n,
                   M0n=M0n, kappa0=kappa0, Bz0=Bz0, **electron)


def larmor_frequency(Bz0, gamma_n=DEFAULT_CONSTANTS.gamma_n):
    """nu0 = gamma_n * B / (2 pi)."""
    return gamma_n * Bz0 / (2.0 * math.pi)


def amplification_factor(params: AmplifierParams) -> float:
    return (4.0 * math.pi / 3.0) * params.kappa0 * params.M0n * params.P0n * params.gamma_n * params.T2n


@dataclass(frozen=True)
class SteadyState:
    """Nuclear polarization under ``B_ac cos(2 pi nu t) y``.

    ``Px = x_cos cos + x_sin sin``, ``Py = y_cos cos + y_sin sin``,
    ``Pz`` constant.
    """

    frequency: float
    x_cos: float
    x_sin: float
    y_cos: float
    y_sin: float
    z: float

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        c = np.cos(2 * np.pi * self.frequency * t)
        s = np.sin(2 * np.pi * self.frequency * t)
        return np.stack([self.x_cos * c + self.x_sin * s,
                         self.y_cos * c + self.y_sin * s,
                         np.full_like(c, self.z)], axis=-1)

    @property
    def transverse_amplitude(self) -> float:
        return math.hypot(self.x_cos, self.x_sin)


def saturation_parameter(params: AmplifierParams, B_ac) -> float:
    return (params.gamma_n * B_ac / 2.0) ** 2 * params.T1n * params.T2n


def steady_state_xe(params: AmplifierParams, B_ac, nu) -> SteadyState:
    """Rotating-frame steady state, transformed back to the lab frame."""
    if B_ac < 0:
        raise ConfigError("drive amplitude must be non-negative")
    T2 = params.T2n
    detune = 2.0 * math.pi * (nu - params.larmor_frequency)
    denom = 1.0 + saturation_parameter(params, B_ac) + (detune * T2) ** 2
    pref = 0.5 * params.P0n * params.gamma_n * B_ac / denom
    in_phase = pref * T2
    quad = pref * detune * T2 ** 2
    z = params.P0n * (1.0 + (detune * T2) ** 2) / denom
    return SteadyState(nu, in_phase, quad, -quad, in_phase, z)


def effective_field(params: AmplifierParams, B_ac, nu, t):
    """Fermi-contact field of the Xe transverse magnetization on the Rb, T."""
    ss = steady_state_xe(params, B_ac, nu)
    P = ss.evaluate(t)
    P[..., 2] = 0.0
    return params.beta * params.M0n * P


@dataclass(frozen=True)
class LineshapeModel:
    nu0: float
    linewidth: float
    eta: float

    @property
    def fwhm(self) -> float:
        return math.sqrt(3.0) * self.linewidth

    def response(self, nu):
        half = 0.5 * self.linewidth
        return half / np.sqrt((np.asarray(nu, dtype=float) - self.nu0) ** 2 + half ** 2)


def lineshape(params: AmplifierParams, nu):
    """Relative amplitude response at ``nu`` (1 on resonance) and the model behind it."""
    model = LineshapeModel(params.larmor_frequency, params.linewidth, params.eta)
    return model.response(nu), model


def _lineshape_fn(nu, A, nu0, lam):
    return A / np.sqrt((nu - nu0) ** 2 + (0.5 * lam) ** 2)


def fit_lineshape(nu, amplitude) -> LineshapeModel:
    """Least-squares fit of ``A / sqrt((nu - nu0)^2 + (Lambda/2)^2)``.

    The returned model's ``eta`` is the fitted peak value ``2 A / Lambda``.
    """
    nu = np.asarray(nu, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    peak = np.argmax(amplitude)
    half = amplitude[peak] / 2.0
    above = nu[amplitude >= half]
    guess_lam = max((above.max() - above.min()) / math.sqrt(3.0), np.ptp(nu) / len(nu))
    p0 = (amplitude[peak] * guess_lam / 2.0, nu[peak], guess_lam)
    try:
        popt, _ = curve_fit(_lineshape_fn, nu, amplitude, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"lineshape fit failed: {exc}") from exc
    A, nu0, lam = popt
    lam = abs(lam)
    return LineshapeModel(float(nu0), float(lam), float(2.0 * A / lam))


def model_response_curve(params: AmplifierParams, nu, B_ac=1e-15):
    """|B_eff| / B_ac from the steady-state solution, swept over ``nu``."""
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    out = np.empty_like(nu)
    for i, f in enumerate(nu):
        ss = steady_state_xe(params, B_ac, f)
        out[i] = params.beta * params.M0n * ss.transverse_amplitude / B_ac
    return out


# ---------------------------------------------------------------- Bloch

@dataclass(frozen=True)
class HarmonicDrive:
    """Sum of linearly polarized tones ``amplitudes[k] * cos(2 pi frequencies[k] t + phases[k])``."""

    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=float).reshape(-1, 3)
        f = np.asarray(self.frequencies, dtype=float).reshape(-1)
        p = np.broadcast_to(np.asarray(self.phases, dtype=float), f.shape).copy()
        if a.shape[0] != f.shape[0]:
            raise ConfigError("drive amplitudes and frequencies differ in length")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "phases", p)

    @classmethod
    def single(cls, amplitude, frequency, axis=(0.0, 1.0, 0.0), phase=0.0):
        return cls(amplitude * np.asarray(axis, dtype=float)[None, :], [frequency], [phase])

    @classmethod
    def none(cls):
        return cls(np.zeros((1, 3)), [0.0], [0.0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        arg = 2 * np.pi * self.frequencies * t[..., None] + self.phases
        return np.cos(arg) @ self.amplitudes


@dataclass(frozen=True)
class SpinState:
    t: float
    Pe: np.ndarray
    Pn: np.ndarray


@dataclass(frozen=True)
class BlochTrajectory:
    t: np.ndarray
    Pe: np.ndarray
    Pn: np.ndarray

    def __len__(self):
        return self.t.shape[0]

    def state(self, i) -> SpinState:
        return SpinState(float(self.t[i]), self.Pe[i], self.Pn[i])

    def to_array(self):
        return np.column_stack([self.t, self.Pe, self.Pn])


def max_stable_step(params: AmplifierParams) -> float:
    """Largest step accepted by ``integrate_bloch``: 1/50 of the fastest time scale."""
    scales = [params.T2n, params.Te * params.Q]
    if params.Bz0 > 0:
        scales.append(1.0 / params.larmor_frequency)
        scales.append(2.0 * math.pi * params.Q / (params.gamma_e * params.Bz0))
    return min(scales) / 50.0


def _par_vector(params):
    inv = lambda x: 0.0 if math.isinf(x) else 1.0 / x  # noqa: E731
    return np.array([
        params.gamma_e / params.Q, params.gamma_n, params.Bz0,
        params.beta * params.M0n, params.beta * params.M0e, params.P0e, params.P0n,
        inv(params.Te * params.Q), inv(params.T1n), inv(params.T2n),
    ])


def equilibrium_state(params: AmplifierParams):
    return np.array([0.0, 0.0, params.P0e, 0.0, 0.0, params.P0n])


def _n_steps(t_span, dt):
    t0, t1 = float(t_span[0]), float(t_span[1])
    n = int(round((t1 - t0) / dt))
    if n < 1 or abs(n * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ConfigError("t_span must be a positive integer multiple of dt")
    return t0, n


def integrate_bloch_batch(params: AmplifierParams, drives, t_span, dt, record_every=1,
                          initial=None, check_step=True):
    """Integrate several trajectories that share ``params`` but not their drives.

    ``drives`` is a sequence of :class:`HarmonicDrive` (all with the same
    number of tones).  Returns a list of :class:`BlochTrajectory` sampled
    every ``record_every`` steps, including the initial state.
    """
    if check_step and dt > max_stable_step(params) * (1 + 1e-12):
        raise ConfigError(f"dt={dt!r} exceeds the stable step {max_stable_step(params)!r}")
    t0, n = _n_steps(t_span, dt)
    drives = list(drives)
    M = len(drives)
    K = max(d.frequencies.shape[0] for d in drives)
    amp = np.zeros((M, K, 3))
    omega = np.zeros((M, K))
    phase = np.zeros((M, K))
    for m, d in enumerate(drives):
        k = d.frequencies.shape[0]
        amp[m, :k] = d.amplitudes
        omega[m, :k] = 2 * np.pi * d.frequencies
        phase[m, :k] = d.phases
    y = np.empty((M, 6))
    y[:] = equilibrium_state(params) if initial is None else np.asarray(initial, dtype=float)
    par = _par_vector(params)
    n_rec = n // record_every
    rec = np.empty((n_rec + 1, M, 6))
    rec[0] = y
    for j in range(n_rec):
        bloch.rk4_harmonic(y, t0 + j * record_every * dt, dt, record_every, amp, omega, phase, par)
        rec[j + 1] = y
    t = t0 + dt * record_every * np.arange(n_rec + 1)
    return [BlochTrajectory(t, rec[:, m, :3].copy(), rec[:, m, 3:].copy()) for m in range(M)]


def integrate_bloch(params: AmplifierParams, drive_field, t_span, dt, record_every=1,
                    initial=None, check_step=True) -> BlochTrajectory:
    """Fixed-step RK4 solution of the fully coupled Rb-Xe Bloch equations.

    ``drive_field`` is a :class:`HarmonicDrive` or any vectorized callable
    ``t -> (..., 3)`` field in tesla acting on the nuclear spins.
    """
    if isinstance(drive_field, HarmonicDrive) or drive_field is None:
        drive = HarmonicDrive.none() if drive_field is None else drive_field
        return integrate_bloch_batch(params, [drive], t_span, dt, record_every, initial,
                                     check_step)[0]
    if check_step and dt > max_stable_step(params) * (1 + 1e-12):
        raise ConfigError(f"dt={dt!r} exceeds the stable step {max_stable_step(params)!r}")
    t0, n = _n_steps(t_span, dt)
    y = np.empty((1, 6))
    y[:] = equilibrium_state(params) if initial is None else np.asarray(initial, dtype=float)
    par = _par_vector(params)
    n_rec = n // record_every
    rec = np.empty((n_rec + 1, 6))
    rec[0] = y[0]
    for j in range(n_rec):
        ts = t0 + j * record_every * dt + 0.5 * dt * np.arange(2 * record_every + 1)
        table = np.asarray(drive_field(ts), dtype=float).reshape(1, -1, 3)
        bloch.rk4_tabulated(y, dt, np.ascontiguousarray(table), par)
        rec[j + 1] = y[0]
    t = t0 + dt * record_every * np.arange(n_rec + 1)
    return BlochTrajectory(t, rec[:, :3].copy(), rec[:, 3:].copy())


def fit_tone(t, x, frequency):
    """Least-squares ``a cos + b sin + c`` at ``frequency``; returns (a, b, c)."""
    w = 2 * np.pi * frequency * np.asarray(t)
    A = np.column_stack([np.cos(w), np.sin(w), np.ones_like(w)])
    coef, *_ = np.linalg.lstsq(A, np.asarray(x), rcond=None)
    return tuple(float(c) for c in coef)


def steady_state_from_trajectory(traj: BlochTrajectory, frequency, window_periods=20) -> SteadyState:
    """Fit the last ``window_periods`` drive periods of a trajectory to the steady-state form."""
    t_end = traj.t[-1]
    sel = traj.t >= t_end - window_periods / frequency - 1e-12
    xc, xs, _ = fit_tone(traj.t[sel], traj.Pn[sel, 0], frequency)
    yc, ys, _ = fit_tone(traj.t[sel], traj.Pn[sel, 1], frequency)
    z = float(np.mean(traj.Pn[sel, 2]))
    return SteadyState(frequency, xc, xs, yc, ys, z)


# ------------------------------------------------------- band-pass response

def transfer_phasors(params: AmplifierParams, frequencies):
    """Complex small-signal gain at each frequency: ``eta / (1 + i 2 pi (f - nu0) T2n)``."""
    f = np.asarray(frequencies, dtype=float)
    x = 2 * np.pi * (f - params.larmor_frequency) * params.T2n
    return params.eta / (1.0 + 1j * x)


def response_phasors(params: AmplifierParams, field_phasors, frequencies):
    """Effective-field phasors for transverse drive phasors.

    ``field_phasors`` has shape ``(N, 3)``: complex amplitudes ``b`` with
    ``B(t) = Re(b exp(i w t))``.  Only x and y drive the nuclei; the
    response is circular, ``g (b_y - i b_x) (1, -i, 0)``.
    """
    b = np.asarray(field_phasors, dtype=complex).reshape(-1, 3)
    g = transfer_phasors(params, frequencies) * (b[:, 1] - 1j * b[:, 0])
    out = np.zeros_like(b)
    out[:, 0] = g
    out[:, 1] = -1j * g
    return out


def amplifier_response(series: FieldTimeSeries, params: AmplifierParams) -> FieldTimeSeries:
    """Band-pass the field series harmonic by harmonic; DC and z are dropped."""
    n = series.samples.shape[0]
    k = int(round(series.n_periods))
    X = np.fft.rfft(series.samples, axis=0)
    bins = np.arange(X.shape[0])
    harmonic = (bins % k == 0) & (bins > 0)
    Y = np.zeros_like(X)
    freqs = bins[harmonic] / k * series.frequency
    Y[harmonic] = response_phasors(params, X[harmonic], freqs)
    out = np.fft.irfft(Y, n=n, axis=0)
    return series.with_samples(out, stage="amplifier", eta=params.eta)
