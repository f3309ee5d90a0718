import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exotic_spin_lab import presets
from exotic_spin_lab.amplifier import (AmplifierParams, HarmonicDrive, amplification_factor,
                                       amplifier_response, effective_field, fit_lineshape,
                                       integrate_bloch, larmor_frequency, lineshape,
                                       max_stable_step, model_response_curve,
                                       saturation_parameter, steady_state_from_trajectory,
                                       steady_state_xe)
from exotic_spin_lab.constants import PhysicalConstants
from exotic_spin_lab.errors import ConfigError
from exotic_spin_lab.fields import V45, FieldTimeSeries, field_timeseries, harmonic_amplitudes


@pytest.mark.parametrize("option", ["reference", "bias-pair"])
def test_larmor_423_nT(option):
    g = PhysicalConstants.with_gamma_option(option).gamma_n
    assert larmor_frequency(423e-9, g) == pytest.approx(4.997, rel=5e-3)


def test_larmor_zero_and_linear():
    assert larmor_frequency(0.0) == 0.0
    assert larmor_frequency(846e-9) == 2 * larmor_frequency(423e-9)


def test_params_validation():
    with pytest.raises(ConfigError):
        AmplifierParams(T2n=0.0)
    with pytest.raises(ConfigError):
        AmplifierParams(P0n=1.5)
    with pytest.raises(ConfigError):
        AmplifierParams(Q=0.5)
    with pytest.raises(ConfigError):
        AmplifierParams(kappa0=0.0)


def test_calibrated_defaults(amp):
    assert amplification_factor(amp) == pytest.approx(116.0, rel=0.02)
    assert amp.fwhm == pytest.approx(13e-3, rel=0.10)
    assert amp.T1n == amp.T2n
    assert amp.beta == pytest.approx(8 * math.pi * 540 / 3)


def test_amplification_factor_scaling(amp):
    assert amplification_factor(amp.replace(P0n=0.0)) == 0.0
    assert amplification_factor(amp.replace(T2n=2 * amp.T2n)) == pytest.approx(
        2 * amplification_factor(amp), rel=1e-15)


def test_steady_state_zero_drive(amp):
    ss = steady_state_xe(amp, 0.0, amp.larmor_frequency + 0.01)
    assert (ss.x_cos, ss.x_sin, ss.y_cos, ss.y_sin) == (0.0, 0.0, 0.0, 0.0)
    assert ss.z == pytest.approx(amp.P0n)


def test_steady_state_small_resonant(amp):
    B = 1e-15
    ss = steady_state_xe(amp, B, amp.larmor_frequency)
    assert ss.transverse_amplitude == pytest.approx(0.5 * amp.P0n * amp.gamma_n * B * amp.T2n, rel=1e-6)


def test_steady_state_saturation(amp):
    B = 2e-9
    ss = steady_state_xe(amp, B, amp.larmor_frequency)
    s = (amp.gamma_n * B / 2) ** 2 * amp.T1n * amp.T2n
    assert saturation_parameter(amp, B) == pytest.approx(s)
    assert ss.z == pytest.approx(amp.P0n / (1 + s), rel=1e-12)


def test_negative_drive_rejected(amp):
    with pytest.raises(ConfigError):
        steady_state_xe(amp, -1e-15, 5.0)


def test_effective_field_circular_on_resonance(amp):
    nu = amp.larmor_frequency
    t = np.linspace(0, 2 / nu, 101)
    B = effective_field(amp, 1e-15, nu, t)
    mag = np.linalg.norm(B, axis=1)
    np.testing.assert_allclose(mag, mag[0], rtol=1e-12)
    np.testing.assert_allclose(B[:, 2], 0.0)
    # x leads y by a quarter period
    k = np.argmax(B[:, 0])
    assert abs(B[k, 1]) < 0.1 * mag[0]
    np.testing.assert_array_equal(effective_field(amp, 0.0, nu, t), 0.0)


def test_effective_field_gain_matches_eta(amp):
    B = 1e-16
    Beff = effective_field(amp, B, amp.larmor_frequency, [0.0, 0.05])
    assert np.linalg.norm(Beff[0]) / B == pytest.approx(amplification_factor(amp), rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(b=st.floats(1e-18, 1e-14), k=st.floats(0.5, 10.0), det=st.floats(-0.05, 0.05))
def test_small_signal_linearity(amp, b, k, det):
    nu = amp.larmor_frequency + det
    a1 = steady_state_xe(amp, b, nu).transverse_amplitude
    a2 = steady_state_xe(amp, k * b, nu).transverse_amplitude
    assert saturation_parameter(amp, k * b) < 1e-3
    assert a2 / a1 == pytest.approx(k, rel=1e-3)


def test_lineshape_properties(amp):
    nu0, lam = amp.larmor_frequency, amp.linewidth
    rel, model = lineshape(amp, [nu0, nu0 - lam * math.sqrt(3) / 2, nu0 + lam * math.sqrt(3) / 2])
    assert rel[0] == 1.0
    assert rel[1] == pytest.approx(0.5, rel=1e-12)
    assert rel[2] == pytest.approx(0.5, rel=1e-12)
    d = np.linspace(0, 0.1, 25)
    np.testing.assert_array_equal(model.response(nu0 + d), model.response(nu0 - d))
    assert model.fwhm == pytest.approx(math.sqrt(3) * lam)
    assert model.fwhm == pytest.approx(13e-3, rel=0.10)


def test_fit_recovers_model(amp):
    nu = amp.larmor_frequency + np.linspace(-0.05, 0.05, 101)
    fit = fit_lineshape(nu, model_response_curve(amp, nu))
    assert fit.fwhm == pytest.approx(13e-3, rel=1e-3)
    assert fit.eta == pytest.approx(116.0, rel=1e-3)
    assert fit.nu0 == pytest.approx(amp.larmor_frequency, abs=1e-6)


@pytest.mark.parametrize("B", [1e-15, 1e-13])
def test_gain_and_width_independent_of_amplitude(amp, B):
    nu = amp.larmor_frequency + np.linspace(-0.05, 0.05, 81)
    fit = fit_lineshape(nu, model_response_curve(amp, nu, B))
    assert fit.eta == pytest.approx(116.0, rel=1e-3)
    assert fit.fwhm == pytest.approx(13e-3, rel=1e-3)


def _dt(p):
    n = math.ceil(1.0 / max_stable_step(p))
    return 1.0 / n


def test_zero_drive_equilibrium_is_stationary(amp):
    dt = _dt(amp)
    tr = integrate_bloch(amp, None, (0.0, 2.0), dt, record_every=1000)
    np.testing.assert_allclose(tr.Pe, [[0, 0, amp.P0e]] * len(tr), atol=1e-9)
    np.testing.assert_allclose(tr.Pn, [[0, 0, amp.P0n]] * len(tr), atol=1e-9)


def test_step_size_violation(amp):
    with pytest.raises(ConfigError):
        integrate_bloch(amp, None, (0.0, 1.0), 10 * max_stable_step(amp))


def test_free_precession_and_norm(amp):
    p = amp.replace(T1n=math.inf, T2n=math.inf, Te=math.inf)
    dt = _dt(amp)
    tilt = [0.0, 0.0, p.P0e, 0.3 * math.sin(0.4), 0.0, 0.3 * math.cos(0.4)]
    tr = integrate_bloch(p, None, (0.0, 2.0), dt, record_every=10, initial=tilt)
    norm = np.linalg.norm(tr.Pn, axis=1)
    periods = 2.0 * p.larmor_frequency
    assert np.abs(norm - 0.3).max() < 1e-8 * periods
    # zero crossings of Pn_x give the precession frequency
    x = tr.Pn[:, 0]
    idx = np.nonzero(np.diff(np.sign(x)) != 0)[0]
    tc = tr.t[idx] - x[idx] * (tr.t[idx + 1] - tr.t[idx]) / (x[idx + 1] - x[idx])
    freq = (len(tc) - 1) / (2 * (tc[-1] - tc[0]))
    assert freq == pytest.approx(p.larmor_frequency, rel=1e-3)


def test_resonant_drive_reaches_steady_state(amp):
    nu = amp.larmor_frequency
    dt = _dt(amp)
    T = 5 * amp.T2n
    n = int(T / dt) // 1000 * 1000
    tr = integrate_bloch(amp, HarmonicDrive.single(13e-12, nu), (0.0, n * dt), dt, record_every=100)
    assert np.linalg.norm(tr.Pn, axis=1).max() <= 1 + 1e-9
    assert np.linalg.norm(tr.Pe, axis=1).max() <= 1 + 1e-9
    num = steady_state_from_trajectory(tr, nu, 40)
    ana = steady_state_xe(amp, 13e-12, nu)
    assert num.transverse_amplitude == pytest.approx(ana.transverse_amplitude, rel=0.01)


def test_callable_drive_matches_harmonic(amp):
    drive = HarmonicDrive.single(1e-10, amp.larmor_frequency)
    dt = _dt(amp)
    a = integrate_bloch(amp, drive, (0.0, 0.5), dt, record_every=100)
    b = integrate_bloch(amp, lambda t: drive(t), (0.0, 0.5), dt, record_every=100)
    np.testing.assert_allclose(a.Pn, b.Pn, atol=1e-12)


def _tone_series(nu, orders_amps):
    n = 720
    t = np.arange(n) / (n * nu)
    y = sum(a * np.cos(2 * np.pi * k * nu * t) for k, a in orders_amps)
    return FieldTimeSeries(1 / (n * nu), nu, np.outer(y, [0, 1, 0]))


def test_response_first_harmonic_on_resonance(amp):
    nu = amp.larmor_frequency
    out = amplifier_response(_tone_series(nu, [(1, 1e-15)]), amp)
    spec = harmonic_amplitudes(out, 3)
    assert spec.amplitude(1, 0) == pytest.approx(amp.eta * 1e-15, rel=1e-9)
    assert spec.amplitude(1, 1) == pytest.approx(amp.eta * 1e-15, rel=1e-9)


def test_response_suppresses_second_harmonic(amp, bgo, cw):
    tuned = amp.tuned_to(cw.frequency)
    s = field_timeseries(bgo, cw, 1.0, 1.0, V45, resolution=5e-3)
    inp = harmonic_amplitudes(s, 2)
    out = harmonic_amplitudes(amplifier_response(s, tuned), 2)
    ratio = (out.amplitude(2, 1) / inp.amplitude(2, 1)) / (out.amplitude(1, 1) / inp.amplitude(1, 1))
    assert ratio < 1e-2


def test_response_detuned(amp):
    nu = amp.larmor_frequency
    s = _tone_series(nu, [(1, 1e-15)])
    on = harmonic_amplitudes(amplifier_response(s, amp), 1).amplitude(1, 0)
    detuned = amp.tuned_to(nu + 5 * amp.linewidth)
    off = harmonic_amplitudes(amplifier_response(s, detuned), 1).amplitude(1, 0)
    assert off < 0.2 * on
