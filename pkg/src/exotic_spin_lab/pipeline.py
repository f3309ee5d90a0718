"""From simulated fields to coupling estimates and exclusion curves.

The chain is: field series -> amplifier band-pass -> magnetometer trace
(``synthesize_signal``) -> per-period lock-in estimates -> Gaussian /
standard-error statistics -> CW/CCW combination -> systematics ->
bound-vs-range curve.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.optimize import curve_fit

from .amplifier import AmplifierParams, response_phasors, transfer_phasors
from .constants import DEFAULT_CONSTANTS
from .errors import ConfigError, FitError, LeakageError
from .fields import (READOUT_COMPONENT, V45, FieldTimeSeries, first_harmonic_vs_lambda,
                     harmonic_amplitudes)
from .geometry import CCW, CW, RotationSpec, SourceSpec
from . import presets

NT = 1e-9

# multiplier on sigma_total for the quoted bound
CL_POLICIES = {"two-sided-95": 1.959963984540054, "one-sided-95": 1.6448536269514722}
DEFAULT_CL_POLICY = "two-sided-95"


@dataclass(frozen=True)
class CalibrationSet:
    """Readout calibration.

    ``alpha`` is in V/nT of input-referred field (amplifier gain folded
    in), ``phi`` is the delay between field and signal at the rotation
    frequency (rad), ``b1_ref`` the simulated first-harmonic amplitude at
    the reference range with unit coupling (T) and ``field_phase`` that
    harmonic's phase for CW rotation (rad).
    """

    alpha: float
    phi: float
    b1_ref: float
    field_phase: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("calibration constant alpha must be positive")
        if not self.b1_ref > 0:
            raise ConfigError("reference first-harmonic amplitude must be positive")

    @property
    def volts_per_tesla(self) -> float:
        return self.alpha / NT

    @classmethod
    def from_reference(cls, series: FieldTimeSeries, alpha=presets.ALPHA_V_PER_NT,
                       phi=math.radians(presets.PHASE_DELAY_DEG), component=None):
        """Take ``b1_ref`` and ``field_phase`` from a unit-coupling CW reference series."""
        if component is None:
            component = READOUT_COMPONENT[series.kernel]
        spec = harmonic_amplitudes(series, 1)
        scale = 1.0 / series.f if series.f else 1.0
        return cls(alpha, phi, spec.amplitude(1, component) * scale, spec.phase(1, component))


@dataclass(frozen=True)
class SignalTrace:
    dt: float
    samples: np.ndarray
    frequency: float
    direction: str = CW
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).reshape(-1)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.shape[0] * self.dt

    @property
    def times(self):
        return self.dt * np.arange(self.samples.shape[0])

    def scaled(self, k):
        return replace(self, samples=k * self.samples)


def _integer_samples_per_period(dt, frequency):
    spp = 1.0 / (dt * frequency)
    n = int(round(spp))
    if n < 2 or abs(spp - n) > 1e-9 * spp:
        raise LeakageError(f"{spp!r} samples per period is not an integer")
    return n


def readout_phasor_factor(kernel_tag, readout=(1.0, 0.0)):
    """Phase of the on-resonance readout relative to the sensitive field component."""
    b = np.zeros((1, 3), dtype=complex)
    b[0, READOUT_COMPONENT[kernel_tag]] = 1.0
    gain = (b[0, 1] - 1j * b[0, 0])
    return gain * (readout[0] - 1j * readout[1])


def synthesize_signal(series: FieldTimeSeries, params: AmplifierParams, calib: CalibrationSet,
                      noise_asd=0.0, seed=None, n_periods=None, samples_per_period=64,
                      n_harmonics=10, readout=(1.0, 0.0), common_mode=None,
                      direction=None) -> SignalTrace:
    """Magnetometer trace produced by a periodic field.

    The field's harmonics pass through the amplifier band-pass, are
    projected on the readout axis (unit vector in xy) and referred back to
    the input by dividing by the gain magnitude at the rotation frequency,
    so ``alpha`` converts input-referred tesla to volts.  A pure time delay
    sets the total phase at the rotation frequency to ``calib.phi``.  White Gaussian noise of
    input-referred amplitude spectral density ``noise_asd`` (T/sqrt(Hz))
    and an optional common-mode tone ``(amplitude_T, phase_rad)`` at the
    rotation frequency are added; neither depends on direction.
    """
    if noise_asd < 0:
        raise ConfigError("noise amplitude spectral density must be non-negative")
    if n_periods is None:
        n_periods = max(1, int(round(series.n_periods)))
    n_periods = int(n_periods)
    spp = int(samples_per_period)
    direction = direction or series.meta.get("direction", CW)
    nu = series.frequency
    dt = 1.0 / (nu * spp)
    n = n_periods * spp

    spectrum = harmonic_amplitudes(series, n_harmonics)
    orders = spectrum.orders
    out = response_phasors(params, spectrum.complex_amplitudes(), orders * nu)
    proj = out[:, 0] * readout[0] + out[:, 1] * readout[1]
    g1 = complex(transfer_phasors(params, nu))
    proj = proj / abs(g1)
    delay = calib.phi - np.angle(g1) - np.angle(readout_phasor_factor(series.kernel, readout))
    proj = proj * np.exp(1j * orders * delay)

    # one period of samples, tiled; harmonics above Nyquist are dropped
    keep = orders < spp / 2
    t1 = dt * np.arange(spp)
    arg = 2 * np.pi * nu * np.outer(t1, orders[keep])
    one = (np.cos(arg) * proj[keep].real - np.sin(arg) * proj[keep].imag).sum(axis=1)
    if common_mode is not None:
        amp, ph = common_mode
        one = one + amp * np.cos(2 * np.pi * nu * t1 + ph)
    field_T = np.tile(one, n_periods)
    if noise_asd > 0:
        rng = np.random.default_rng(seed)
        sigma = noise_asd * math.sqrt(0.5 / dt)
        field_T = field_T + sigma * rng.standard_normal(n)
    meta = {"seed": seed, "noise_asd_T_rtHz": noise_asd, "kernel": series.kernel,
            "f": series.f, "lambda_m": series.lam}
    return SignalTrace(dt, calib.volts_per_tesla * field_T, nu, direction, meta)


def lockin_estimate(trace: SignalTrace, calib: CalibrationSet, window_periods=1,
                    phase_offset=0.0):
    """Per-window coupling estimates from projection onto the phase reference.

    The reference is ``cos(2 pi nu t + phi + psi + phase_offset)``, with
    ``psi`` the CW field's first-harmonic phase.  Both directions share the
    reference so a direction-independent background projects identically;
    values are not sign-corrected for direction.
    """
    spp = _integer_samples_per_period(trace.dt, trace.frequency)
    win = spp * int(window_periods)
    n = trace.samples.shape[0]
    if n < win or n % win:
        raise LeakageError(f"trace of {n} samples does not hold an integer number of "
                           f"{win}-sample windows")
    t = trace.dt * np.arange(win)
    ref = np.cos(2 * np.pi * trace.frequency * t + calib.phi + calib.field_phase + phase_offset)
    blocks = trace.samples.reshape(-1, win)
    return (blocks @ ref) / (ref @ ref) / (calib.volts_per_tesla * calib.b1_ref)


@dataclass(frozen=True)
class GaussianFit:
    mean: float
    sigma: float
    amplitude: float
    sample_mean: float
    standard_error: float
    n: int


def _gauss(x, a, mu, s):
    return a * np.exp(-0.5 * ((x - mu) / s) ** 2)


def _gauss_jac(x, a, mu, s):
    u = (x - mu) / s
    g = np.exp(-0.5 * u * u)
    return np.column_stack([g, a * g * u / s, a * g * u * u / s])


def fit_gaussian(values, n_bins=None) -> GaussianFit:
    """Least-squares Gaussian fit to the histogram of ``values``.

    Bins follow the Freedman-Diaconis rule unless ``n_bins`` is given.
    """
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.shape[0] < 30:
        raise FitError(f"need at least 30 values, got {x.shape[0]}")
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1))
    if not std > 0:
        raise FitError("degenerate histogram: all values equal")
    # fit in centered coordinates so a shift of the data shifts the result exactly
    xc = x - mean
    counts, edges = np.histogram(xc, bins="fd" if n_bins is None else int(n_bins))
    if np.count_nonzero(counts) < 3:
        raise FitError("degenerate histogram: fewer than three occupied bins")
    centers = 0.5 * (edges[:-1] + edges[1:])
    try:
        popt, _ = curve_fit(_gauss, centers / std, counts, p0=(counts.max(), 0.0, 1.0), jac=_gauss_jac,
                            maxfev=10000)
    except RuntimeError as exc:
        raise FitError(f"Gaussian fit did not converge: {exc}") from exc
    a, mu, s = popt
    return GaussianFit(mean + float(mu) * std, float(abs(s)) * std, float(a), mean,
                       std / math.sqrt(x.shape[0]), int(x.shape[0]))


@dataclass(frozen=True)
class CouplingEstimate:
    """Coupling estimate; ``sigma_stat`` is the standard error of the mean."""

    values: np.ndarray
    mean: float
    sigma_stat: float
    sigma_stat_fit: float = float("nan")
    sigma_syst: float = 0.0
    quadrature: float = float("nan")
    per_direction: dict = field(default_factory=dict)

    @property
    def sigma_total(self) -> float:
        return math.hypot(self.sigma_stat, self.sigma_syst)

    @property
    def n(self) -> int:
        return int(np.asarray(self.values).shape[0])

    def with_systematics(self, sigma_syst) -> "CouplingEstimate":
        return replace(self, sigma_syst=float(sigma_syst))

    @classmethod
    def from_summary(cls, mean, sigma_stat, sigma_syst=0.0):
        return cls(np.array([mean]), float(mean), float(sigma_stat), sigma_syst=float(sigma_syst))

    def to_dict(self):
        return {
            "mean": self.mean,
            "sigma_stat": self.sigma_stat,
            "sigma_stat_fit": None if math.isnan(self.sigma_stat_fit) else self.sigma_stat_fit,
            "sigma_syst": self.sigma_syst,
            "sigma_total": self.sigma_total,
            "quadrature": None if math.isnan(self.quadrature) else self.quadrature,
            "n_periods": self.n,
            "per_direction": dict(self.per_direction),
        }


def estimate_from_values(values, direction=CW, quadrature=None, n_bins=None) -> CouplingEstimate:
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise ConfigError("no per-period values")
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(x.shape[0])) if x.shape[0] > 1 else float("nan")
    try:
        g = fit_gaussian(x, n_bins)
        se_fit = g.sigma / math.sqrt(x.shape[0])
    except FitError:
        se_fit = float("nan")
    q = float("nan") if quadrature is None else float(np.mean(quadrature))
    return CouplingEstimate(x, mean, se, se_fit, 0.0, q, {direction: mean})


def combine_directions(cw: CouplingEstimate, ccw: CouplingEstimate, mode="pooled") -> CouplingEstimate:
    """Sign-correct the CCW values and merge with the CW ones.

    The exotic field reverses with the rotation sense, common-mode
    backgrounds do not, so the corrected average rejects the latter.
    ``mode="pooled"`` concatenates the per-period values, ``"averaged"``
    averages the two direction means.
    """
    if cw.n == 0 or ccw.n == 0:
        raise ConfigError("both directions need at least one value")
    corrected = -np.asarray(ccw.values)
    per_dir = {CW: cw.mean, CCW: ccw.mean}
    if mode == "pooled":
        values = np.concatenate([np.asarray(cw.values), corrected])
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(values.shape[0]))
        try:
            se_fit = fit_gaussian(values).sigma / math.sqrt(values.shape[0])
        except FitError:
            se_fit = float("nan")
    elif mode == "averaged":
        values = np.concatenate([np.asarray(cw.values), corrected])
        mean = 0.5 * (cw.mean - ccw.mean)
        se = 0.5 * math.hypot(cw.sigma_stat, ccw.sigma_stat)
        se_fit = 0.5 * math.hypot(cw.sigma_stat_fit, ccw.sigma_stat_fit)
    else:
        raise ConfigError(f"unknown pooling mode {mode!r}")
    quad = 0.5 * (cw.quadrature - ccw.quadrature)
    return CouplingEstimate(values, mean, se, se_fit, math.hypot(cw.sigma_syst, ccw.sigma_syst),
                            quad, per_dir)


# ------------------------------------------------------------- field model

@dataclass(frozen=True)
class FieldModel:
    """Everything needed to recompute the reference first harmonic."""

    source: SourceSpec
    rotation: RotationSpec
    kernel: str = V45
    lam_ref: float = presets.LAMBDA_REF
    resolution: float = presets.BGO_RESOLUTION
    samples_per_period: int = 720
    constants: object = DEFAULT_CONSTANTS
    cell_average: bool = False

    @property
    def component(self) -> int:
        return READOUT_COMPONENT[self.kernel]

    def first_harmonic(self, lams=None):
        lams = self.lam_ref if lams is None else lams
        out = first_harmonic_vs_lambda(self.source, self.rotation, lams, self.kernel,
                                       self.component, self.resolution, self.constants,
                                       self.samples_per_period, self.cell_average)
        return out if np.ndim(lams) else float(out[0])

    def perturbed(self, name, delta, lever_transfer=1.0) -> "FieldModel":
        src, rot = self.source, self.rotation
        if name == "bgo_mass":
            scale = (src.mass + delta) / src.mass
            src = replace(src, mass=src.mass + delta, nucleons=src.nucleons * scale)
        elif name in ("pivot_x", "pivot_y", "pivot_z"):
            pivot = list(rot.pivot)
            pivot["xyz".index(name[-1])] += delta
            rot = replace(rot, pivot=tuple(pivot))
        elif name in ("rod_length", "lever_arm"):
            shift = delta * (lever_transfer if name == "rod_length" else 1.0)
            off = np.asarray(src.offset)
            arm = np.linalg.norm(off)
            src = replace(src, offset=tuple(off * (arm + shift) / arm))
        elif name == "frequency":
            rot = replace(rot, frequency=rot.frequency + delta)
        else:
            raise ConfigError(f"unknown systematics parameter {name!r}")
        return replace(self, source=src, rotation=rot)


@dataclass(frozen=True)
class SystematicRow:
    """One error-budget line; ``plus``/``minus`` are non-negative magnitudes."""

    name: str
    value: float
    plus: float
    minus: float
    lever_transfer: float = 1.0


@dataclass(frozen=True)
class SystematicResult:
    row: SystematicRow
    delta_plus: float
    delta_minus: float

    @property
    def magnitude(self) -> float:
        return max(abs(self.delta_plus), abs(self.delta_minus))


@dataclass(frozen=True)
class SystematicsReport:
    f_nominal: float
    results: list
    total: float

    def to_dict(self):
        return {
            "f_nominal": self.f_nominal,
            "total": self.total,
            "rows": [{"parameter": r.row.name, "value": r.row.value, "plus": r.row.plus,
                      "minus": r.row.minus, "delta_f_plus": r.delta_plus,
                      "delta_f_minus": r.delta_minus} for r in self.results],
        }


GEOMETRY_PARAMETERS = ("bgo_mass", "pivot_x", "pivot_y", "pivot_z", "rod_length", "lever_arm",
                       "frequency")


def propagate_systematics(model: FieldModel, rows, f_nominal, quadrature=None) -> SystematicsReport:
    """Shift each parameter by +/- its uncertainty and record the change in f.

    Geometry rows re-simulate the reference first harmonic,
    ``df = f (B_nominal / B_shifted - 1)``.  The ``alpha`` row scales f
    inversely with the calibration constant.  The ``phase`` row rotates the
    lock-in reference and needs the quadrature estimate.  The total is the
    quadrature sum of the larger shift of each row.
    """
    b_nom = None
    results = []
    for row in rows:
        if row.name in GEOMETRY_PARAMETERS:
            if b_nom is None:
                b_nom = model.first_harmonic()
            d = []
            for delta in (row.plus, -row.minus):
                if delta == 0:
                    d.append(0.0)
                    continue
                b = model.perturbed(row.name, delta, row.lever_transfer).first_harmonic()
                d.append(f_nominal * (b_nom / b - 1.0))
        elif row.name == "alpha":
            d = [f_nominal * (row.value / (row.value + row.plus) - 1.0),
                 f_nominal * (row.value / (row.value - row.minus) - 1.0)]
        elif row.name == "phase":
            if quadrature is None or math.isnan(quadrature):
                raise ConfigError("phase row needs the quadrature lock-in estimate")
            d = [f_nominal * (math.cos(row.plus) - 1.0) + quadrature * math.sin(row.plus),
                 f_nominal * (math.cos(row.minus) - 1.0) - quadrature * math.sin(row.minus)]
        else:
            raise ConfigError(f"unknown systematics parameter {row.name!r}")
        results.append(SystematicResult(row, float(d[0]), float(d[1])))
    total = math.sqrt(math.fsum(r.magnitude ** 2 for r in results))
    return SystematicsReport(float(f_nominal), results, total)


# --------------------------------------------------------------- constraints

@dataclass(frozen=True)
class ConstraintCurve:
    lams: np.ndarray
    bounds: np.ndarray
    kernel: str
    b1: np.ndarray
    field_bound: float
    policy: str = DEFAULT_CL_POLICY

    def bound_at(self, lam):
        """Log-log interpolation of the bound."""
        return float(np.exp(np.interp(np.log(lam), np.log(self.lams), np.log(self.bounds))))

    def to_rows(self):
        return np.column_stack([self.lams, self.bounds])


def lambda_grid(lam_min=0.03, lam_max=100.0, per_decade=60):
    n = int(round(per_decade * math.log10(lam_max / lam_min))) + 1
    return np.logspace(math.log10(lam_min), math.log10(lam_max), n)


def constraint_curve(estimate: CouplingEstimate, lams, model: FieldModel,
                     policy=DEFAULT_CL_POLICY) -> ConstraintCurve:
    """Bound on the coupling versus force range.

    The excluded field amplitude ``(|mean| + k sigma_total) B1(lam_ref)``
    is fixed by the measurement; the coupling bound at each range is that
    amplitude divided by ``B1(lam)`` for unit coupling.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise ConfigError("force ranges must be positive")
    if policy not in CL_POLICIES:
        raise ConfigError(f"unknown confidence-level policy {policy!r}")
    all_lams = np.concatenate([[model.lam_ref], lams])
    b1 = model.first_harmonic(all_lams)
    field_bound = (abs(estimate.mean) + CL_POLICIES[policy] * estimate.sigma_total) * b1[0]
    return ConstraintCurve(lams, field_bound / b1[1:], model.kernel, b1[1:], float(field_bound),
                           policy)


# ---------------------------------------------------------- coupling algebra

def _hbar_c(hbar_c):
    return DEFAULT_CONSTANTS.hbar * DEFAULT_CONSTANTS.c if hbar_c is None else hbar_c


def f45_from_couplings(gA_gA, gV_gV, hbar_c=None):
    hc = _hbar_c(hbar_c)
    return -0.5 * gA_gA / hc - 1.5 * gV_gV / hc


def f1213_from_couplings(gA_gV, hbar_c=None):
    return 4.0 * gA_gV / _hbar_c(hbar_c)


def axial_product_from_f45(f45, gV_gV, hbar_c=None):
    """g_A g_A given f45 and an assumed g_V g_V."""
    hc = _hbar_c(hbar_c)
    return -2.0 * (f45 + 1.5 * gV_gV / hc) * hc


def vector_product_from_f45(f45, gA_gA, hbar_c=None):
    """g_V g_V given f45 and an assumed g_A g_A."""
    hc = _hbar_c(hbar_c)
    return -(2.0 / 3.0) * (f45 + 0.5 * gA_gA / hc) * hc


def mixed_product_from_f1213(f1213, hbar_c=None):
    return 0.25 * f1213 * _hbar_c(hbar_c)


@dataclass(frozen=True)
class CouplingProducts:
    f45: float
    f1213: float
    gA_gA: float
    gV_gV: float
    gA_gV: float


def coupling_products(f45=None, f1213=None, gA_gA=None, gV_gV=None, hbar_c=None) -> CouplingProducts:
    """Close the two linear relations between couplings and g-products.

    The f45 relation has two unknown products: give one of ``gA_gA`` /
    ``gV_gV`` (default ``gV_gV = 0``) and the other is solved for.  Any f
    left as None is computed forward from the products instead.
    """
    if f45 is not None:
        if gA_gA is None:
            gV_gV = 0.0 if gV_gV is None else gV_gV
            gA_gA = axial_product_from_f45(f45, gV_gV, hbar_c)
        elif gV_gV is None:
            gV_gV = vector_product_from_f45(f45, gA_gA, hbar_c)
    else:
        gA_gA = 0.0 if gA_gA is None else gA_gA
        gV_gV = 0.0 if gV_gV is None else gV_gV
        f45 = f45_from_couplings(gA_gA, gV_gV, hbar_c)
    f1213 = 0.0 if f1213 is None else f1213
    return CouplingProducts(float(f45), float(f1213), float(gA_gA), float(gV_gV),
                            float(mixed_product_from_f1213(f1213, hbar_c)))
