"""Reference geometry and amplifier settings of the rotating-BGO experiment.

Lengths in meters, masses in kilograms.  The lab origin is the vapor-cell
center; the source rotates in the xz plane about an axis along y.
"""
from __future__ import annotations

from .geometry import RotationSpec, SourceSpec

PIVOT = (6.0e-3, 3.4e-3, 583.2e-3)
ROTATION_NORMAL = (0.0, 1.0, 0.0)
ROTATION_FREQUENCY = 4.997

BGO_EDGE = 25.0e-3
BGO_MASS = 112.34e-3
BGO_NUCLEONS = 6.71e25

ROD_LENGTH = 487.6e-3
ROD_WIDTH = 30.5e-3
ROD_THICKNESS = 15.2e-3
ROD_MASS = 610.34e-3
ROD_NUCLEONS = 3.64e26

# Radial distance of the BGO center from the pivot.  Not stated directly;
# the crystal sits in a box at the rod end, and 221.0 mm (22.8 mm inside
# the rod tip) reproduces the simulated harmonic ratios of both potentials.
BGO_LEVER_ARM = 221.0e-3

BGO_RESOLUTION = 2.5e-3
ROD_RESOLUTION = 7.6e-3
LAMBDA_REF = 1.0

# amplifier calibration targets
BIAS_FIELD = 423e-9
ETA = 116.0
FWHM = 13e-3
KAPPA0 = 540.0
XE_POLARIZATION = 0.30

# readout calibration
ALPHA_V_PER_NT = 6.36
PHASE_DELAY_DEG = 68.0
NOISE_ASD = 22e-15

# reference coupling estimates at lambda = 1 m: (mean, stat, syst)
F45_REFERENCE = (2.79e-19, 0.96e-19, 0.50e-19)
F1213_REFERENCE = (1.64e-34, 0.57e-34, 0.27e-34)


def bgo_source(lever_arm=BGO_LEVER_ARM, mass=BGO_MASS, nucleons=BGO_NUCLEONS, edge=BGO_EDGE):
    """BGO cube; at zero rotation angle it sits between the pivot and the cell."""
    return SourceSpec((edge, edge, edge), (0.0, 0.0, -lever_arm), mass, nucleons, "bgo")


def rod_source(length=ROD_LENGTH, offset=0.0):
    """Aluminum rod, long axis along body z, centered on the pivot unless offset."""
    return SourceSpec((ROD_WIDTH, ROD_THICKNESS, length), (0.0, 0.0, offset),
                      ROD_MASS, ROD_NUCLEONS, "rod")


def default_rotation(direction="CW", frequency=ROTATION_FREQUENCY, pivot=PIVOT, phase0=0.0):
    return RotationSpec(pivot, ROTATION_NORMAL, frequency, direction, phase0)
