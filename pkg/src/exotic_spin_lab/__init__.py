"""Simulation and analysis toolkit for a rotating-source search for exotic
spin- and velocity-dependent interactions read out by a 129Xe spin amplifier."""

__version__ = "0.1.0"

from .amplifier import (AmplifierParams, BlochTrajectory, HarmonicDrive, SteadyState,
                        amplification_factor, amplifier_response, effective_field,
                        fit_lineshape, integrate_bloch, integrate_bloch_batch, larmor_frequency,
                        lineshape, steady_state_xe)
from .config import RunConfig, default_config, parse_config
from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import (AcceptanceError, ConfigError, ConvergenceError, ExoticSpinLabError,
                     FitError, InvalidResolutionError, LeakageError, SingularDistanceError)
from .fields import (V45, V1213, FieldTimeSeries, HarmonicSpectrum, field_timeseries,
                     first_harmonic_vs_lambda, harmonic_amplitudes, integrate_field, kernel,
                     kernel_v45, kernel_v1213, rod_field_spectrum)
from .geometry import (CCW, CW, RotationSpec, SourceSpec, VoxelCloud, build_voxel_cloud,
                       kinematics, pose_at)
from .pipeline import (CalibrationSet, ConstraintCurve, CouplingEstimate, FieldModel,
                       SignalTrace, SystematicRow, combine_directions, constraint_curve,
                       coupling_products, fit_gaussian, lockin_estimate, propagate_systematics,
                       synthesize_signal)
