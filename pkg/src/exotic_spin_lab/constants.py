"""Physical constants used by the field kernels and the amplifier model."""
from __future__ import annotations

from dataclasses import dataclass, replace
import math

from scipy import constants as _sc

# 129Xe gyromagnetic ratio / 2pi, Hz/T (magnitude)
GAMMA_XE_REFERENCE_HZ_PER_T = 11.777e6
# the bias/frequency pair 423 nT <-> 4.997 Hz implies this value
GAMMA_XE_FROM_BIAS_PAIR_HZ_PER_T = 4.997 / 423e-9

# 87Rb electron: free-electron value, slowing-down factor applied separately
GAMMA_E_RAD_PER_S_PER_T = _sc.physical_constants["electron gyromag. ratio"][0]


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants. ``mu_xe`` is derived from the gyromagnetic ratio (spin 1/2)."""

    hbar: float = _sc.hbar
    c: float = _sc.c
    neutron_mass: float = _sc.m_n
    gamma_n: float = 2.0 * math.pi * GAMMA_XE_REFERENCE_HZ_PER_T

    @property
    def mu_xe(self) -> float:
        return self.gamma_n * self.hbar / 2.0

    @classmethod
    def with_gamma_option(cls, option: str = "reference") -> "PhysicalConstants":
        """``"reference"`` uses 11.777 Hz/uT, ``"bias-pair"`` uses 4.997 Hz / 423 nT."""
        if option == "reference":
            return cls()
        if option == "bias-pair":
            return cls(gamma_n=2.0 * math.pi * GAMMA_XE_FROM_BIAS_PAIR_HZ_PER_T)
        raise ValueError(f"unknown gamma option {option!r}")

    def with_gamma_hz_per_t(self, gamma_over_2pi: float) -> "PhysicalConstants":
        return replace(self, gamma_n=2.0 * math.pi * gamma_over_2pi)


DEFAULT_CONSTANTS = PhysicalConstants()
