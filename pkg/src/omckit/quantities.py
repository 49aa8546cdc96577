"""Frequency/power value types and the physical constants used across the package.

Every rate is stored internally as an angular frequency in rad/s. Conversion to
ordinary frequency (divide by 2*pi) happens only at input/output boundaries.
"""
from __future__ import annotations

import math

HBAR = 1.054571817e-34  # J s
C_LIGHT = 299792458.0  # m/s
TWO_PI = 2.0 * math.pi


class PhysicalConstants:
    hbar = HBAR
    c = C_LIGHT


class AngularFrequency(float):
    """Angular frequency in rad/s. Behaves as a float; ``.hz`` gives value / 2pi."""

    __slots__ = ()

    @classmethod
    def from_hz(cls, f: float) -> "AngularFrequency":
        return cls(float(f) * TWO_PI)

    @property
    def value(self) -> float:
        return float(self)

    @property
    def hz(self) -> float:
        return float(self) / TWO_PI

    def __repr__(self) -> str:
        return f"AngularFrequency(2pi*{self.hz:.6g} Hz)"


class Power(float):
    """Optical power in watts."""

    __slots__ = ()

    def __new__(cls, value: float):
        if not value >= 0:
            raise ValueError(f"power must be non-negative, got {value!r}")
        return super().__new__(cls, value)

    @property
    def value(self) -> float:
        return float(self)

    @property
    def dbm(self) -> float:
        return watts_to_dbm(self)


def wavelength_to_angular(wavelength_nm: float) -> AngularFrequency:
    """Vacuum wavelength in nm to angular frequency 2*pi*c/lambda."""
    if not wavelength_nm > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm!r} nm")
    return AngularFrequency(TWO_PI * C_LIGHT / (wavelength_nm * 1e-9))


def angular_to_wavelength(omega: float) -> float:
    """Angular frequency to vacuum wavelength in nm."""
    if not omega > 0:
        raise ValueError(f"angular frequency must be positive, got {omega!r}")
    return TWO_PI * C_LIGHT / omega * 1e9


def dbm_to_watts(p_dbm: float) -> Power:
    if not math.isfinite(p_dbm):
        raise ValueError(f"dBm value must be finite, got {p_dbm!r}")
    return Power(1e-3 * 10.0 ** (p_dbm / 10.0))


def watts_to_dbm(p_w: float) -> float:
    if p_w < 0:
        raise ValueError("power must be non-negative")
    if p_w == 0:
        return -math.inf
    return 10.0 * math.log10(p_w / 1e-3)
