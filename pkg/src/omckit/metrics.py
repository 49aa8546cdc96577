"""Closed-form optomechanical figures of merit.

All rates are angular frequencies (rad/s). Functions are pure and accept plain
floats; :class:`~omckit.quantities.AngularFrequency` values work anywhere a
float does.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .quantities import HBAR, TWO_PI, AngularFrequency, wavelength_to_angular


class ParametricInstabilityError(ValueError):
    """Blue-sideband drive pushed the total mechanical linewidth to zero or below."""


class Sideband(enum.Enum):
    RED = "red"
    BLUE = "blue"

    @property
    def detuning_sign(self) -> int:
        # red: laser at omega_o - omega_m
        return -1 if self is Sideband.RED else 1

    def detuning(self, omega_m: float) -> AngularFrequency:
        return AngularFrequency(self.detuning_sign * omega_m)

    @classmethod
    def parse(cls, s: "str | Sideband") -> "Sideband":
        if isinstance(s, Sideband):
            return s
        try:
            return cls(s.strip().lower())
        except ValueError:
            raise ValueError(f"sideband must be 'red' or 'blue', got {s!r}") from None


@dataclass(frozen=True)
class DeviceRecord:
    label: str
    lambda_o: float  # nm
    kappa: AngularFrequency
    kappa_e: AngularFrequency
    omega_m: AngularFrequency
    gamma_m: AngularFrequency

    def __post_init__(self):
        if not self.lambda_o > 0:
            raise ValueError(f"{self.label}: lambda_o must be positive")
        if not 0 < self.kappa_e <= self.kappa:
            raise ValueError(f"{self.label}: need 0 < kappa_e <= kappa")
        if not (self.omega_m > 0 and self.gamma_m > 0):
            raise ValueError(f"{self.label}: omega_m and gamma_m must be positive")

    @classmethod
    def from_hz(cls, label, lambda_o_nm, kappa_hz, kappa_e_hz, omega_m_hz, gamma_m_hz):
        af = AngularFrequency.from_hz
        return cls(label, float(lambda_o_nm), af(kappa_hz), af(kappa_e_hz),
                   af(omega_m_hz), af(gamma_m_hz))

    @property
    def omega_o(self) -> AngularFrequency:
        return wavelength_to_angular(self.lambda_o)


# Measured parameters of the five devices on the characterized chip.
DEVICES = {
    "A": DeviceRecord.from_hz("A", 1576.87, 5.03e9, 2.99e9, 6.23e9, 3.28e3),
    "B": DeviceRecord.from_hz("B", 1573.28, 4.29e9, 0.55e9, 6.24e9, 37.3e3),
    "C": DeviceRecord.from_hz("C", 1569.44, 4.57e9, 0.58e9, 6.22e9, 42.8e3),
    "D": DeviceRecord.from_hz("D", 1567.05, 2.15e9, 0.41e9, 6.22e9, 11.6e3),
    "E": DeviceRecord.from_hz("E", 1566.77, 5.30e9, 1.59e9, 6.18e9, 3.79e3),
}


@dataclass(frozen=True)
class PumpCondition:
    p_in: float  # W, in the fiber toward the device
    eta_f: float
    omega_L: AngularFrequency
    detuning: AngularFrequency  # omega_L - omega_o, signed

    def __post_init__(self):
        if not self.p_in >= 0:
            raise ValueError("p_in must be non-negative")
        if not 0 <= self.eta_f <= 1:
            raise ValueError(f"eta_f must lie in [0, 1], got {self.eta_f}")
        if not self.omega_L > 0:
            raise ValueError("laser frequency must be positive")

    @classmethod
    def on_sideband(cls, dev: DeviceRecord, side: Sideband, p_in: float, eta_f: float):
        delta = side.detuning(dev.omega_m)
        return cls(p_in, eta_f, AngularFrequency(dev.omega_o + delta), delta)


@dataclass(frozen=True)
class SpinMechanicalInputs:
    g_sm: AngularFrequency
    gamma_s: AngularFrequency
    gamma_m: AngularFrequency

    def __post_init__(self):
        if self.g_sm < 0 or not (self.gamma_s > 0 and self.gamma_m > 0):
            raise ValueError("spin-mechanical rates must be positive")


SPIN_RATE_CONVENTIONS = {
    "inverse": lambda t2: 1.0 / t2,
    "double": lambda t2: 2.0 / t2,
    "lorentzian_fwhm": lambda t2: 1.0 / (math.pi * t2),
}


def spin_decay_rate(t2: float, convention: str = "inverse") -> AngularFrequency:
    """Spin decay rate from a coherence time.

    The mapping T2 -> gamma_s is a convention choice: ``inverse`` (1/T2),
    ``double`` (2/T2) or ``lorentzian_fwhm`` (1/(pi T2)).
    """
    if not t2 > 0:
        raise ValueError("T2 must be positive")
    try:
        return AngularFrequency(SPIN_RATE_CONVENTIONS[convention](t2))
    except KeyError:
        raise ValueError(f"unknown spin-rate convention {convention!r}; "
                         f"choose from {sorted(SPIN_RATE_CONVENTIONS)}") from None


def intracavity_photons(dev: DeviceRecord, pump: PumpCondition) -> float:
    lorentz = dev.kappa_e / (pump.detuning ** 2 + dev.kappa ** 2 / 4.0)
    flux = pump.p_in * pump.eta_f / (HBAR * pump.omega_L)
    return lorentz * flux


def sideband_resolution(omega_m: float, kappa: float) -> float:
    return 4.0 * omega_m / kappa


def sideband_factor(omega_m: float, kappa: float) -> float:
    r2 = sideband_resolution(omega_m, kappa) ** 2
    return r2 / (1.0 + r2)


def backaction_rate_per_photon(g0: float, kappa: float, omega_m: float) -> float:
    """Linewidth change per intracavity photon, (4 g0^2 / kappa) * sideband factor."""
    return 4.0 * g0 ** 2 / kappa * sideband_factor(omega_m, kappa)


def backaction_linewidth(gamma_i, g0, nc, kappa, omega_m, side: Sideband) -> AngularFrequency:
    """Total mechanical linewidth under red (cooling) or blue (amplifying) drive."""
    if not gamma_i > 0:
        raise ValueError("gamma_i must be positive")
    if nc < 0:
        raise ValueError("nc must be non-negative")
    side = Sideband.parse(side)
    shift = backaction_rate_per_photon(g0, kappa, omega_m) * nc
    gamma = gamma_i + shift if side is Sideband.RED else gamma_i - shift
    if gamma <= 0:
        raise ParametricInstabilityError(
            f"parametric instability threshold exceeded: nc={nc:g} drives the "
            f"blue-sideband linewidth to {gamma / TWO_PI:.4g} Hz")
    return AngularFrequency(gamma)


def cooperativity(g0: float, nc: float, kappa: float, gamma_m: float) -> float:
    return 4.0 * g0 ** 2 * nc / (kappa * gamma_m)


def quality_factor(omega: float, linewidth: float) -> float:
    return omega / linewidth


def qf_product(q_m: float, omega_m: float) -> float:
    """Q times ordinary frequency, in Hz."""
    return q_m * omega_m / TWO_PI


def spin_mech_cooperativity(inp: SpinMechanicalInputs) -> float:
    return 4.0 * inp.g_sm ** 2 / (inp.gamma_m * inp.gamma_s)


def zero_point_motion(m_eff: float, omega_m: float) -> float:
    if not (m_eff > 0 and omega_m > 0):
        raise ValueError("m_eff and omega_m must be positive")
    return math.sqrt(HBAR / (2.0 * m_eff * omega_m))
