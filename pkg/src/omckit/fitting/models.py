"""Line shapes and their analytic Jacobians."""
from __future__ import annotations

import numpy as np

from ..metrics import Sideband, sideband_factor
from .engine import Model


def fano_reflection(delta, y0, a0, q, kappa):
    """Fano reflection dip versus laser detuning delta = omega_L - omega_o."""
    num = (1.0 - q ** 2) * kappa / 2.0 - q * delta
    return y0 - a0 * num / (kappa ** 2 / 4.0 + delta ** 2)


def _fano(x, p):
    y0, a0, q, kappa, omega_o = p
    return fano_reflection(x - omega_o, y0, a0, q, kappa)


def _fano_jac(x, p):
    y0, a0, q, kappa, omega_o = p
    d = x - omega_o
    den = kappa ** 2 / 4.0 + d ** 2
    num = (1.0 - q ** 2) * kappa / 2.0 - q * d
    j = np.empty((x.size, 5))
    j[:, 0] = 1.0
    j[:, 1] = -num / den
    j[:, 2] = a0 * (q * kappa + d) / den
    j[:, 3] = -a0 * ((1.0 - q ** 2) / 2.0 * den - num * kappa / 2.0) / den ** 2
    # dR/d(omega_o) = -dR/d(delta)
    j[:, 4] = a0 * (-q * den - num * 2.0 * d) / den ** 2
    return j


FANO = Model("fano", ("y0", "a0", "q", "kappa", "omega_o"), _fano, _fano_jac)


def lorentzian(x, offset, amplitude, center, fwhm):
    hw2 = (fwhm / 2.0) ** 2
    return offset + amplitude * hw2 / ((x - center) ** 2 + hw2)


def _lor(x, p):
    return lorentzian(x, *p)


def _lor_jac(x, p):
    offset, amplitude, center, fwhm = p
    hw = fwhm / 2.0
    d = x - center
    den = d ** 2 + hw ** 2
    shape = hw ** 2 / den
    j = np.empty((x.size, 4))
    j[:, 0] = 1.0
    j[:, 1] = shape
    j[:, 2] = amplitude * hw ** 2 * 2.0 * d / den ** 2
    j[:, 3] = amplitude * hw * d ** 2 / den ** 2
    return j


LORENTZIAN = Model("lorentzian", ("offset", "amplitude", "omega_m", "gamma_m"), _lor, _lor_jac)


def stretched_exponential(t, amplitude, t2, n, baseline):
    return amplitude * np.exp(-((t / t2) ** n)) + baseline


def _sexp(x, p):
    return stretched_exponential(x, *p)


def _sexp_jac(x, p):
    amplitude, t2, n, baseline = p
    r = x / t2
    u = r ** n
    e = np.exp(-u)
    j = np.empty((x.size, 4))
    j[:, 0] = e
    j[:, 1] = amplitude * e * u * n / t2
    j[:, 2] = -amplitude * e * u * np.log(r)
    j[:, 3] = 1.0
    return j


STRETCHED_EXP = Model("stretched_exponential", ("amplitude", "t2", "stretch_n", "baseline"), _sexp, _sexp_jac)


def rabi_signal(tau, pl0, contrast, rabi_frequency, decay):
    """Photoluminescence under a drive of duration tau; decays to the mixed-state level."""
    return pl0 * (1.0 - contrast / 2.0 * (1.0 - np.cos(rabi_frequency * tau) * np.exp(-tau * decay)))


def _rabi(x, p):
    return rabi_signal(x, *p)


def _rabi_jac(x, p):
    pl0, c, om, dec = p
    e = np.exp(-x * dec)
    cs = np.cos(om * x)
    sn = np.sin(om * x)
    j = np.empty((x.size, 4))
    j[:, 0] = 1.0 - c / 2.0 * (1.0 - cs * e)
    j[:, 1] = -pl0 / 2.0 * (1.0 - cs * e)
    j[:, 2] = -pl0 * c / 2.0 * sn * x * e
    j[:, 3] = -pl0 * c / 2.0 * x * cs * e
    return j


RABI = Model("rabi", ("pl0", "contrast", "rabi_frequency", "decay"), _rabi, _rabi_jac)


def backaction_model(kappa: float, omega_m: float, side: Sideband) -> Model:
    """Total linewidth versus photon number for one sideband, params (gamma_i, g0)."""
    sign = 1.0 if Sideband.parse(side) is Sideband.RED else -1.0
    k = 4.0 / kappa * sideband_factor(omega_m, kappa)

    def f(x, p):
        gamma_i, g0 = p
        return gamma_i + sign * k * g0 ** 2 * x

    def jac(x, p):
        _, g0 = p
        return np.column_stack([np.ones_like(x), sign * k * 2.0 * g0 * x])

    return Model(f"backaction_{Sideband.parse(side).value}", ("gamma_i", "g0"), f, jac)
