"""Forward-model datasets matched to the published Device A parameters.

The measured traces are not public, so every reproduction check runs on data
generated here from the fit models themselves.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .fitting import FANO, LORENTZIAN, RABI, STRETCHED_EXP, Spectrum
from .metrics import DEVICES, Sideband, backaction_linewidth
from .quantities import C_LIGHT, TWO_PI, AngularFrequency

DEVICE_A = DEVICES["A"]

FANO_Q = 0.3
# Device A on-resonance dip: R_min / R_off = (1 - 2 kappa_e / kappa)^2
FANO_DEPTH = 1.0 - (1.0 - 2.0 * DEVICE_A.kappa_e / DEVICE_A.kappa) ** 2
G0_HZ = 216e3
GAMMA_I_HZ = 28e3
T2_S = 227e-6
STRETCH_N = 1.44
RABI_CONTRAST = 0.312
RABI_HZ = 10e6
RABI_DECAY = 1.0 / 1.5e-6
QM_160MK = 1.31e6


def fano_params(dev=DEVICE_A, q=FANO_Q):
    kappa = float(dev.kappa)
    return np.array([1.0, FANO_DEPTH * kappa / 2.0, q, kappa, float(dev.omega_o)])


def optical_spectrum(rng=None, noise=0.0, n=500, span=5.0, offset=0.0, dev=DEVICE_A, q=FANO_Q) -> Spectrum:
    """Reflection versus angular laser frequency; span and offset in units of kappa."""
    p = fano_params(dev, q)
    x = p[4] + p[3] * np.linspace(offset - span, offset + span, n)
    y = FANO(x, p)
    if noise:
        y = y + noise * p[0] * rng.standard_normal(n)
    return Spectrum(x, y)


def lorentzian_params(gamma_hz=DEVICE_A.gamma_m.hz, omega_m_hz=DEVICE_A.omega_m.hz):
    return np.array([1.0, 20.0, TWO_PI * omega_m_hz, TWO_PI * gamma_hz])


def mechanical_spectrum(rng=None, noise=0.0, n=400, span=15.0, gamma_hz=DEVICE_A.gamma_m.hz) -> Spectrum:
    p = lorentzian_params(gamma_hz)
    x = p[2] + p[3] * np.linspace(-span, span, n)
    y = LORENTZIAN(x, p)
    if noise:
        y = y + noise * p[1] * rng.standard_normal(n)
    return Spectrum(x, y)


def echo_params():
    return np.array([1.0, T2_S, STRETCH_N, 0.02])


def echo_decay(rng=None, noise=0.0, n=60) -> Spectrum:
    p = echo_params()
    t = np.linspace(5e-6, 700e-6, n)
    y = STRETCHED_EXP(t, p)
    if noise:
        y = y + noise * p[0] * rng.standard_normal(n)
    return Spectrum(t, y)


def rabi_params():
    return np.array([1.0, RABI_CONTRAST, TWO_PI * RABI_HZ, RABI_DECAY])


def rabi_trace(rng=None, noise=0.0, n=201) -> Spectrum:
    p = rabi_params()
    t = np.linspace(0.0, 400e-9, n)
    y = RABI(t, p)
    if noise:
        y = y + noise * p[0] * rng.standard_normal(n)
    return Spectrum(t, y)


def backaction_points(rng=None, noise=0.0, g0_hz=G0_HZ, gamma_i_hz=GAMMA_I_HZ, dev=DEVICE_A,
                      red_nc=None, blue_nc=None):
    """(nc, gamma_m [rad/s], side[, sigma]) rows following the sideband damping law.

    With noise, each linewidth gets a relative Gaussian error and its standard
    deviation is returned as the fourth element.
    """
    red_nc = np.geomspace(100, 41000, 8) if red_nc is None else red_nc
    blue_nc = np.linspace(50, 600, 6) if blue_nc is None else blue_nc
    g0, gi = TWO_PI * g0_hz, TWO_PI * gamma_i_hz
    rows = []
    for side, ncs in ((Sideband.RED, red_nc), (Sideband.BLUE, blue_nc)):
        for nc in ncs:
            g = float(backaction_linewidth(gi, g0, nc, dev.kappa, dev.omega_m, side))
            if noise:
                # relative linewidth error, reported with each point
                rows.append((float(nc), g * (1.0 + noise * rng.standard_normal()), side, noise * g))
            else:
                rows.append((float(nc), g, side))
    return rows


# ---------------------------------------------------------------- CSV writers

def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.15g}" if isinstance(v, float) else v for v in r])


def write_optical_csv(path, spec: Spectrum):
    lam = TWO_PI * C_LIGHT / spec.x * 1e9
    order = np.argsort(lam)
    _write(path, ["wavelength_nm", "reflection"], zip(lam[order], spec.y[order]))


def write_mechanical_csv(path, spec: Spectrum):
    _write(path, ["frequency_hz", "psd"], zip(spec.x / TWO_PI, spec.y))


def write_time_csv(path, spec: Spectrum):
    _write(path, ["time_s", "signal"], zip(spec.x, spec.y))


def write_backaction_csv(path, rows):
    if rows and all(len(r) > 3 for r in rows):
        _write(path, ["nc", "gamma_m_hz", "side", "sigma_hz"],
               [(nc, g / TWO_PI, s.value, sig / TWO_PI) for nc, g, s, sig in rows])
    else:
        _write(path, ["nc", "gamma_m_hz", "side"], [(nc, g / TWO_PI, s.value) for nc, g, s, *_ in rows])


KINDS = ("optical", "optical-offscan", "mechanical", "mechanical-160mk", "backaction",
         "backaction-one-side", "echo", "rabi")


def write_kind(kind: str, path, seed: int = 0, noise: float = 0.01):
    rng = np.random.default_rng(seed)
    if kind == "optical":
        write_optical_csv(path, optical_spectrum(rng, noise))
    elif kind == "optical-offscan":
        write_optical_csv(path, optical_spectrum(rng, noise, offset=12.0))
    elif kind == "mechanical":
        write_mechanical_csv(path, mechanical_spectrum(rng, noise))
    elif kind == "mechanical-160mk":
        write_mechanical_csv(path, mechanical_spectrum(rng, noise, gamma_hz=DEVICE_A.omega_m.hz / QM_160MK))
    elif kind == "backaction":
        write_backaction_csv(path, backaction_points(rng, noise))
    elif kind == "backaction-one-side":
        write_backaction_csv(path, backaction_points(rng, 0.0, red_nc=np.array([1000.0, 30000.0]),
                                                     blue_nc=np.array([])))
    elif kind == "echo":
        write_time_csv(path, echo_decay(rng, noise))
    elif kind == "rabi":
        write_time_csv(path, rabi_trace(rng, noise))
    else:
        raise ValueError(f"unknown synthetic dataset {kind!r}; choose from {', '.join(KINDS)} or corpus")


def write_corpus(directory, seed: int = 0, noise: float = 0.01) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind in KINDS:
        p = d / f"{kind}.csv"
        write_kind(kind, p, seed, noise)
        paths.append(p)
    return paths
