"""Data-driven starting points and typed results for each measurement fit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lombscargle

from ..metrics import Sideband, sideband_factor
from ..quantities import TWO_PI, AngularFrequency, angular_to_wavelength
from .engine import FitError, SingularJacobianError, Spectrum, solve_least_squares
from .models import FANO, LORENTZIAN, RABI, STRETCHED_EXP


class ResonanceNotCapturedError(FitError):
    pass


class NoOscillationError(FitError):
    pass


# periodogram peak must exceed this multiple of the median power
OSCILLATION_SNR = 30.0
DIP_SNR = 8.0


def _edge_level(y: np.ndarray) -> float:
    k = max(2, y.size // 10)
    return float(np.median(np.concatenate([y[:k], y[-k:]])))


def _half_width(x, y, i_ext, level, below: bool) -> float:
    """Width of the contiguous region around i_ext on the extremum side of ``level``."""
    inside = y < level if below else y > level
    lo = i_ext
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    hi = i_ext
    while hi < y.size - 1 and inside[hi + 1]:
        hi += 1
    spacing = float(np.median(np.diff(x)))
    return max(float(x[hi] - x[lo]), 2.0 * spacing)


@dataclass
class FanoFitResult:
    y0: float
    a0: float
    q: float
    kappa: AngularFrequency
    omega_o: AngularFrequency
    uncertainties: dict[str, float]
    residual_norm: float

    @property
    def q_o(self) -> float:
        return self.omega_o / self.kappa

    @property
    def q_o_uncertainty(self) -> float:
        u = self.uncertainties
        return self.q_o * math.hypot(u["omega_o"] / self.omega_o, u["kappa"] / self.kappa)

    @property
    def lambda_o_nm(self) -> float:
        return angular_to_wavelength(self.omega_o)

    def params(self) -> dict[str, float]:
        return {"y0": self.y0, "a0": self.a0, "q": self.q,
                "kappa": float(self.kappa), "omega_o": float(self.omega_o)}


def kappa_e_from_contrast(kappa: float, r_min: float, r_off: float, branch: str = "under") -> AngularFrequency:
    """External coupling from the dip contrast of a symmetric (q = 0) dip.

    R_min / R_off = (1 - 2 kappa_e / kappa)^2 has two roots: the undercoupled
    branch kappa_e < kappa / 2 and the overcoupled branch kappa_e > kappa / 2.
    A reflection scan alone cannot tell them apart. For q != 0 either value is
    only an estimate.
    """
    if not (r_off > 0 and 0 <= r_min <= r_off):
        raise ValueError("need 0 <= R_min <= R_off with R_off > 0")
    if branch not in ("under", "over"):
        raise ValueError("branch must be 'under' or 'over'")
    root = math.sqrt(r_min / r_off)
    return AngularFrequency(kappa / 2.0 * (1.0 - root if branch == "under" else 1.0 + root))


def _noise_level(y) -> float:
    """Robust white-noise estimate from second differences."""
    d2 = np.diff(y, 2)
    return 1.4826 * float(np.median(np.abs(d2 - np.median(d2)))) / math.sqrt(6.0)


def fano_initial_guess(spec: Spectrum):
    x, y = spec.x, spec.y
    y0 = _edge_level(y)
    i = int(np.argmin(y))
    depth = y0 - float(y[i])
    if np.ptp(y) > 0 and (i == 0 or i == y.size - 1):
        raise ResonanceNotCapturedError("resonance not captured: reflection minimum lies at the scan boundary")
    if np.ptp(y) > 0 and depth <= DIP_SNR * _noise_level(y):
        raise ResonanceNotCapturedError(
            f"resonance not captured: no dip above {DIP_SNR:g} times the noise level in the scan")
    kappa = _half_width(x, y, i, y0 - depth / 2.0, below=True)
    a0 = depth * kappa / 2.0
    return np.array([y0, a0, 0.0, kappa, x[i]])


def fit_fano(spectrum: Spectrum, fixed_q: float | None = None) -> FanoFitResult:
    """Fit reflection versus laser angular frequency with the Fano dip model."""
    p0 = fano_initial_guess(spectrum)
    fixed = {"q": fixed_q} if fixed_q is not None else None
    y_scale = max(abs(p0[0]), float(np.ptp(spectrum.y)), 1e-300)
    kappa0 = p0[3]
    sol = solve_least_squares(
        FANO, spectrum, p0,
        bounds={"kappa": (0.0, np.inf)},
        fixed=fixed,
        scale={"y0": y_scale, "a0": y_scale * kappa0, "q": 1.0, "kappa": kappa0, "omega_o": kappa0},
    )
    p = sol.as_dict()
    x = spectrum.x
    if not (x[0] < p["omega_o"] < x[-1]) or p["kappa"] < 2.0 * (x[-1] - x[0]) / (x.size - 1):
        raise ResonanceNotCapturedError(
            "resonance not captured: fitted dip is outside the scan or narrower than two samples")
    return FanoFitResult(
        y0=p["y0"], a0=p["a0"], q=p["q"],
        kappa=AngularFrequency(p["kappa"]), omega_o=AngularFrequency(p["omega_o"]),
        uncertainties=sol.errors(), residual_norm=sol.residual_norm,
    )


@dataclass
class LorentzianFitResult:
    omega_m: AngularFrequency
    gamma_m: AngularFrequency
    amplitude: float
    offset: float
    uncertainties: dict[str, float]
    residual_norm: float
    warnings: list[str] = field(default_factory=list)

    @property
    def q_m(self) -> float:
        return self.omega_m / self.gamma_m

    @property
    def q_m_uncertainty(self) -> float:
        u = self.uncertainties
        return self.q_m * math.hypot(u["omega_m"] / self.omega_m, u["gamma_m"] / self.gamma_m)

    def params(self) -> dict[str, float]:
        return {"offset": self.offset, "amplitude": self.amplitude,
                "omega_m": float(self.omega_m), "gamma_m": float(self.gamma_m)}


def fit_lorentzian_psd(spectrum: Spectrum) -> LorentzianFitResult:
    """Fit a Lorentzian peak (FWHM linewidth) on a constant background."""
    x, y = spectrum.x, spectrum.y
    offset = _edge_level(y)
    i = int(np.argmax(y))
    height = float(y[i]) - offset
    if np.ptp(y) > 0 and (i == 0 or i == y.size - 1):
        raise ResonanceNotCapturedError("peak lies at the scan boundary")
    fwhm = _half_width(x, y, i, offset + height / 2.0, below=False)
    p0 = np.array([offset, height, x[i], fwhm])
    y_scale = max(abs(offset), float(np.ptp(y)), 1e-300)
    sol = solve_least_squares(
        LORENTZIAN, spectrum, p0,
        bounds={"gamma_m": (0.0, np.inf)},
        scale={"offset": y_scale, "amplitude": y_scale, "omega_m": fwhm, "gamma_m": fwhm},
    )
    p = sol.as_dict()
    warnings = []
    spacing = float(np.median(np.diff(x)))
    if p["gamma_m"] < 2.0 * spacing:
        warnings.append(f"under-resolved: linewidth {p['gamma_m']:.4g} is below two point spacings ({spacing:.4g})")
    if not x[0] <= p["omega_m"] <= x[-1]:
        raise ResonanceNotCapturedError("fitted center lies outside the scan")
    return LorentzianFitResult(
        omega_m=AngularFrequency(p["omega_m"]), gamma_m=AngularFrequency(p["gamma_m"]),
        amplitude=p["amplitude"], offset=p["offset"],
        uncertainties=sol.errors(), residual_norm=sol.residual_norm, warnings=warnings,
    )


@dataclass
class CoherenceFitResult:
    t2: float
    stretch_n: float
    amplitude: float
    baseline: float
    uncertainties: dict[str, float]
    residual_norm: float

    def params(self) -> dict[str, float]:
        return {"amplitude": self.amplitude, "t2": self.t2,
                "stretch_n": self.stretch_n, "baseline": self.baseline}


def fit_stretched_exponential(decay: Spectrum) -> CoherenceFitResult:
    """Fit A * exp(-(t / T2)^n) + baseline to an echo decay."""
    t, y = decay.x, decay.y
    if t[0] <= 0:
        raise ValueError("echo times must be positive")
    if t.size < 5:
        raise ValueError("need at least 5 points for a coherence fit")
    k = max(2, t.size // 10)
    baseline = float(np.mean(y[-k:]))
    amplitude = float(np.mean(y[:2])) - baseline
    t2 = float(np.median(t))
    if amplitude != 0:
        below = np.flatnonzero((y - baseline) / amplitude <= math.exp(-1.0))
        if below.size:
            t2 = float(t[below[0]])
    p0 = np.array([amplitude, t2, 1.0, baseline])
    y_scale = max(float(np.ptp(y)), abs(baseline), 1e-300)
    sol = solve_least_squares(
        STRETCHED_EXP, decay, p0,
        bounds={"t2": (0.0, np.inf), "stretch_n": (0.05, 20.0)},
        scale={"amplitude": y_scale, "t2": t2, "stretch_n": 1.0, "baseline": y_scale},
    )
    p = sol.as_dict()
    return CoherenceFitResult(
        t2=p["t2"], stretch_n=p["stretch_n"], amplitude=p["amplitude"], baseline=p["baseline"],
        uncertainties=sol.errors(), residual_norm=sol.residual_norm,
    )


@dataclass
class RabiFitResult:
    contrast: float
    rabi_frequency: AngularFrequency
    decay: float  # 1/s
    pl0: float
    uncertainties: dict[str, float]
    residual_norm: float

    def params(self) -> dict[str, float]:
        return {"pl0": self.pl0, "contrast": self.contrast,
                "rabi_frequency": float(self.rabi_frequency), "decay": self.decay}


def dominant_angular_frequency(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Peak of the Lomb-Scargle periodogram of the mean-removed data and its ratio to the median power."""
    span = t[-1] - t[0]
    dt = float(np.median(np.diff(t)))
    grid = np.linspace(TWO_PI / span / 4.0, math.pi / dt, 8 * t.size)
    yd = y - y.mean()
    if not np.any(yd):
        return float("nan"), 0.0
    power = lombscargle(t, yd, grid)
    i = int(np.argmax(power))
    med = float(np.median(power))
    return float(grid[i]), (float(power[i]) / med if med > 0 else math.inf)


def fit_rabi(trace: Spectrum) -> RabiFitResult:
    """Fit damped Rabi fringes; contrast is (PL0 - PL-1) / PL0."""
    t, y = trace.x, trace.y
    omega, snr = dominant_angular_frequency(t, y)
    if not snr >= OSCILLATION_SNR:
        raise NoOscillationError(f"no oscillation detected (periodogram peak/median = {snr:.3g})")
    span = t[-1] - t[0]
    if omega * span < TWO_PI:
        raise NoOscillationError("trace spans less than one oscillation period")
    design = np.column_stack([np.ones_like(t), np.cos(omega * t), np.sin(omega * t)])
    (m, ca, sa), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp = math.hypot(ca, sa)
    pl0 = m + amp
    contrast = min(max(2.0 * amp / pl0, 1e-3), 0.999)
    decay = 0.1 / span
    p0 = np.array([pl0, contrast, omega, decay])
    sol = solve_least_squares(
        RABI, trace, p0,
        bounds={"contrast": (0.0, 1.0), "decay": (0.0, np.inf)},
        scale={"pl0": abs(pl0), "contrast": 0.1, "rabi_frequency": 1.0 / span, "decay": 1.0 / span},
    )
    p = sol.as_dict()
    return RabiFitResult(
        contrast=p["contrast"], rabi_frequency=AngularFrequency(p["rabi_frequency"]),
        decay=p["decay"], pl0=p["pl0"], uncertainties=sol.errors(), residual_norm=sol.residual_norm,
    )


@dataclass
class SideFit:
    side: Sideband
    g0: AngularFrequency
    gamma_i: AngularFrequency
    slope: float  # rad/s per photon, signed
    uncertainties: dict[str, float]
    residuals: np.ndarray


@dataclass
class BackactionFitResult:
    g0: AngularFrequency
    gamma_i: AngularFrequency
    uncertainties: dict[str, float]
    per_side: dict[Sideband, SideFit]
    residuals: dict[Sideband, np.ndarray]


def _linear_fit(nc, gamma, sign, sigma):
    """Weighted fit of gamma = intercept + sign*slope*nc. Returns (params, cov, residuals)."""
    a = np.column_stack([np.ones_like(nc), sign * nc])
    w = 1.0 / sigma if sigma is not None else np.ones_like(nc)
    aw = a * w[:, None]
    if np.unique(nc).size < 2 or np.linalg.matrix_rank(aw) < 2:
        raise SingularJacobianError("g0", "singular fit: photon numbers do not span more than one value")
    params, *_ = np.linalg.lstsq(aw, gamma * w, rcond=None)
    resid = gamma - a @ params
    dof = nc.size - 2
    cov = np.linalg.inv(aw.T @ aw)
    if sigma is None:
        chi2 = float(resid @ resid)
        cov = cov * (chi2 / dof if dof > 0 else np.nan)
    return params, cov, resid


def _g0_from_slope(k, cov_kk, kappa, omega_m):
    if not k > 0:
        raise FitError(f"fitted backaction slope {k:.4g} has the wrong sign for the sideband assignment")
    g0 = math.sqrt(k * kappa / (4.0 * sideband_factor(omega_m, kappa)))
    return g0, g0 * math.sqrt(cov_kk) / (2.0 * k)


def fit_backaction(points, kappa: float, omega_m: float) -> BackactionFitResult:
    """Fit total mechanical linewidth against photon number on both sidebands.

    ``points`` holds (nc, gamma_m, side) or (nc, gamma_m, side, sigma) tuples,
    linewidths in rad/s. The model is linear in nc, so the fit is closed-form:
    the pooled fit shares gamma_i and g0 across sidebands, and each side with
    at least two distinct photon numbers also gets its own line.
    """
    rows = list(points)
    if len(rows) < 2:
        raise ValueError("need at least two (nc, gamma_m, side) points")
    nc = np.array([r[0] for r in rows], dtype=float)
    gamma = np.array([r[1] for r in rows], dtype=float)
    sides = [Sideband.parse(r[2]) for r in rows]
    sigma = None
    if all(len(r) > 3 for r in rows):
        sigma = np.array([r[3] for r in rows], dtype=float)
    if np.any(nc < 0):
        raise ValueError("photon numbers must be non-negative")
    sign = np.array([s.detuning_sign * -1.0 for s in sides])  # red +1, blue -1

    params, cov, resid = _linear_fit(nc, gamma, sign, sigma)
    g0, g0_err = _g0_from_slope(params[1], cov[1, 1], kappa, omega_m)

    per_side, residuals = {}, {}
    for side in Sideband:
        mask = np.array([s is side for s in sides])
        if not mask.any():
            continue
        residuals[side] = resid[mask]
        if np.unique(nc[mask]).size < 2:
            continue
        sp, scov, sres = _linear_fit(nc[mask], gamma[mask], sign[mask],
                                     sigma[mask] if sigma is not None else None)
        sg0, sg0_err = _g0_from_slope(sp[1], scov[1, 1], kappa, omega_m)
        per_side[side] = SideFit(
            side=side, g0=AngularFrequency(sg0), gamma_i=AngularFrequency(sp[0]),
            slope=float(sign[mask][0] * sp[1]),
            uncertainties={"g0": sg0_err, "gamma_i": float(math.sqrt(scov[0, 0]))},
            residuals=sres,
        )
    return BackactionFitResult(
        g0=AngularFrequency(g0), gamma_i=AngularFrequency(params[0]),
        uncertainties={"g0": g0_err, "gamma_i": float(math.sqrt(cov[0, 0]))},
        per_side=per_side, residuals=residuals,
    )
