"""CSV ingestion and JSON run configuration."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .fitting import Spectrum
from .metrics import DEVICES, DeviceRecord, PumpCondition, Sideband
from .optimizer import DesignBounds, FitnessWindows, GaConfig, GridSpec
from .quantities import C_LIGHT, TWO_PI, AngularFrequency, Power, dbm_to_watts
from .surrogate import REFERENCE_MIRROR_CELL, MaterialParams, UnitCellGeometry


class InputError(ValueError):
    """Malformed input file or configuration (CLI exit code 2)."""


MIN_ROWS = 8

SCHEMAS = {
    "optical": ("wavelength_nm", "reflection"),
    "mechanical": ("frequency_hz", "psd"),
    "time": ("time_s", "signal"),
}
BACKACTION_COLUMNS = ("nc", "gamma_m_hz", "side")


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: empty file")
    return [c.strip().lower() for c in rows[0]], rows[1:]


def _floats(path, rows, ncol):
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != ncol:
        raise InputError(f"{path}: every row needs {ncol} columns")
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path}: NaN or infinite values are not allowed")
    return data


def detect_schema(header) -> str:
    for kind, cols in SCHEMAS.items():
        if tuple(header[:2]) == cols and (len(header) == 2 or (len(header) == 3 and header[2] == "sigma")):
            return kind
    raise InputError(f"unrecognized header {','.join(header)!r}; expected one of "
                     + "; ".join(",".join(c) + "[,sigma]" for c in SCHEMAS.values()))


def load_spectrum_csv(path, expect: str) -> Spectrum:
    """Read a two- or three-column CSV into internal units.

    Optical scans become angular laser frequency (ascending), mechanical scans
    angular frequency, spin traces seconds.
    """
    header, rows = _read_rows(path)
    kind = detect_schema(header)
    if kind != expect:
        raise InputError(f"{path}: header {','.join(header)!r} is a {kind} schema, expected {expect} "
                         f"({','.join(SCHEMAS[expect])}[,sigma])")
    if len(rows) < MIN_ROWS:
        raise InputError(f"{path}: need at least {MIN_ROWS} data rows, got {len(rows)}")
    data = _floats(path, rows, len(header))
    x, y = data[:, 0], data[:, 1]
    sigma = data[:, 2] if data.shape[1] == 3 else None
    if kind == "optical":
        if np.any(x <= 0):
            raise InputError(f"{path}: wavelengths must be positive")
        x = TWO_PI * C_LIGHT / (x * 1e-9)
    elif kind == "mechanical":
        x = TWO_PI * x
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    sigma = sigma[order] if sigma is not None else None
    try:
        return Spectrum(x, y, sigma)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def load_backaction_csv(path):
    """Rows (nc, gamma_m in rad/s, Sideband[, sigma in rad/s])."""
    header, rows = _read_rows(path)
    with_sigma = tuple(header) == BACKACTION_COLUMNS + ("sigma_hz",)
    if tuple(header) != BACKACTION_COLUMNS and not with_sigma:
        raise InputError(f"{path}: unrecognized header {','.join(header)!r}; expected "
                         f"{','.join(BACKACTION_COLUMNS)}[,sigma_hz]")
    if len(rows) < 2:
        raise InputError(f"{path}: need at least 2 data rows")
    out = []
    for r in rows:
        if len(r) != len(header):
            raise InputError(f"{path}: every row needs {len(header)} columns")
        try:
            nc, g = float(r[0]), float(r[1])
            side = Sideband.parse(r[2])
            extra = (TWO_PI * float(r[3]),) if with_sigma else ()
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
        if not (math.isfinite(nc) and math.isfinite(g)) or any(not math.isfinite(e) for e in extra):
            raise InputError(f"{path}: NaN or infinite values are not allowed")
        out.append((nc, TWO_PI * g, side) + extra)
    return out


# ------------------------------------------------------------------ config

SECTION_KEYS = {
    "material": {"slab_index", "refractive_index", "sound_speed", "density", "acoustic_calibration"},
    "device": {"label", "lambda_o_nm", "kappa_hz", "kappa_e_hz", "omega_m_hz", "gamma_m_hz"},
    "pump": {"p_in_w", "p_in_dbm", "eta_f", "detuning_hz", "sideband", "laser_hz"},
    "grid": {"a_nm", "hx_nm", "hy_nm", "w_nm", "t_nm"},
    "ga": {f.name for f in fields(GaConfig)} | {"mirror_cell_nm", "n_mirror", "n_taper",
                                                "defect_scale", "taper_exponent"},
    "windows": {"mu_o_hz", "delta_o_hz", "mu_m_hz", "delta_m_hz"},
    "metrics": {"g0_hz", "gamma_i_hz", "cooperativity_gamma", "m_eff_kg", "g_sm_hz", "t2_s",
                "spin_rate_convention"},
}


@dataclass
class MetricsSettings:
    g0_hz: float = 216e3
    gamma_i_hz: float | None = None
    cooperativity_gamma: str = "gamma_m"  # or "gamma_i"
    m_eff_kg: float | None = None
    g_sm_hz: float | None = None
    t2_s: float | None = None
    spin_rate_convention: str = "inverse"


@dataclass
class RunConfig:
    material: MaterialParams = field(default_factory=MaterialParams)
    device: DeviceRecord | None = None
    pump: PumpCondition | None = None
    grid: GridSpec | None = None
    ga: GaConfig = field(default_factory=GaConfig)
    ga_bounds: dict = field(default_factory=dict)
    mirror_cell: UnitCellGeometry | None = None
    windows: dict | None = None
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    raw: dict = field(default_factory=dict)

    def design_bounds(self, mirror: UnitCellGeometry) -> DesignBounds:
        b = self.ga_bounds
        kw = {k: (tuple(b[k]) if isinstance(b[k], list) else b[k]) for k in b}
        return DesignBounds(mirror, **kw)

    def fitness_windows(self) -> FitnessWindows | None:
        if not self.windows:
            return None
        w = self.windows
        af = AngularFrequency.from_hz
        return FitnessWindows(af(w["mu_o_hz"]), af(w["delta_o_hz"]), af(w["mu_m_hz"]), af(w["delta_m_hz"]))


def _check_keys(section: str, data) -> dict:
    if not isinstance(data, dict):
        raise InputError(f"config section {section!r} must be an object")
    unknown = sorted(set(data) - SECTION_KEYS[section])
    if unknown:
        raise InputError(f"unknown key {unknown[0]!r} in config section {section!r}")
    return data


def _range(name, v):
    if not (isinstance(v, list) and len(v) == 3):
        raise InputError(f"grid.{name} must be [lo, hi, steps]")
    return (float(v[0]), float(v[1]), int(v[2]))


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    unknown = sorted(set(doc) - set(SECTION_KEYS))
    if unknown:
        raise InputError(f"unknown key {unknown[0]!r} at config top level")
    cfg = RunConfig(raw=doc)
    try:
        if "material" in doc:
            m = _check_keys("material", doc["material"])
            base = MaterialParams()
            cfg.material = MaterialParams(
                refractive_index=m.get("refractive_index", base.refractive_index),
                effective_slab_index=m.get("slab_index", base.effective_slab_index),
                density=m.get("density", base.density),
                longitudinal_sound_speed=m.get("sound_speed", base.longitudinal_sound_speed),
                acoustic_calibration=m.get("acoustic_calibration", base.acoustic_calibration),
            )
        if "device" in doc:
            d = _check_keys("device", doc["device"])
            if set(d) == {"label"}:
                if d["label"] not in DEVICES:
                    raise InputError(f"unknown built-in device {d['label']!r}")
                cfg.device = DEVICES[d["label"]]
            else:
                missing = SECTION_KEYS["device"] - set(d)
                if missing:
                    raise InputError(f"device section is missing {sorted(missing)[0]!r}")
                cfg.device = DeviceRecord.from_hz(d["label"], d["lambda_o_nm"], d["kappa_hz"],
                                                  d["kappa_e_hz"], d["omega_m_hz"], d["gamma_m_hz"])
        if "pump" in doc:
            p = _check_keys("pump", doc["pump"])
            if cfg.device is None:
                raise InputError("pump section requires a device section")
            cfg.pump = _parse_pump(p, cfg.device)
        if "grid" in doc:
            g = _check_keys("grid", doc["grid"])
            cfg.grid = GridSpec(_range("a_nm", g["a_nm"]), _range("hx_nm", g["hx_nm"]),
                                _range("hy_nm", g["hy_nm"]), float(g.get("w_nm", 800.0)),
                                float(g.get("t_nm", 250.0)))
        if "ga" in doc:
            g = _check_keys("ga", doc["ga"])
            ga_keys = {f.name for f in fields(GaConfig)}
            cfg.ga = GaConfig(**{k: v for k, v in g.items() if k in ga_keys})
            cfg.ga_bounds = {k: g[k] for k in ("n_mirror", "n_taper", "defect_scale", "taper_exponent") if k in g}
            if "mirror_cell_nm" in g:
                mc = g["mirror_cell_nm"]
                cfg.mirror_cell = UnitCellGeometry(mc["a"], mc["w"], mc["hx"], mc["hy"], mc["t"])
            # surface bound errors now rather than mid-run
            cfg.design_bounds(cfg.mirror_cell or REFERENCE_MIRROR_CELL)
        if "windows" in doc:
            w = _check_keys("windows", doc["windows"])
            if set(w) != SECTION_KEYS["windows"]:
                raise InputError("windows section needs mu_o_hz, delta_o_hz, mu_m_hz and delta_m_hz")
            cfg.windows = dict(w)
            cfg.fitness_windows()
        if "metrics" in doc:
            cfg.metrics = MetricsSettings(**_check_keys("metrics", doc["metrics"]))
            if cfg.metrics.cooperativity_gamma not in ("gamma_m", "gamma_i"):
                raise InputError("metrics.cooperativity_gamma must be 'gamma_m' or 'gamma_i'")
            if cfg.metrics.cooperativity_gamma == "gamma_i" and cfg.metrics.gamma_i_hz is None:
                raise InputError("metrics.cooperativity_gamma = 'gamma_i' needs gamma_i_hz")
    except InputError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"invalid config: {exc}") from None
    return cfg


def _parse_pump(p: dict, dev: DeviceRecord) -> PumpCondition:
    if ("p_in_w" in p) == ("p_in_dbm" in p):
        raise InputError("pump needs exactly one of p_in_w or p_in_dbm")
    p_in = Power(p["p_in_w"]) if "p_in_w" in p else dbm_to_watts(p["p_in_dbm"])
    if ("detuning_hz" in p) == ("sideband" in p):
        raise InputError("pump needs exactly one of detuning_hz or sideband")
    if "sideband" in p:
        delta = Sideband.parse(p["sideband"]).detuning(dev.omega_m)
    else:
        delta = AngularFrequency.from_hz(p["detuning_hz"])
    omega_l = AngularFrequency.from_hz(p["laser_hz"]) if "laser_hz" in p else AngularFrequency(dev.omega_o + delta)
    return PumpCondition(p_in, float(p.get("eta_f", 1.0)), omega_l, delta)


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)
