"""1D transfer-matrix surrogate for nanobeam band structure and cavity modes.

Each unit cell is reduced to a hole segment and a solid segment. Optically the
hole segment carries an area-weighted mix of slab and air index; acoustically
both segments share one (calibrated) sound speed and differ in cross-section,
hence in mechanical impedance. The model is calibrated against the reference
mirror cell, not predictive: frequencies land in the right neighbourhood and
respond smoothly and monotonically to geometry, which is what the optimizer
needs.

Field state convention: (u, f) with f = Z u' / k. A layer of length L, speed v
and impedance Z maps it by [[cos p, sin p / Z], [-Z sin p, cos p]], p = w L / v.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .metrics import zero_point_motion
from .quantities import C_LIGHT, TWO_PI, AngularFrequency

# |trace| must exceed 1 by this much to count as forbidden
FORBIDDEN_EPS = 1e-12
EDGE_RTOL = 1e-14
EDGE_FLAG_FRACTION = 0.02
G0_REL_STEP = 1e-4


class SurrogateError(RuntimeError):
    pass


class NoBandgapError(SurrogateError):
    pass


class NoDefectModeError(SurrogateError):
    pass


@dataclass(frozen=True)
class UnitCellGeometry:
    """Lattice constant a, beam width w, hole length hx, hole width hy, thickness t (nm)."""

    a: float
    w: float
    hx: float
    hy: float
    t: float

    def __post_init__(self):
        if not (0 < self.hx < self.a and 0 < self.hy < self.w and self.t > 0):
            raise ValueError(f"invalid unit cell {self}: need 0 < hx < a, 0 < hy < w, t > 0")

    def scaled(self, s: float) -> "UnitCellGeometry":
        return UnitCellGeometry(self.a * s, self.w * s, self.hx * s, self.hy * s, self.t * s)


REFERENCE_MIRROR_CELL = UnitCellGeometry(a=650.0, w=800.0, hx=343.0, hy=617.0, t=250.0)


@dataclass(frozen=True)
class MaterialParams:
    """Diamond constants plus the two surrogate calibration knobs.

    Defaults put the reference mirror cell's optical midgap at 192 THz and its
    acoustic midgap at 6.14 GHz (see ``calibrate_material``).
    """

    refractive_index: float = 2.4
    effective_slab_index: float = 1.3390
    density: float = 3515.0
    longitudinal_sound_speed: float = 17500.0
    acoustic_calibration: float = 0.4569

    def __post_init__(self):
        vals = (self.refractive_index, self.effective_slab_index, self.density,
                self.longitudinal_sound_speed, self.acoustic_calibration)
        if not all(v > 0 for v in vals):
            raise ValueError("material parameters must be positive")
        if self.effective_slab_index > self.refractive_index:
            raise ValueError("effective_slab_index cannot exceed the bulk refractive index")
        if self.effective_slab_index < 1:
            raise ValueError("effective_slab_index must be at least 1 (air)")

    @property
    def sound_speed(self) -> float:
        return self.longitudinal_sound_speed * self.acoustic_calibration


@dataclass(frozen=True)
class Layer:
    length: float  # m
    speed: float  # m/s, phase velocity
    impedance: float
    linear_density: float = 0.0  # kg/m, acoustic layers only

    def scaled(self, s: float) -> "Layer":
        return replace(self, length=self.length * s)


def cell_layers(cell: UnitCellGeometry, mat: MaterialParams, kind: str = "optical") -> tuple[Layer, Layer]:
    """Two-segment (hole, solid) model of a unit cell."""
    hole_len = cell.hx * 1e-9
    solid_len = (cell.a - cell.hx) * 1e-9
    if kind == "optical":
        n2 = mat.effective_slab_index
        n1 = 1.0 + (1.0 - cell.hy / cell.w) * (n2 - 1.0)
        return (Layer(hole_len, C_LIGHT / n1, n1), Layer(solid_len, C_LIGHT / n2, n2))
    if kind == "acoustic":
        v = mat.sound_speed
        area_hole = (cell.w - cell.hy) * cell.t * 1e-18
        area_solid = cell.w * cell.t * 1e-18
        return (
            Layer(hole_len, v, mat.density * v * area_hole, mat.density * area_hole),
            Layer(solid_len, v, mat.density * v * area_solid, mat.density * area_solid),
        )
    raise ValueError(f"kind must be 'optical' or 'acoustic', got {kind!r}")


def symmetric_cell(cell: UnitCellGeometry, mat: MaterialParams, kind: str) -> list[Layer]:
    """Cell split as solid/2, hole, solid/2 so that cells chain mirror-symmetrically."""
    hole, solid = cell_layers(cell, mat, kind)
    half = replace(solid, length=solid.length / 2.0)
    return [half, hole, half]


def layer_matrix(layer: Layer, omega) -> np.ndarray:
    omega = np.asarray(omega)
    p = omega * (layer.length / layer.speed)
    c, s = np.cos(p), np.sin(p)
    m = np.empty(omega.shape + (2, 2), dtype=np.result_type(omega, float))
    m[..., 0, 0] = c
    m[..., 0, 1] = s / layer.impedance
    m[..., 1, 0] = -layer.impedance * s
    m[..., 1, 1] = c
    return m


def transfer_matrix(layers: Sequence[Layer], omega) -> np.ndarray:
    """Product M_n ... M_1 for layers traversed left to right; shape omega.shape + (2, 2)."""
    omega = np.asarray(omega)
    m = np.broadcast_to(np.eye(2, dtype=np.result_type(omega, float)), omega.shape + (2, 2)).copy()
    for layer in layers:
        m = layer_matrix(layer, omega) @ m
    return m


def bloch_trace(layers: Sequence[Layer], omega):
    """cos(k a) = half the trace of the unit-cell transfer matrix. |value| > 1 is a forbidden band."""
    m = transfer_matrix(layers, omega)
    return 0.5 * (m[..., 0, 0] + m[..., 1, 1])


def bragg_frequency(layers: Sequence[Layer]) -> float:
    """Angular frequency at which the round-trip phase per cell equals pi."""
    return math.pi / sum(l.length / l.speed for l in layers)


@dataclass(frozen=True)
class BandGap:
    lower_edge: AngularFrequency
    upper_edge: AngularFrequency

    def __post_init__(self):
        if not self.lower_edge < self.upper_edge:
            raise ValueError("band gap needs lower_edge < upper_edge")

    @property
    def mu(self) -> AngularFrequency:
        return AngularFrequency((self.lower_edge + self.upper_edge) / 2.0)

    @property
    def delta(self) -> AngularFrequency:
        return AngularFrequency(self.upper_edge - self.lower_edge)

    @property
    def fractional(self) -> float:
        return self.delta / self.mu

    def scaled(self, s: float) -> "BandGap":
        return BandGap(AngularFrequency(self.lower_edge * s), AngularFrequency(self.upper_edge * s))


def default_range(layers: Sequence[Layer]) -> tuple[float, float]:
    wb = bragg_frequency(layers)
    return (1e-3 * wb, 1.95 * wb)


def find_bandgap(layers: Sequence[Layer], omega_range: tuple[float, float] | None = None,
                 resolution: int = 2000) -> BandGap:
    """First forbidden interval in ``omega_range``, edges refined where |trace| = 1."""
    lo, hi = omega_range or default_range(layers)
    grid = np.linspace(lo, hi, resolution)
    tr = bloch_trace(layers, grid)
    forbidden = np.abs(tr) > 1.0 + FORBIDDEN_EPS
    # skip a gap that is already open at the range start: its lower edge is not bracketed
    i = 0
    while i < resolution and forbidden[i]:
        i += 1
    while i < resolution and not forbidden[i]:
        i += 1
    if i >= resolution:
        raise NoBandgapError("no bandgap in the requested frequency range")
    j = i
    while j < resolution and forbidden[j]:
        j += 1
    if j >= resolution:
        raise NoBandgapError("forbidden region extends past the range end; widen omega_range")
    target = 1.0 if tr[i] > 0 else -1.0

    def f(w):
        return float(bloch_trace(layers, w)) - target

    kw = dict(xtol=1e-300, rtol=EDGE_RTOL, maxiter=200)
    lower = brentq(f, grid[i - 1], grid[i], **kw)
    upper = brentq(f, grid[j - 1], grid[j], **kw)
    return BandGap(AngularFrequency(lower), AngularFrequency(upper))


@dataclass(frozen=True)
class BandLabel:
    kind: str  # "optical" | "acoustic"
    order: int = 0
    symmetry: str = "symmetric"  # "symmetric" | "antisymmetric"


_SURROGATE_CLASS = {
    "optical": "TE-like fundamental family (odd vector symmetry in y, even in z)",
    "acoustic": "breathing-like family (symmetric in y and z)",
}


def symmetry_filter(band: BandLabel) -> tuple[bool, str]:
    """Whether the 1D surrogate represents ``band``, with a tag saying which symmetry class."""
    if band.kind not in _SURROGATE_CLASS:
        raise ValueError(f"unknown band kind {band.kind!r}")
    if band.symmetry == "symmetric":
        return True, _SURROGATE_CLASS[band.kind]
    return False, (f"excluded: the 1D surrogate has no {band.symmetry} {band.kind} bands; "
                   f"it only models the {_SURROGATE_CLASS[band.kind]}")


@dataclass(frozen=True)
class DesignVector:
    """Mirror cell, cell counts and the power-law taper from mirror to defect.

    A taper cell at normalized distance u from the defect (u = 0 at the defect,
    u = 1 at the mirror) has p(u) = p_defect + (p_mirror - p_defect) * u**e_p for
    p in (a, hx, hy), with p_defect = defect_scale * p_mirror. w and t are fixed.
    """

    mirror_cell: UnitCellGeometry = REFERENCE_MIRROR_CELL
    n_mirror: int = 8
    n_taper: int = 6
    defect_scale: float = 0.85
    taper_exponents: tuple[float, float, float] = (2.0, 2.0, 2.0)

    def __post_init__(self):
        if self.n_mirror < 1 or self.n_taper < 0:
            raise ValueError("need n_mirror >= 1 and n_taper >= 0")
        if not 0 < self.defect_scale <= 1:
            raise ValueError("defect_scale must lie in (0, 1]")
        if len(self.taper_exponents) != 3 or not all(e > 0 for e in self.taper_exponents):
            raise ValueError("taper_exponents must be three positive numbers")
        self.half_cells()  # validates every interpolated cell

    def taper_cell(self, u: float) -> UnitCellGeometry:
        m = self.mirror_cell
        s = self.defect_scale
        ea, ex, ey = self.taper_exponents
        return UnitCellGeometry(
            a=m.a * (s + (1 - s) * u ** ea),
            w=m.w,
            hx=m.hx * (s + (1 - s) * u ** ex),
            hy=m.hy * (s + (1 - s) * u ** ey),
            t=m.t,
        )

    def half_cells(self) -> list[UnitCellGeometry]:
        """Taper cells from the defect outward (defect excluded, mirrors excluded)."""
        n = self.n_taper
        return [self.taper_cell(j / (n + 1)) for j in range(1, n + 1)]

    def defect_cell(self) -> UnitCellGeometry:
        return self.taper_cell(0.0)

    def central_cells(self) -> list[UnitCellGeometry]:
        half = self.half_cells()
        return half[::-1] + [self.defect_cell()] + half

    def all_cells(self) -> list[UnitCellGeometry]:
        mirrors = [self.mirror_cell] * self.n_mirror
        return mirrors + self.central_cells() + mirrors

    def scaled(self, s: float) -> "DesignVector":
        return replace(self, mirror_cell=self.mirror_cell.scaled(s))


REFERENCE_DESIGN = DesignVector()


def _stack(cells: Iterable[UnitCellGeometry], mat: MaterialParams, kind: str) -> list[Layer]:
    out = []
    for c in cells:
        out.extend(symmetric_cell(c, mat, kind))
    return out


def _mirror_modes(mirror: Sequence[Layer], omega):
    """Growing (left-side) and decaying (right-side) Bloch eigenvectors of a symmetric mirror cell."""
    m = transfer_matrix(mirror, omega)
    tau = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    root = np.sqrt(tau ** 2 - 1.0)
    sgn = np.where(np.real(tau) >= 0, 1.0, -1.0)
    # symmetric cell: m00 == m11 == tau, so v = (m01, lambda - tau) with lambda - tau = +-root
    v_grow = np.stack([m[..., 0, 1], sgn * root], axis=-1)
    v_decay = np.stack([m[..., 0, 1], -sgn * root], axis=-1)
    lam_grow = tau + sgn * root
    return v_grow, v_decay, lam_grow


def _mismatch(mirror, central, omega):
    """Zero exactly where a mode decays into both semi-infinite mirrors."""
    v_l, v_r, _ = _mirror_modes(mirror, omega)
    mc = transfer_matrix(central, omega)
    w = np.einsum("...ij,...j->...i", mc, v_l)
    return w[..., 0] * v_r[..., 1] - w[..., 1] * v_r[..., 0]


def bound_modes(mirror: Sequence[Layer], central: Sequence[Layer], gap: BandGap,
                resolution: int = 400) -> list[float]:
    """All localized-mode frequencies inside ``gap`` (infinite-mirror limit)."""
    eps = 1e-6 * gap.delta
    grid = np.linspace(gap.lower_edge + eps, gap.upper_edge - eps, resolution)
    f = _mismatch(mirror, central, grid)
    roots = []
    for k in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0):
        roots.append(brentq(lambda w: float(_mismatch(mirror, central, w)), grid[k], grid[k + 1],
                            xtol=1e-300, rtol=EDGE_RTOL, maxiter=200))
    roots.extend(float(grid[k]) for k in np.flatnonzero(f == 0))
    return sorted(roots)


def _pick_mode(mirror, central, gap, what: str) -> float:
    modes = bound_modes(mirror, central, gap)
    if not modes:
        raise NoDefectModeError(f"no defect mode: no localized {what} resonance inside the mirror gap")
    return min(modes, key=lambda w: abs(w - gap.mu))


def _radiation_denominator(layers, z0, omega):
    m = transfer_matrix(layers, omega)
    return 1j * z0 * (m[..., 0, 0] + m[..., 1, 1]) + z0 ** 2 * m[..., 0, 1] - m[..., 1, 0]


def transmission(layers: Sequence[Layer], z0: float, omega) -> np.ndarray:
    """Power transmission through ``layers`` embedded in a uniform medium of impedance z0."""
    den = _radiation_denominator(layers, z0, np.asarray(omega, dtype=float))
    return 4.0 * z0 ** 2 / np.abs(den) ** 2


def complex_resonance(layers, z0, omega_guess, max_iter: int = 60) -> complex:
    """Pole of the transmission amplitude nearest ``omega_guess`` (secant iteration in the complex plane)."""
    def d(w):
        return complex(_radiation_denominator(layers, z0, np.complex128(w)))

    w0 = complex(omega_guess)
    w1 = w0 * (1 + 1e-7) - 1j * 1e-7 * abs(w0)
    d0, d1 = d(w0), d(w1)
    for _ in range(max_iter):
        if d1 == d0:
            break
        w2 = w1 - d1 * (w1 - w0) / (d1 - d0)
        w0, d0 = w1, d1
        w1, d1 = w2, d(w2)
        if abs(w1 - w0) < 1e-14 * abs(w1):
            break
    return w1


@dataclass
class CavitySolution:
    omega_o: AngularFrequency
    q_o: float
    omega_m: AngularFrequency
    g0: AngularFrequency
    m_eff: float  # kg
    optical_gap: BandGap = None
    acoustic_gap: BandGap = None
    flags: list[str] = field(default_factory=list)

    @property
    def x_zpf(self) -> float:
        return zero_point_motion(self.m_eff, self.omega_m)


def _perturbed_central(design: DesignVector, mat: MaterialParams, kind: str, s_m: float) -> list[Layer]:
    """Central region with the defect cell stretched by s_m metres (shared by its two solid halves)."""
    half = design.half_cells()
    defect = symmetric_cell(design.defect_cell(), mat, kind)
    defect = [replace(defect[0], length=defect[0].length + s_m / 2), defect[1],
              replace(defect[2], length=defect[2].length + s_m / 2)]
    return _stack(half[::-1], mat, kind) + defect + _stack(half, mat, kind)


def optical_frequency_shift(design: DesignVector, mat: MaterialParams, gap: BandGap,
                            rel_step: float = G0_REL_STEP, stencil: int = 3) -> float:
    """|d omega_o / ds| (rad/s per metre) for a uniform stretch s of the defect cell."""
    mirror = symmetric_cell(design.mirror_cell, mat, "optical")
    h = rel_step * design.defect_cell().a * 1e-9

    def w(s):
        return _pick_mode(mirror, _perturbed_central(design, mat, "optical", s), gap, "optical")

    if stencil == 3:
        return abs((w(h) - w(-h)) / (2 * h))
    if stencil == 5:
        return abs((-w(2 * h) + 8 * w(h) - 8 * w(-h) + w(-2 * h)) / (12 * h))
    raise ValueError("stencil must be 3 or 5")


def mode_profile(design: DesignVector, mat: MaterialParams, omega: float, kind: str = "acoustic",
                 samples_per_layer: int = 33):
    """Sampled displacement (or field) profile of the localized mode at ``omega``.

    Returns (x, u, linear_density) over the full finite structure.
    """
    mirror = symmetric_cell(design.mirror_cell, mat, kind)
    v_l, _, _ = _mirror_modes(mirror, omega)
    state = np.real(v_l) / np.max(np.abs(v_l))
    layers = _stack(design.all_cells(), mat, kind)
    xs, us, rhos = [], [], []
    x0 = 0.0
    for layer in layers:
        k = omega / layer.speed
        xl = np.linspace(0.0, layer.length, samples_per_layer)
        u = state[0] * np.cos(k * xl) + state[1] / layer.impedance * np.sin(k * xl)
        xs.append(x0 + xl)
        us.append(u)
        rhos.append(np.full_like(xl, layer.linear_density))
        state = layer_matrix(layer, omega) @ state
        x0 += layer.length
    return xs, us, rhos


def effective_mass(design: DesignVector, mat: MaterialParams, omega_m: float) -> float:
    """Mass with the squared displacement profile normalized to its maximum as weight."""
    xs, us, rhos = mode_profile(design, mat, omega_m, "acoustic")
    umax2 = max(float(np.max(u ** 2)) for u in us)
    total = sum(simpson(r * u ** 2, x=x) for x, u, r in zip(xs, us, rhos))
    return float(total / umax2)


def mirror_gaps(cell: UnitCellGeometry, mat: MaterialParams) -> tuple[BandGap, BandGap]:
    return (find_bandgap(cell_layers(cell, mat, "optical")),
            find_bandgap(cell_layers(cell, mat, "acoustic")))


def cavity_response(design: DesignVector, mat: MaterialParams = MaterialParams(),
                    omega_range: tuple[float, float] | None = None,
                    acoustic_range: tuple[float, float] | None = None) -> CavitySolution:
    """Optical and mechanical defect modes, Qo, m_eff and g0 of a full taper design."""
    cell = design.mirror_cell
    o_gap = find_bandgap(cell_layers(cell, mat, "optical"), omega_range)
    m_gap = find_bandgap(cell_layers(cell, mat, "acoustic"), acoustic_range)

    o_mirror = symmetric_cell(cell, mat, "optical")
    o_central = _stack(design.central_cells(), mat, "optical")
    w_bound = _pick_mode(o_mirror, o_central, o_gap, "optical")
    full = _stack(design.all_cells(), mat, "optical")
    pole = complex_resonance(full, mat.effective_slab_index, w_bound)
    omega_o = pole.real
    q_o = omega_o / (2.0 * abs(pole.imag)) if pole.imag != 0 else math.inf

    a_mirror = symmetric_cell(cell, mat, "acoustic")
    a_central = _stack(design.central_cells(), mat, "acoustic")
    omega_m = _pick_mode(a_mirror, a_central, m_gap, "mechanical")

    m_eff = effective_mass(design, mat, omega_m)
    dwds = optical_frequency_shift(design, mat, o_gap)
    g0 = dwds * zero_point_motion(m_eff, omega_m)

    flags = []
    for name, w, gap in (("optical", omega_o, o_gap), ("mechanical", omega_m, m_gap)):
        if min(w - gap.lower_edge, gap.upper_edge - w) < EDGE_FLAG_FRACTION * gap.delta:
            flags.append(f"{name} resonance within 2% of a gap edge")
    if not math.isfinite(q_o) or abs(pole.imag) < 1e-14 * omega_o:
        flags.append("optical Q beyond double-precision resolution")
    return CavitySolution(
        omega_o=AngularFrequency(omega_o), q_o=q_o, omega_m=AngularFrequency(omega_m),
        g0=AngularFrequency(g0), m_eff=m_eff, optical_gap=o_gap, acoustic_gap=m_gap, flags=flags,
    )


def calibrate_material(cell: UnitCellGeometry = REFERENCE_MIRROR_CELL,
                       optical_midgap_hz: float = 192e12,
                       acoustic_midgap_hz: float = 6.14e9,
                       base: MaterialParams | None = None) -> MaterialParams:
    """Solve for the slab index and acoustic speed scale that place the mirror midgaps on target."""
    base = base or MaterialParams()

    def opt(n):
        m = replace(base, effective_slab_index=n, refractive_index=max(base.refractive_index, n))
        return find_bandgap(cell_layers(cell, m, "optical")).mu / TWO_PI - optical_midgap_hz

    n = brentq(opt, 1.01, base.refractive_index, xtol=1e-12)

    def aco(s):
        m = replace(base, acoustic_calibration=s)
        return find_bandgap(cell_layers(cell, m, "acoustic")).mu / TWO_PI - acoustic_midgap_hz

    s = brentq(aco, 0.05, 5.0, xtol=1e-12)
    return replace(base, effective_slab_index=n, acoustic_calibration=s)


def write_band_csv(path, layers: Sequence[Layer], omegas) -> None:
    tr = bloch_trace(layers, np.asarray(omegas, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["omega_over_2pi_hz", "cos_bloch_phase"])
        for w, c in zip(omegas, tr):
            wr.writerow([f"{w / TWO_PI:.12g}", f"{c:.12g}"])


def write_transmission_csv(path, layers: Sequence[Layer], z0: float, omegas) -> None:
    t = transmission(layers, z0, np.asarray(omegas, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["omega_over_2pi_hz", "transmission"])
        for w, v in zip(omegas, t):
            wr.writerow([f"{w / TWO_PI:.12g}", f"{v:.12g}"])
