import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from omckit.metrics import (
    DEVICES,
    DeviceRecord,
    ParametricInstabilityError,
    PumpCondition,
    Sideband,
    SpinMechanicalInputs,
    backaction_linewidth,
    backaction_rate_per_photon,
    cooperativity,
    intracavity_photons,
    qf_product,
    quality_factor,
    sideband_factor,
    sideband_resolution,
    spin_decay_rate,
    spin_mech_cooperativity,
    zero_point_motion,
)
from omckit.quantities import HBAR, TWO_PI, AngularFrequency

import oracle_values as ov

hz = AngularFrequency.from_hz
A = DEVICES["A"]
rates = st.floats(min_value=1e2, max_value=1e13)


def pump_a(p=1e-6, delta_hz=-6.23e9):
    return PumpCondition(p, 1.0, hz(190.1e12), hz(delta_hz))


def test_nc_device_a_oracle():
    assert intracavity_photons(A, pump_a()) == pytest.approx(ov.NC_DEVICE_A_1UW, rel=1e-12)


def test_nc_zero_power():
    assert intracavity_photons(A, pump_a(p=0.0)) == 0.0


def test_nc_on_resonance_reduction():
    dev = DeviceRecord("x", 1550.0, hz(4e9), hz(2e9), hz(6e9), hz(1e3))
    pump = PumpCondition(1e-6, 1.0, hz(193e12), hz(0.0))
    flux = 1e-6 / (HBAR * hz(193e12))
    assert intracavity_photons(dev, pump) == pytest.approx(2.0 / dev.kappa * flux, rel=1e-14)


def test_nc_maximal_at_zero_detuning():
    deltas = np.linspace(-20e9, 20e9, 4001)
    nc = [intracavity_photons(A, pump_a(delta_hz=d)) for d in deltas]
    assert deltas[int(np.argmax(nc))] == 0.0


def test_pump_invariants():
    with pytest.raises(ValueError):
        PumpCondition(1e-6, 1.5, hz(1e14), hz(0))
    with pytest.raises(ValueError):
        DeviceRecord("bad", 1550.0, hz(1e9), hz(2e9), hz(6e9), hz(1e3))


def test_on_sideband_detuning_sign():
    assert PumpCondition.on_sideband(A, Sideband.RED, 1e-6, 1.0).detuning == -A.omega_m
    assert PumpCondition.on_sideband(A, Sideband.BLUE, 1e-6, 1.0).detuning == A.omega_m


def test_backaction_no_photons():
    for side in Sideband:
        assert backaction_linewidth(hz(28e3), hz(216e3), 0.0, A.kappa, A.omega_m, side) == hz(28e3)


def test_per_photon_damping_oracle():
    per = backaction_rate_per_photon(hz(216e3), A.kappa, A.omega_m)
    assert per / TWO_PI == pytest.approx(ov.BACKACTION_PER_PHOTON_HZ, rel=1e-12)
    assert sideband_factor(A.omega_m, A.kappa) == pytest.approx(ov.SIDEBAND_FACTOR_A, rel=1e-14)


def test_blue_instability_is_an_error():
    with pytest.raises(ParametricInstabilityError, match="parametric instability"):
        backaction_linewidth(hz(28e3), hz(216e3), 1e4, A.kappa, A.omega_m, Sideband.BLUE)


@given(gi=st.floats(1e3, 1e6), g0=st.floats(1e3, 1e7), nc=st.floats(0, 1e3), wm=rates, k=rates)
def test_red_blue_symmetry(gi, g0, nc, wm, k):
    per = backaction_rate_per_photon(g0, k, wm)
    if per * nc >= gi:
        return
    red = backaction_linewidth(gi, g0, nc, k, wm, Sideband.RED)
    blue = backaction_linewidth(gi, g0, nc, k, wm, Sideband.BLUE)
    assert red - blue == pytest.approx(2 * per * nc, rel=1e-9, abs=1e-9 * gi)
    assert (red + blue) / 2 == pytest.approx(gi, rel=1e-12)


def test_cooperativity_oracle():
    c = cooperativity(hz(216e3), 41000, hz(5.03e9), hz(28e3))
    assert c == pytest.approx(ov.COOPERATIVITY_AC1, rel=1e-12)


def test_cooperativity_scalings():
    base = cooperativity(1.0, 10.0, 2.0, 3.0)
    assert cooperativity(1.0, 0.0, 2.0, 3.0) == 0.0
    assert cooperativity(2.0, 10.0, 2.0, 3.0) == pytest.approx(4 * base, rel=1e-15)


@given(g0=rates, nc=st.floats(1, 1e6), s=st.floats(1e-3, 1e3))
def test_cooperativity_invariant_under_g0_nc_trade(g0, nc, s):
    assert cooperativity(s * g0, nc / s ** 2, 1e9, 1e4) == pytest.approx(cooperativity(g0, nc, 1e9, 1e4), rel=1e-12)


def test_sideband_resolution_values():
    assert sideband_resolution(A.omega_m, A.kappa) == pytest.approx(ov.SIDEBAND_RESOLUTION_A, rel=1e-14)
    d = DEVICES["D"]
    assert sideband_resolution(d.omega_m, d.kappa) == pytest.approx(ov.SIDEBAND_RESOLUTION_D, rel=1e-14)
    assert sideband_resolution(5.0, 5.0) == 4.0


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_sideband_factor_bounded_and_monotone(r1, r2):
    f1, f2 = sideband_factor(r1, 1.0), sideband_factor(r2, 1.0)
    assert 0 < f1 < 1
    if r1 < r2:
        assert f1 <= f2


def test_quality_factors_and_qf():
    assert quality_factor(A.omega_o, A.kappa) == pytest.approx(ov.Q_O_A, rel=1e-13)
    q_m = quality_factor(A.omega_m, A.gamma_m)
    assert q_m == pytest.approx(ov.Q_M_A, rel=1e-13)
    assert qf_product(q_m, A.omega_m) == pytest.approx(ov.QF_A_HZ, rel=1e-13)
    e = DEVICES["E"]
    assert quality_factor(e.omega_m, e.gamma_m) == pytest.approx(ov.Q_M_E, rel=1e-13)
    assert quality_factor(3.0, 3.0) == 1.0


def test_qf_published_rows():
    assert qf_product(1.90e6, hz(6.23e9)) == pytest.approx(1.18e16, rel=5e-3)
    assert qf_product(1.31e6, hz(5.31e9)) == pytest.approx(6.96e15, rel=5e-3)
    assert qf_product(1.0, TWO_PI) == pytest.approx(1.0, rel=1e-15)


@given(q=st.floats(1.0, 1e9), w=rates)
def test_quality_factor_round_trip(q, w):
    assert quality_factor(w, w / q) == pytest.approx(q, rel=1e-12)


def test_spin_mech_cooperativity():
    assert spin_mech_cooperativity(SpinMechanicalInputs(hz(0.0), 1.0, 1.0)) == 0.0
    for conv, expected in ov.C_SM.items():
        inp = SpinMechanicalInputs(hz(132.0), spin_decay_rate(227e-6, conv), hz(3.28e3))
        assert spin_mech_cooperativity(inp) == pytest.approx(expected, rel=1e-12)


@given(k=st.floats(1e-3, 1e3))
def test_spin_mech_scales_inversely_with_gamma_s(k):
    base = spin_mech_cooperativity(SpinMechanicalInputs(hz(132.0), 4405.0, hz(3.28e3)))
    scaled = spin_mech_cooperativity(SpinMechanicalInputs(hz(132.0), 4405.0 / k, hz(3.28e3)))
    assert scaled == pytest.approx(k * base, rel=1e-12)


def test_spin_rate_convention_errors():
    with pytest.raises(ValueError, match="convention"):
        spin_decay_rate(1e-3, "bogus")
    with pytest.raises(ValueError):
        spin_decay_rate(0.0)


def test_zero_point_motion():
    w = hz(6.23e9)
    assert zero_point_motion(HBAR / (2 * w), w) == pytest.approx(1.0, rel=1e-15)
    assert zero_point_motion(4e-15, w) == pytest.approx(zero_point_motion(1e-15, w) / 2, rel=1e-15)
    assert zero_point_motion(1e-15, w) == pytest.approx(ov.X_ZPF_1E15KG, rel=1e-13)


def test_sideband_parse():
    assert Sideband.parse(" Red ") is Sideband.RED
    assert len(Sideband) == 2
    with pytest.raises(ValueError):
        Sideband.parse("green")


@pytest.mark.parametrize("label", sorted(DEVICES))
def test_device_table_invariants(label):
    d = DEVICES[label]
    assert 0 < d.kappa_e <= d.kappa
    assert math.isclose(d.omega_o.hz, 299792458 / (d.lambda_o * 1e-9), rel_tol=1e-14)
