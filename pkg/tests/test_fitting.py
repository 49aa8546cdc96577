import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omckit import synth
from omckit.fitting import (
    FANO,
    LORENTZIAN,
    RABI,
    STRETCHED_EXP,
    FitError,
    Model,
    NoOscillationError,
    ResonanceNotCapturedError,
    SingularJacobianError,
    Spectrum,
    backaction_model,
    fano_reflection,
    fit_backaction,
    fit_fano,
    fit_lorentzian_psd,
    fit_rabi,
    fit_stretched_exponential,
    kappa_e_from_contrast,
    solve_least_squares,
)
from omckit.metrics import DEVICES, Sideband, backaction_linewidth
from omckit.quantities import TWO_PI

A = DEVICES["A"]


def _truth(model, p):
    return dict(zip(model.params, map(float, p)))


def _assert_close(got: dict, want: dict, rel):
    for k, v in want.items():
        assert got[k] == pytest.approx(v, rel=rel), k


# ---------------------------------------------------------------- engine

LINE = Model("line", ("m", "b"), lambda x, p: p[0] * x + p[1],
             lambda x, p: np.column_stack([x, np.ones_like(x)]))
QUAD = Model("quad", ("a", "b", "c"), lambda x, p: p[0] * x ** 2 + p[1] * x + p[2],
             lambda x, p: np.column_stack([x ** 2, x, np.ones_like(x)]))


def test_engine_line_from_origin():
    x = np.linspace(-3, 5, 20)
    sol = solve_least_squares(LINE, Spectrum(x, 2 * x + 1), [0.0, 0.0])
    np.testing.assert_allclose(sol.params, [2.0, 1.0], rtol=1e-8)


def test_engine_quadratic():
    x = np.linspace(-2, 3, 30)
    sol = solve_least_squares(QUAD, Spectrum(x, 0.5 * x ** 2 - 3 * x + 7), [1.0, 1.0, 1.0])
    np.testing.assert_allclose(sol.params, [0.5, -3.0, 7.0], rtol=1e-8)


def test_engine_fixed_parameter_and_sigma():
    x = np.linspace(0, 1, 10)
    spec = Spectrum(x, 3 * x + 2, np.full(10, 0.1))
    sol = solve_least_squares(LINE, spec, [1.0, 0.0], fixed={"b": 2.0})
    assert sol.fixed == ("b",)
    assert sol.params[1] == 2.0
    assert sol.params[0] == pytest.approx(3.0, rel=1e-10)
    # known sigma: covariance is not rescaled by chi^2
    assert sol.stderr[0] == pytest.approx(0.1 / math.sqrt(np.sum(x ** 2)), rel=1e-8)


def test_engine_rejects_start_outside_bounds():
    x = np.linspace(0, 1, 10)
    with pytest.raises(ValueError, match="bounds"):
        solve_least_squares(LINE, Spectrum(x, x), [-1.0, 0.0], bounds={"m": (0.0, 2.0)})


def test_engine_singular_names_parameter():
    x = np.linspace(0, 1, 10)
    dead = Model("dead", ("m", "ghost"), lambda x, p: p[0] * x,
                 lambda x, p: np.column_stack([x, np.zeros_like(x)]))
    with pytest.raises(SingularJacobianError) as exc:
        solve_least_squares(dead, Spectrum(x, x), [1.0, 1.0])
    assert exc.value.parameter == "ghost"


def test_engine_degenerate_combination():
    x = np.linspace(0, 1, 10)
    twin = Model("twin", ("a", "b"), lambda x, p: (p[0] + p[1]) * x,
                 lambda x, p: np.column_stack([x, x]))
    with pytest.raises(SingularJacobianError):
        solve_least_squares(twin, Spectrum(x, x), [0.3, 0.3])


def test_engine_needs_enough_points():
    with pytest.raises(ValueError, match="at least"):
        solve_least_squares(QUAD, Spectrum([0.0, 1.0, 2.0], [0.0, 1.0, 4.0]), [1.0, 0.0, 0.0])


@pytest.mark.parametrize("x, y, sigma", [
    ([0.0, 0.0, 1.0], [1.0, 2.0, 3.0], None),
    ([0.0, 1.0, 2.0], [1.0, np.nan, 3.0], None),
    ([0.0, 1.0, 2.0], [1.0, 2.0, 3.0], [1.0, 0.0, 1.0]),
])
def test_spectrum_invariants(x, y, sigma):
    with pytest.raises(ValueError):
        Spectrum(x, y, sigma)


# ---------------------------------------------------------------- model algebra

def test_fano_reductions():
    assert fano_reflection(0.0, 1.0, 3.0, 0.0, 2.0) == pytest.approx(1.0 - 2 * 3.0 / 2.0)
    assert fano_reflection(0.0, 1.0, 3.0, 1.0, 2.0) == pytest.approx(1.0)


@given(d=st.floats(-1e3, 1e3), q=st.floats(-3, 3), a0=st.floats(0.1, 10), k=st.floats(0.1, 100))
def test_fano_parity(d, q, a0, k):
    diff = fano_reflection(d, 1.0, a0, q, k) - fano_reflection(-d, 1.0, a0, q, k)
    assert diff == pytest.approx(2 * a0 * q * d / (k ** 2 / 4 + d ** 2), rel=1e-9, abs=1e-12)


def test_stretched_exponential_at_t2():
    from omckit.fitting import stretched_exponential
    assert stretched_exponential(5.0, 1.0, 5.0, 1.0, 0.0) == pytest.approx(math.exp(-1))


def test_rabi_half_period():
    from omckit.fitting import rabi_signal
    w = TWO_PI * 3.0
    assert rabi_signal(math.pi / w, 2.0, 0.3, w, 0.0) == pytest.approx(2.0 * (1 - 0.3))


# ---------------------------------------------------------------- Jacobians

BA_RED = backaction_model(A.kappa, A.omega_m, Sideband.RED)
BA_BLUE = backaction_model(A.kappa, A.omega_m, Sideband.BLUE)


def _random_point(model, rng):
    if model is FANO:
        k = rng.uniform(0.5, 2.0)
        return np.linspace(-5, 5, 41), np.array([rng.uniform(0.5, 2), rng.uniform(0.1, 1), rng.uniform(-1, 1), k,
                                                 rng.uniform(-1, 1)])
    if model is LORENTZIAN:
        return np.linspace(-5, 5, 41), np.array([rng.uniform(0, 1), rng.uniform(0.5, 5), rng.uniform(-1, 1),
                                                 rng.uniform(0.5, 2)])
    if model is STRETCHED_EXP:
        return np.linspace(0.1, 5, 41), np.array([rng.uniform(0.5, 2), rng.uniform(0.5, 3), rng.uniform(0.5, 3),
                                                  rng.uniform(-0.1, 0.1)])
    if model is RABI:
        return np.linspace(0, 3, 41), np.array([rng.uniform(0.5, 2), rng.uniform(0.05, 0.9), rng.uniform(2, 20),
                                                rng.uniform(0, 1)])
    return np.linspace(0, 1e4, 41), np.array([rng.uniform(1e4, 1e6), rng.uniform(1e5, 3e6)])


@pytest.mark.parametrize("model", [FANO, LORENTZIAN, STRETCHED_EXP, RABI, BA_RED, BA_BLUE],
                         ids=lambda m: m.name)
def test_jacobian_matches_central_differences(model):
    rng = np.random.default_rng(7)
    for _ in range(100):
        x, p = _random_point(model, rng)
        analytic = model.jacobian(x, p)
        for j in range(p.size):
            h = 1e-6 * max(abs(p[j]), 1e-3)
            up, dn = p.copy(), p.copy()
            up[j] += h
            dn[j] -= h
            fd = (model(x, up) - model(x, dn)) / (2 * h)
            scale = np.max(np.abs(fd)) + 1e-300
            assert np.max(np.abs(analytic[:, j] - fd)) <= 1e-6 * scale, (model.name, j)


# ---------------------------------------------------------------- noiseless recovery

def test_fano_noiseless_recovery():
    r = fit_fano(synth.optical_spectrum())
    _assert_close(r.params(), _truth(FANO, synth.fano_params()), 1e-6)
    assert r.q_o == pytest.approx(A.omega_o / A.kappa, rel=1e-6)
    assert r.lambda_o_nm == pytest.approx(1576.87, rel=1e-9)


def test_lorentzian_noiseless_recovery():
    r = fit_lorentzian_psd(synth.mechanical_spectrum())
    _assert_close(r.params(), _truth(LORENTZIAN, synth.lorentzian_params()), 1e-6)
    assert r.q_m == pytest.approx(1.90e6, rel=1e-2)
    assert not r.warnings


def test_lorentzian_160mk_device():
    r = fit_lorentzian_psd(synth.mechanical_spectrum(gamma_hz=4.76e3))
    assert r.q_m == pytest.approx(1.31e6, rel=2e-3)


def test_echo_noiseless_recovery():
    r = fit_stretched_exponential(synth.echo_decay())
    _assert_close(r.params(), _truth(STRETCHED_EXP, synth.echo_params()), 1e-6)


def test_rabi_noiseless_recovery():
    r = fit_rabi(synth.rabi_trace())
    _assert_close(r.params(), _truth(RABI, synth.rabi_params()), 1e-6)
    assert r.contrast == pytest.approx(0.312, rel=1e-6)


def test_backaction_noiseless_recovery():
    r = fit_backaction(synth.backaction_points(), A.kappa, A.omega_m)
    assert r.g0 / TWO_PI == pytest.approx(216e3, rel=1e-10)
    assert r.gamma_i / TWO_PI == pytest.approx(28e3, rel=1e-10)
    for side, f in r.per_side.items():
        assert f.g0 / TWO_PI == pytest.approx(216e3, rel=1e-10)
    red, blue = r.per_side[Sideband.RED], r.per_side[Sideband.BLUE]
    assert red.slope == pytest.approx(-blue.slope, rel=1e-10)
    assert r.gamma_i == pytest.approx((red.gamma_i + blue.gamma_i) / 2, rel=1e-12)


# ---------------------------------------------------------------- idempotence

@pytest.mark.parametrize("fit, gen, model", [
    (fit_fano, lambda: synth.optical_spectrum(np.random.default_rng(1), 0.01), FANO),
    (fit_lorentzian_psd, lambda: synth.mechanical_spectrum(np.random.default_rng(1), 0.01), LORENTZIAN),
    (fit_stretched_exponential, lambda: synth.echo_decay(np.random.default_rng(1), 0.01), STRETCHED_EXP),
    (fit_rabi, lambda: synth.rabi_trace(np.random.default_rng(1), 0.01), RABI),
], ids=["fano", "lorentzian", "echo", "rabi"])
def test_fit_idempotence(fit, gen, model):
    noisy = gen()
    first = fit(noisy).params()
    p = np.array([first[k] for k in model.params])
    again = fit(Spectrum(noisy.x, model(noisy.x, p))).params()
    _assert_close(again, first, 1e-8)


def test_backaction_idempotence():
    pts = synth.backaction_points(np.random.default_rng(3), 0.01)
    r = fit_backaction(pts, A.kappa, A.omega_m)
    regen = [(nc, float(backaction_linewidth(r.gamma_i, r.g0, nc, A.kappa, A.omega_m, s)), s) for nc, _, s, *_ in pts]
    r2 = fit_backaction(regen, A.kappa, A.omega_m)
    assert r2.g0 == pytest.approx(r.g0, rel=1e-8)
    assert r2.gamma_i == pytest.approx(r.gamma_i, rel=1e-8)


# ---------------------------------------------------------------- cross-model agreement

def test_fano_q0_matches_inverted_lorentzian():
    x = np.linspace(-10.0, 10.0, 301)
    k, c = 1.3, 0.4
    y = fano_reflection(x - c, 1.0, 0.6 * k / 2, 0.0, k)
    f = fit_fano(Spectrum(x, y), fixed_q=0.0)
    lor = fit_lorentzian_psd(Spectrum(x, -y))
    assert f.omega_o == pytest.approx(lor.omega_m, rel=1e-6)
    assert f.kappa == pytest.approx(lor.gamma_m, rel=1e-6)


def test_uncertainty_scales_as_inverse_sqrt_n():
    ns = np.array([100, 200, 400, 800, 1600])
    errs = []
    for n in ns:
        e = [fit_lorentzian_psd(synth.mechanical_spectrum(np.random.default_rng(s), 0.01, n=n)).uncertainties["gamma_m"]
             for s in range(5)]
        errs.append(np.mean(e))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(-0.5, rel=0.1)


# ---------------------------------------------------------------- failure modes

def test_fano_flat_spectrum_is_singular_in_q():
    x = np.linspace(1.0, 2.0, 50)
    with pytest.raises(SingularJacobianError) as exc:
        fit_fano(Spectrum(x, np.ones(50)))
    assert exc.value.parameter == "q"


def test_fano_dip_outside_scan():
    with pytest.raises(ResonanceNotCapturedError, match="resonance not captured"):
        fit_fano(synth.optical_spectrum(np.random.default_rng(0), 0.01, offset=12.0))
    with pytest.raises(ResonanceNotCapturedError):
        fit_fano(synth.optical_spectrum(offset=6.0, span=5.0))


def test_lorentzian_offset_only_is_singular():
    with pytest.raises(SingularJacobianError):
        fit_lorentzian_psd(Spectrum(np.linspace(0, 1, 40), np.full(40, 2.0)))


def test_lorentzian_peak_at_boundary():
    x = np.linspace(0, 10, 60)
    with pytest.raises(ResonanceNotCapturedError):
        fit_lorentzian_psd(Spectrum(x, 1 / (1 + (x - 10.0) ** 2)))


def test_lorentzian_under_resolved_warning():
    x = np.linspace(-50, 50, 101)
    r = fit_lorentzian_psd(Spectrum(x, 1.0 + 5.0 / (1 + (2 * x / 1.2) ** 2)))
    assert any("under-resolved" in w for w in r.warnings)


def test_echo_domain_and_singular_errors():
    t = np.linspace(0.0, 1.0, 20)
    with pytest.raises(ValueError):
        fit_stretched_exponential(Spectrum(t, np.exp(-t)))
    with pytest.raises(ValueError):
        fit_stretched_exponential(Spectrum(t[1:5], np.exp(-t[1:5])))
    with pytest.raises(SingularJacobianError):
        fit_stretched_exponential(Spectrum(t[1:], np.full(19, 0.3)))


def test_rabi_flat_trace_has_no_oscillation():
    t = np.linspace(0, 400e-9, 201)
    with pytest.raises(NoOscillationError):
        fit_rabi(Spectrum(t, np.ones_like(t)))
    noise = 1 + 0.01 * np.random.default_rng(0).standard_normal(t.size)
    with pytest.raises(NoOscillationError):
        fit_rabi(Spectrum(t, noise))


def test_backaction_two_points_exact_line():
    pts = synth.backaction_points(red_nc=np.array([1000.0, 30000.0]), blue_nc=np.array([]))
    r = fit_backaction(pts, A.kappa, A.omega_m)
    assert np.max(np.abs(r.per_side[Sideband.RED].residuals)) < 1e-6
    assert r.g0 / TWO_PI == pytest.approx(216e3, rel=1e-10)
    assert math.isnan(r.uncertainties["g0"])


def test_backaction_single_nc_is_singular():
    pts = [(500.0, 2e5, Sideband.RED), (500.0, 2.1e5, Sideband.RED), (500.0, 1.9e5, Sideband.RED)]
    with pytest.raises(SingularJacobianError) as exc:
        fit_backaction(pts, A.kappa, A.omega_m)
    assert exc.value.parameter == "g0"


def test_backaction_wrong_sign_slope():
    pts = [(100.0, 3e5, Sideband.RED), (1000.0, 2e5, Sideband.RED)]
    with pytest.raises(FitError, match="sign"):
        fit_backaction(pts, A.kappa, A.omega_m)


def test_kappa_e_branches():
    k = 5.0
    r = (1 - 2 * 2.0 / k) ** 2
    assert kappa_e_from_contrast(k, r, 1.0, "under") == pytest.approx(2.0)
    assert kappa_e_from_contrast(k, r, 1.0, "over") == pytest.approx(3.0)
    with pytest.raises(ValueError):
        kappa_e_from_contrast(k, 2.0, 1.0)


@settings(max_examples=25)
@given(q=st.floats(-0.8, 0.8), depth=st.floats(0.2, 0.95))
def test_fano_noiseless_recovery_property(q, depth):
    k = float(A.kappa)
    x = float(A.omega_o) + k * np.linspace(-5, 5, 400)
    p = np.array([1.0, depth * k / 2, q, k, float(A.omega_o)])
    y = FANO(x, p)
    if np.argmin(y) in (0, y.size - 1):
        return
    got = fit_fano(Spectrum(x, y)).params()
    _assert_close(got, _truth(FANO, p), 1e-6)
