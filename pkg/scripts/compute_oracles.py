"""Independent high-precision evaluations of the closed-form oracle values frozen in tests/.

Uses mpmath at 50 digits and repeats every formula from scratch, so it shares no
code with omckit. Run it and compare against the literals in tests/oracle_values.py.
"""
import mpmath as mp

mp.mp.dps = 50
HBAR = mp.mpf("1.054571817e-34")
C = mp.mpf(299792458)
TWO_PI = 2 * mp.pi


def ang(f_hz):
    return TWO_PI * mp.mpf(f_hz)


def main():
    out = {}
    out["omega_1576_87_hz"] = C / mp.mpf("1576.87e-9")
    out["omega_1550_hz"] = C / mp.mpf("1550e-9")

    kappa, kappa_e = ang("5.03e9"), ang("2.99e9")
    delta, omega_l = ang("-6.23e9"), ang("190.1e12")
    flux = mp.mpf("1e-6") / (HBAR * omega_l)
    out["nc_device_a_1uW"] = kappa_e / (delta ** 2 + kappa ** 2 / 4) * flux

    g0, om = ang("216e3"), ang("6.23e9")
    r = 4 * om / kappa
    factor = r ** 2 / (1 + r ** 2)
    out["sideband_factor_a"] = factor
    out["backaction_per_photon_hz"] = 4 * g0 ** 2 / kappa * factor / TWO_PI
    out["cooperativity_ac1"] = 4 * g0 ** 2 * 41000 / (kappa * ang("28e3"))
    out["sideband_resolution_a"] = r
    out["sideband_resolution_d"] = 4 * mp.mpf("6.22") / mp.mpf("2.15")
    out["q_o_a"] = ang(C / mp.mpf("1576.87e-9")) / kappa
    out["q_m_a"] = mp.mpf("6.23e9") / mp.mpf("3.28e3")
    out["qf_a_hz"] = out["q_m_a"] * mp.mpf("6.23e9")
    out["q_m_e"] = mp.mpf("6.18e9") / mp.mpf("3.79e3")
    out["x_zpf_1e-15kg"] = mp.sqrt(HBAR / (2 * mp.mpf("1e-15") * om))
    out["quarter_wave_fractional_gap"] = 4 / mp.pi * mp.asin(mp.mpf(1) / 3)
    out["window_at_edge"] = mp.e ** mp.mpf("-4.5")
    for gs_name, gs in (("inverse", 1 / mp.mpf("227e-6")), ("double", 2 / mp.mpf("227e-6")),
                        ("lorentzian_fwhm", 1 / (mp.pi * mp.mpf("227e-6")))):
        out[f"c_sm_{gs_name}"] = 4 * ang(132) ** 2 / (ang("3.28e3") * gs)
    for k, v in out.items():
        print(f"{k:32s} {mp.nstr(v, 17)}")


if __name__ == "__main__":
    main()
