"""Derived figures of merit for the five tabulated devices at a 1 uW red-sideband pump."""
import argparse

from omckit.metrics import (
    DEVICES,
    PumpCondition,
    Sideband,
    cooperativity,
    intracavity_photons,
    qf_product,
    quality_factor,
    sideband_resolution,
)
from omckit.quantities import AngularFrequency


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p-in-w", type=float, default=1e-6)
    ap.add_argument("--g0-hz", type=float, default=216e3)
    args = ap.parse_args()
    g0 = AngularFrequency.from_hz(args.g0_hz)
    print(f"{'dev':>3} {'Qo':>10} {'Qm':>11} {'Qf [Hz]':>11} {'4wm/k':>7} {'nc':>9} {'C':>9}")
    for label, d in DEVICES.items():
        pump = PumpCondition.on_sideband(d, Sideband.RED, args.p_in_w, 1.0)
        nc = intracavity_photons(d, pump)
        q_m = quality_factor(d.omega_m, d.gamma_m)
        print(f"{label:>3} {quality_factor(d.omega_o, d.kappa):10.4g} {q_m:11.4g} "
              f"{qf_product(q_m, d.omega_m):11.4g} {sideband_resolution(d.omega_m, d.kappa):7.3f} "
              f"{nc:9.4g} {cooperativity(g0, nc, d.kappa, d.gamma_m):9.4g}")


if __name__ == "__main__":
    main()
