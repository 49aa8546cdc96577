"""Coverage of the reported 1-sigma uncertainties over seeded synthetic datasets."""
import argparse

import numpy as np

from omckit import synth
from omckit.fitting import FANO, LORENTZIAN, RABI, STRETCHED_EXP, fit_backaction, fit_fano, fit_lorentzian_psd, \
    fit_rabi, fit_stretched_exponential
from omckit.metrics import DEVICES
from omckit.quantities import TWO_PI

A = DEVICES["A"]


def suites():
    def truth(model, p):
        return dict(zip(model.params, map(float, p)))

    def backaction(rng, noise):
        r = fit_backaction(synth.backaction_points(rng, noise), A.kappa, A.omega_m)
        r.params = lambda: {"g0": r.g0, "gamma_i": r.gamma_i}
        return r

    yield "fano", lambda rng, s: fit_fano(synth.optical_spectrum(rng, s)), truth(FANO, synth.fano_params())
    yield "lorentzian", lambda rng, s: fit_lorentzian_psd(synth.mechanical_spectrum(rng, s)), \
        truth(LORENTZIAN, synth.lorentzian_params())
    yield "echo", lambda rng, s: fit_stretched_exponential(synth.echo_decay(rng, s)), \
        truth(STRETCHED_EXP, synth.echo_params())
    yield "rabi", lambda rng, s: fit_rabi(synth.rabi_trace(rng, s)), truth(RABI, synth.rabi_params())
    yield "backaction", backaction, {"g0": TWO_PI * synth.G0_HZ, "gamma_i": TWO_PI * synth.GAMMA_I_HZ}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--noise", type=float, default=0.01)
    ap.add_argument("--k", type=float, default=3.0, help="coverage threshold in sigma")
    args = ap.parse_args()
    for name, fit, truth in suites():
        hits, pulls = 0, {n: [] for n in truth}
        for seed in range(args.seeds):
            r = fit(np.random.default_rng(seed), args.noise)
            got = r.params()
            z = {n: (got[n] - v) / r.uncertainties[n] for n, v in truth.items()}
            hits += all(abs(v) <= args.k for v in z.values())
            for n, v in z.items():
                pulls[n].append(v)
        spread = ", ".join(f"{n} {np.std(v):.2f}" for n, v in pulls.items())
        print(f"{name:>11}: {hits / args.seeds:.3f} within {args.k:g} sigma; pull std {spread}")


if __name__ == "__main__":
    main()
