"""Command-line entry point: ``omc <command> ...``.

Exit codes: 0 success, 2 input/validation error, 3 fit failure,
4 optimization infeasible.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import synth
from .fitting import (
    FitError,
    ResonanceNotCapturedError,
    fit_backaction,
    fit_fano,
    fit_lorentzian_psd,
    fit_rabi,
    fit_stretched_exponential,
    kappa_e_from_contrast,
)
from .io import InputError, load_backaction_csv, load_config, load_spectrum_csv
from .metrics import (
    DEVICES,
    ParametricInstabilityError,
    SpinMechanicalInputs,
    cooperativity,
    intracavity_photons,
    qf_product,
    quality_factor,
    sideband_resolution,
    spin_decay_rate,
    spin_mech_cooperativity,
    zero_point_motion,
)
from .optimizer import (
    FitnessWindows,
    InfeasibleError,
    evaluate_design,
    ga_optimize,
    grid_search_mirror,
)
from .quantities import TWO_PI, AngularFrequency
from .report import build_report, dumps, qty
from .surrogate import (
    REFERENCE_MIRROR_CELL,
    DesignVector,
    cell_layers,
    mirror_gaps,
    write_band_csv,
    write_transmission_csv,
    _stack,
    default_range,
)

EXIT_OK, EXIT_INPUT, EXIT_FIT, EXIT_INFEASIBLE = 0, 2, 3, 4

SYNTHETIC_NOTE = ("measured traces are not public; reproduction checks use forward-model data "
                  "generated by 'omc synth' from the published parameters")


def _hz(omega, unc=None, unit="Hz"):
    return qty(omega / TWO_PI, unit, None if unc is None else unc / TWO_PI)


def _emit(report: dict, output: str | None) -> None:
    text = dumps(report)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_fit_optical(args) -> dict:
    spec = load_spectrum_csv(args.csv, "optical")
    r = fit_fano(spec)
    u = r.uncertainties
    results = {
        "lambda_o": qty(r.lambda_o_nm, "nm", r.lambda_o_nm * u["omega_o"] / r.omega_o),
        "omega_o_over_2pi": _hz(r.omega_o, u["omega_o"]),
        "kappa_over_2pi": _hz(r.kappa, u["kappa"]),
        "fano_q": qty(r.q, "1", u["q"]),
        "y0": qty(r.y0, "detector units", u["y0"]),
        "a0": qty(r.a0, "detector units * rad/s", u["a0"]),
        "q_o": qty(r.q_o, "1", r.q_o_uncertainty),
        "residual_norm": qty(r.residual_norm, "detector units"),
    }
    warnings = []
    if args.dip_contrast:
        r_off = r.y0
        r_min = r.y0 - 2.0 * r.a0 / r.kappa  # minimum of the symmetric part of the dip
        try:
            results["kappa_e_undercoupled_over_2pi"] = _hz(kappa_e_from_contrast(r.kappa, r_min, r_off, "under"))
            results["kappa_e_overcoupled_over_2pi"] = _hz(kappa_e_from_contrast(r.kappa, r_min, r_off, "over"))
            warnings.append("kappa_e from dip contrast assumes a symmetric (q = 0) dip and cannot distinguish "
                            "under- from overcoupling; both branches reported, convention-dependent")
        except ValueError as exc:
            warnings.append(f"kappa_e not estimated: {exc}")
    return build_report("fit-optical", {"csv": Path(args.csv).name, "dip_contrast": args.dip_contrast},
                        [args.csv], results, [SYNTHETIC_NOTE, "linewidths are FWHM"], warnings)


def cmd_fit_mechanical(args) -> dict:
    spec = load_spectrum_csv(args.csv, "mechanical")
    r = fit_lorentzian_psd(spec)
    u = r.uncertainties
    results = {
        "omega_m_over_2pi": _hz(r.omega_m, u["omega_m"]),
        "gamma_m_over_2pi": _hz(r.gamma_m, u["gamma_m"]),
        "q_m": qty(r.q_m, "1", r.q_m_uncertainty),
        "qf_product": qty(qf_product(r.q_m, r.omega_m), "Hz", qf_product(r.q_m_uncertainty, r.omega_m)),
        "amplitude": qty(r.amplitude, "detector units", u["amplitude"]),
        "offset": qty(r.offset, "detector units", u["offset"]),
        "residual_norm": qty(r.residual_norm, "detector units"),
    }
    return build_report("fit-mechanical", {"csv": Path(args.csv).name}, [args.csv], results,
                        [SYNTHETIC_NOTE, "linewidths are FWHM"], r.warnings)


def _device_for(args):
    if args.config:
        cfg = load_config(args.config)
        if cfg.device is None:
            raise InputError(f"{args.config}: no device section")
        return cfg.device, [args.config]
    return DEVICES[args.device], []


def cmd_backaction(args) -> dict:
    points = load_backaction_csv(args.csv)
    dev, extra_inputs = _device_for(args)
    r = fit_backaction(points, dev.kappa, dev.omega_m)
    results = {
        "g0_pooled_over_2pi": _hz(r.g0, r.uncertainties["g0"]),
        "gamma_i_pooled_over_2pi": _hz(r.gamma_i, r.uncertainties["gamma_i"]),
        "sideband_resolution": qty(sideband_resolution(dev.omega_m, dev.kappa), "1"),
        "per_side": {
            side.value: {
                "g0_over_2pi": _hz(f.g0, f.uncertainties["g0"]),
                "gamma_i_over_2pi": _hz(f.gamma_i, f.uncertainties["gamma_i"]),
                "slope_over_2pi": qty(f.slope / TWO_PI, "Hz per photon"),
                "rms_residual_over_2pi": _hz(float(np.sqrt(np.mean(f.residuals ** 2)))),
            } for side, f in r.per_side.items()
        },
        "n_points": {side.value: qty(int(v.size), "count") for side, v in r.residuals.items()},
    }
    prov = [SYNTHETIC_NOTE, f"device {dev.label}: kappa and omega_m taken from the device record",
            "pooled fit shares gamma_i and g0 across sidebands"]
    if args.nc is not None:
        c = cooperativity(r.g0, args.nc, dev.kappa, r.gamma_i)
        results["cooperativity"] = qty(c, "1")
        results["cooperativity_nc"] = qty(args.nc, "photons")
        prov.append("cooperativity uses the pooled g0 and the fitted intrinsic linewidth gamma_i")
    return build_report("backaction", {"csv": Path(args.csv).name, "device": None if args.config else args.device,
                                       "config": Path(args.config).name if args.config else None, "nc": args.nc},
                        [args.csv] + extra_inputs, results, prov)


def cmd_spin(args) -> dict:
    spec = load_spectrum_csv(args.csv, "time")
    if args.kind == "echo":
        r = fit_stretched_exponential(spec)
        u = r.uncertainties
        results = {
            "t2": qty(r.t2, "s", u["t2"]),
            "stretch_n": qty(r.stretch_n, "1", u["stretch_n"]),
            "amplitude": qty(r.amplitude, "detector units", u["amplitude"]),
            "baseline": qty(r.baseline, "detector units", u["baseline"]),
            "residual_norm": qty(r.residual_norm, "detector units"),
        }
    else:
        r = fit_rabi(spec)
        u = r.uncertainties
        results = {
            "contrast": qty(r.contrast, "1", u["contrast"]),
            "rabi_frequency_over_2pi": _hz(r.rabi_frequency, u["rabi_frequency"]),
            "decay": qty(r.decay, "1/s", u["decay"]),
            "pl0": qty(r.pl0, "counts", u["pl0"]),
            "residual_norm": qty(r.residual_norm, "counts"),
        }
    return build_report("spin", {"csv": Path(args.csv).name, "kind": args.kind}, [args.csv], results,
                        [SYNTHETIC_NOTE, "Rabi contrast is (PL0 - PL-1) / PL0"])


def _gap_dict(g):
    return {"lower_edge_over_2pi": _hz(g.lower_edge), "upper_edge_over_2pi": _hz(g.upper_edge),
            "midgap_over_2pi": _hz(g.mu), "width_over_2pi": _hz(g.delta), "fractional": qty(g.fractional, "1")}


def _cell_dict(c):
    return {k: qty(getattr(c, k), "nm") for k in ("a", "w", "hx", "hy", "t")}


def _write_bands(out: Path, cell, mat, prefix: str) -> None:
    for kind in ("optical", "acoustic"):
        layers = cell_layers(cell, mat, kind)
        lo, hi = default_range(layers)
        write_band_csv(out / f"{prefix}{kind}_band.csv", layers, np.linspace(lo, hi, 400))


def _design_dict(d: DesignVector):
    return {"mirror_cell": _cell_dict(d.mirror_cell), "n_mirror": qty(d.n_mirror, "count"),
            "n_taper": qty(d.n_taper, "count"), "defect_scale": qty(d.defect_scale, "1"),
            "taper_exponents": qty(list(d.taper_exponents), "1")}


def _evaluation_dict(ev):
    out = {"fitness": qty(ev.fitness, "rad/s"), "failure": ev.failure}
    i = ev.info
    if i:
        out.update({
            "omega_o_over_2pi": qty(i["omega_o_hz"], "Hz"), "q_o": qty(i["q_o"], "1"),
            "omega_m_over_2pi": qty(i["omega_m_hz"], "Hz"), "g0_over_2pi": qty(i["g0_hz"], "Hz"),
            "window_optical": qty(i["window_optical"], "1"),
            "window_mechanical": qty(i["window_mechanical"], "1"),
        })
    return out


def cmd_design(args) -> dict:
    cfg = load_config(args.config)
    mat = cfg.material
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {"material": {"effective_slab_index": qty(mat.effective_slab_index, "1"),
                            "sound_speed": qty(mat.sound_speed, "m/s"),
                            "density": qty(mat.density, "kg/m^3")}}
    prov = ["1D transfer-matrix surrogate, calibrated (not predictive) against the reference mirror cell",
            "grid objective = product of optical and acoustic fractional gaps"]

    mirror = cfg.mirror_cell or REFERENCE_MIRROR_CELL
    if args.stage in ("grid", "both"):
        if cfg.grid is None:
            raise InputError(f"{args.config}: --stage {args.stage} needs a grid section")
        g = grid_search_mirror(cfg.grid, mat)
        mirror = g.best
        results["grid"] = {"best_cell": _cell_dict(g.best), "objective": qty(g.best_row.objective, "1"),
                           "optical_gap": _gap_dict(g.best_row.optical_gap),
                           "acoustic_gap": _gap_dict(g.best_row.acoustic_gap),
                           "n_points": qty(len(g.table), "count")}
        _write_grid_table(out / "grid_table.csv", g.table)
        _write_bands(out, g.best, mat, "")

    if args.stage in ("ga", "both"):
        windows = cfg.fitness_windows()
        if windows is None:
            og, ag = mirror_gaps(mirror, mat)
            windows = FitnessWindows.from_gaps(og, ag)
            prov.append("fitness windows from the mirror-cell band gaps")
        else:
            prov.append("fitness windows from config overrides")
        bounds = cfg.design_bounds(mirror)
        baseline_design = DesignVector(mirror, bounds.n_mirror, 0,
                                       0.5 * (bounds.defect_scale[0] + bounds.defect_scale[1]))
        baseline = evaluate_design(baseline_design, windows, mat)
        trace_path = out / "trace.jsonl"
        try:
            best, res = ga_optimize(cfg.ga, bounds, windows, mat)
        except InfeasibleError as exc:
            if exc.trace is not None:
                exc.trace.write(trace_path)
            raise
        res.trace.write(trace_path)
        full = _stack(best.all_cells(), mat, "optical")
        if res.best.info:
            w0 = TWO_PI * res.best.info["omega_o_hz"]
            half = 10.0 * w0 / res.best.info["q_o"]
        else:
            w0, half = windows.mu_o, windows.delta_o / 2
        write_transmission_csv(out / "transmission.csv", full, mat.effective_slab_index,
                               np.linspace(w0 - half, w0 + half, 2001))
        results["ga"] = {
            "config": {k: qty(v, "1" if isinstance(v, float) else "count") for k, v in asdict(cfg.ga).items()},
            "bounds": {"defect_scale": qty(list(bounds.defect_scale), "1"),
                       "taper_exponent": qty(list(bounds.taper_exponent), "1"),
                       "n_mirror": qty(bounds.n_mirror, "count"), "n_taper": qty(bounds.n_taper, "count")},
            "windows": {"mu_o_over_2pi": _hz(windows.mu_o), "delta_o_over_2pi": _hz(windows.delta_o),
                        "mu_m_over_2pi": _hz(windows.mu_m), "delta_m_over_2pi": _hz(windows.delta_m)},
            "winner": {"design": _design_dict(best), "evaluation": _evaluation_dict(res.best)},
            "baseline": {"design": _design_dict(baseline_design), "evaluation": _evaluation_dict(baseline),
                         "description": "abrupt defect (no taper) at the midpoint defect_scale"},
            "best_fitness_per_generation": qty(res.trace.best_fitness, "rad/s"),
            "n_evaluations": qty(res.n_evaluations, "count"),
        }
        prov.append(f"GA seed {cfg.ga.rng_seed}; trace in trace.jsonl")
    return build_report("design", {"config": Path(args.config).name, "stage": args.stage},
                        [args.config], results, prov)


def _write_grid_table(path, table):
    import csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a_nm", "hx_nm", "hy_nm", "optical_fractional_gap", "acoustic_fractional_gap", "objective"])
        for r in table:
            w.writerow([f"{r.cell.a:.12g}", f"{r.cell.hx:.12g}", f"{r.cell.hy:.12g}",
                        f"{r.optical_gap.fractional:.12g}" if r.optical_gap else "",
                        f"{r.acoustic_gap.fractional:.12g}" if r.acoustic_gap else "",
                        f"{r.objective:.12g}" if r.objective is not None else ""])


def cmd_metrics(args) -> dict:
    cfg = load_config(args.config)
    dev, pump, ms = cfg.device, cfg.pump, cfg.metrics
    if dev is None:
        raise InputError(f"{args.config}: metrics needs a device section")
    q_o = quality_factor(dev.omega_o, dev.kappa)
    q_m = quality_factor(dev.omega_m, dev.gamma_m)
    results = {
        "device": {"label": dev.label, "lambda_o": qty(dev.lambda_o, "nm"),
                   "kappa_over_2pi": _hz(dev.kappa), "kappa_e_over_2pi": _hz(dev.kappa_e),
                   "omega_m_over_2pi": _hz(dev.omega_m), "gamma_m_over_2pi": _hz(dev.gamma_m)},
        "sideband_resolution": qty(sideband_resolution(dev.omega_m, dev.kappa), "1"),
        "q_o": qty(q_o, "1"),
        "q_m": qty(q_m, "1"),
        "qf_product": qty(qf_product(q_m, dev.omega_m), "Hz"),
    }
    prov = []
    if pump is not None:
        nc = intracavity_photons(dev, pump)
        g0 = AngularFrequency.from_hz(ms.g0_hz)
        if ms.cooperativity_gamma == "gamma_i":
            gamma = AngularFrequency.from_hz(ms.gamma_i_hz)
            prov.append(f"cooperativity uses gamma_i/2pi = {ms.gamma_i_hz:g} Hz from configuration")
        else:
            gamma = dev.gamma_m
            prov.append("cooperativity uses the device record gamma_m")
        results["intracavity_photons"] = qty(nc, "photons")
        results["cooperativity"] = qty(cooperativity(g0, nc, dev.kappa, gamma), "1")
        results["g0_over_2pi"] = qty(ms.g0_hz, "Hz")
    if ms.m_eff_kg is not None:
        results["x_zpf"] = qty(zero_point_motion(ms.m_eff_kg, dev.omega_m), "m")
    if ms.g_sm_hz is not None and ms.t2_s is not None:
        gs = spin_decay_rate(ms.t2_s, ms.spin_rate_convention)
        csm = spin_mech_cooperativity(SpinMechanicalInputs(AngularFrequency.from_hz(ms.g_sm_hz), gs, dev.gamma_m))
        results["spin_mechanical_cooperativity"] = qty(csm, "1")
        results["gamma_s"] = qty(float(gs), "rad/s")
        prov.append(f"spin decay rate from T2 with the '{ms.spin_rate_convention}' convention")
    return build_report("metrics", {"config": Path(args.config).name}, [args.config], results, prov)


def cmd_synth(args) -> int:
    if args.kind == "corpus":
        synth.write_corpus(args.out, args.seed, args.noise)
    else:
        synth.write_kind(args.kind, args.out, args.seed, args.noise)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omc", description="Optomechanical crystal design and characterization")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def with_output(sp):
        sp.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
        return sp

    sp = with_output(sub.add_parser("fit-optical", help="Fano fit of an optical reflection scan"))
    sp.add_argument("csv")
    sp.add_argument("--dip-contrast", action="store_true",
                    help="also estimate kappa_e from the dip contrast (convention-dependent)")
    sp.set_defaults(func=cmd_fit_optical)

    sp = with_output(sub.add_parser("fit-mechanical", help="Lorentzian fit of a mechanical PSD"))
    sp.add_argument("csv")
    sp.set_defaults(func=cmd_fit_mechanical)

    sp = with_output(sub.add_parser("backaction", help="fit linewidth versus photon number"))
    sp.add_argument("csv")
    sp.add_argument("--device", choices=sorted(DEVICES), default="A")
    sp.add_argument("--config", help="run config with a device section (overrides --device)")
    sp.add_argument("--nc", type=float, help="report the cooperativity at this photon number")
    sp.set_defaults(func=cmd_backaction)

    sp = with_output(sub.add_parser("spin", help="Rabi or Hahn-echo fit"))
    sp.add_argument("csv")
    sp.add_argument("--kind", choices=("rabi", "echo"), required=True)
    sp.set_defaults(func=cmd_spin)

    sp = with_output(sub.add_parser("design", help="mirror grid search and taper GA"))
    sp.add_argument("config")
    sp.add_argument("--stage", choices=("grid", "ga", "both"), default="both")
    sp.add_argument("--out-dir", default="design_output")
    sp.set_defaults(func=cmd_design)

    sp = with_output(sub.add_parser("metrics", help="figures of merit for a configured device"))
    sp.add_argument("config")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("synth", help="write forward-model CSV datasets")
    sp.add_argument("kind", choices=synth.KINDS + ("corpus",))
    sp.add_argument("out")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.01)
    sp.set_defaults(func=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        report = args.func(args)
        _emit(report, args.output)
        return EXIT_OK
    except (InputError, ParametricInstabilityError) as exc:
        print(f"omc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResonanceNotCapturedError as exc:
        print(f"omc: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except FitError as exc:
        print(f"omc: fit failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except InfeasibleError as exc:
        print(f"omc: optimization infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"omc: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
