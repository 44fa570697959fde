"""Command-line interface.

Subcommands mirror the standard experiments: constant-profile simulation,
equal-Ah cycling with a mass audit, observability sweeps, parameter
identification, and an FVM-vs-FDM scheme comparison.  All tabular output is
CSV; reports are JSON.  Nonzero exits carry a machine-readable error record
on stderr.

Exit codes: 0 ok, 2 usage, 3 missing file, 4 invalid config/data,
5 numerical blowup, 6 other runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import BlowupError, ConfigError, CsespmError, ParameterError
from .identify import Dataset, ParameterSubset, identify
from .observability import sweep
from .simulate import (LoadProfile, cycle_profile, initial_state,
                       mass_audit, simulate)

EXIT_MISSING_FILE = 3
EXIT_BAD_CONFIG = 4
EXIT_BLOWUP = 5
EXIT_RUNTIME = 6


def _error_record(code: int, exc: Exception) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def _load_config(args) -> RunConfig:
    if args.config is None:
        return RunConfig.default()
    return RunConfig.load(args.config)


def _events_csv(events, path):
    import csv as _csv
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["time_s", "kind", "r_p_pre_m", "r_p_post_m",
                    "pre_mass_mol", "post_mass_mol", "mass_error_rel"])
        for e in events:
            w.writerow([f"{e.time:.6f}", e.kind, f"{e.r_p_pre:.8e}",
                        f"{e.r_p_post:.8e}", f"{e.pre_mass:.10e}",
                        f"{e.post_mass:.10e}", f"{e.mass_error_rel:.3e}"])


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    profile = LoadProfile.from_csv(args.profile)
    solver = cfg.solver
    if args.no_cutoffs:
        solver = dataclasses.replace(solver, cutoffs_enabled=False)
    soc = args.soc if args.soc is not None else (
        cfg.initial_soc if cfg.initial_soc is not None else
        (0.0 if profile.currents[np.nonzero(profile.currents)[0][0]] < 0 else 1.0))
    direction = "ch" if profile.currents[np.nonzero(profile.currents)[0][0]] < 0 else "dis"
    init = initial_state(cfg.params, cfg.disc, soc, direction)
    result = simulate(profile, init, cfg.params, cfg.disc, solver,
                      ocp=cfg.ocp, phase_cfg=cfg.phase)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / "result.csv")
    _events_csv(result.events, out / "events.csv")
    report = mass_audit(result, cfg.params)
    (out / "summary.json").write_text(json.dumps({
        "status": result.status, "steps": len(result),
        "final_soc_p": float(result.soc_p[-1]),
        "final_voltage_V": float(result.voltage[-1]),
        "max_mass_drift_rel": report.max_drift_rel,
        "events": [e.kind for e in result.events]}, indent=2) + "\n")
    print(f"wrote {out / 'result.csv'} ({len(result)} records, status {result.status})")
    return 0


def cmd_cycle(args) -> int:
    cfg = _load_config(args)
    solver = dataclasses.replace(cfg.solver, cutoffs_enabled=args.enforce_cutoffs)
    profile = cycle_profile(cfg.params, args.crate, args.cycles)
    init = initial_state(cfg.params, cfg.disc, 0.0, "ch")
    result = simulate(profile, init, cfg.params, cfg.disc, solver,
                      ocp=cfg.ocp, phase_cfg=cfg.phase)
    report = mass_audit(result, cfg.params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / "result.csv")
    _events_csv(result.events, out / "events.csv")
    half = 3600.0 / args.crate
    boundaries = [k * 2 * half for k in range(args.cycles + 1)]
    idx = [int(np.searchsorted(result.time, b)) for b in boundaries if b <= result.time[-1]]
    peaks = {
        "cycle_boundary_times_s": [float(result.time[i]) for i in idx],
        "mass_pos_mol": [float(result.mass_pos[i]) for i in idx],
        "mass_neg_mol": [float(result.mass_neg[i]) for i in idx],
    }
    (out / "mass_report.json").write_text(json.dumps({
        "max_drift_rel": report.max_drift_rel,
        "max_pos_residual_rel": float(report.res_pos_rel.max()),
        "max_neg_residual_rel": float(report.res_neg_rel.max()),
        "max_elec_residual_rel": float(report.res_elec_rel.max()),
        "per_cycle": peaks}, indent=2) + "\n")
    print(f"wrote {out / 'result.csv'}; {report.summary()}")
    return 0


def cmd_observe(args) -> int:
    cfg = _load_config(args)
    disc = dataclasses.replace(cfg.disc, N_r=args.nr, scheme=args.scheme)
    profile = LoadProfile.from_csv(args.profile)
    direction = "ch" if profile.currents[np.nonzero(profile.currents)[0][0]] < 0 else "dis"
    soc = args.soc if args.soc is not None else (0.0 if direction == "ch" else 1.0)
    init = initial_state(cfg.params, disc, soc, direction)
    solver = dataclasses.replace(cfg.solver, cutoffs_enabled=False)
    result = simulate(profile, init, cfg.params, disc, solver,
                      ocp=cfg.ocp, phase_cfg=cfg.phase)
    obs_cfg = cfg.observability
    if args.stride is not None:
        obs_cfg = dataclasses.replace(obs_cfg, stride_s=args.stride)
    sw = sweep(result, cfg.params, obs_cfg, ocp=cfg.ocp, scheme=args.scheme)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sw.to_csv(out / "sweep.csv")
    full = sw.full_rank_everywhere()
    print(f"wrote {out / 'sweep.csv'} ({len(sw)} points, full rank everywhere: {full})")
    return 0


def cmd_identify(args) -> int:
    cfg = _load_config(args)
    datasets = []
    for spec_item in args.data.split(","):
        path = Path(spec_item.strip())
        if not path.exists():
            raise FileNotFoundError(f"dataset not found: {path}")
        datasets.append(Dataset.from_csv(path))
    subset = ParameterSubset.preset(args.subset, cfg.params, decades=args.decades)
    solver = dataclasses.replace(cfg.solver, cutoffs_enabled=False)
    fit = identify(datasets, subset, cfg.params, cfg.disc, solver,
                   seed=args.seed, budget=args.budget, ocp=cfg.ocp,
                   rate_overrides=cfg.rate_overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fit.json").write_text(json.dumps(fit.to_dict(), indent=2) + "\n")
    print(f"wrote {out / 'fit.json'} (best RMSE {1e3 * fit.best_rmse:.3f} mV "
          f"in {fit.n_evals} evaluations)")
    return 0


def cmd_compare_scheme(args) -> int:
    cfg = _load_config(args)
    profile = LoadProfile.from_csv(args.profile)
    direction = "ch" if profile.currents[np.nonzero(profile.currents)[0][0]] < 0 else "dis"
    soc = 0.0 if direction == "ch" else 1.0
    solver = dataclasses.replace(cfg.solver, cutoffs_enabled=False)
    results, sweeps, drifts = {}, {}, {}
    for scheme in ("fvm", "fdm"):
        disc = dataclasses.replace(cfg.disc, scheme=scheme, N_r=args.nr)
        init = initial_state(cfg.params, disc, soc, direction)
        res = simulate(profile, init, cfg.params, disc, solver,
                       ocp=cfg.ocp, phase_cfg=cfg.phase)
        results[scheme] = res
        drifts[scheme] = mass_audit(res, cfg.params).max_drift_rel
        sweeps[scheme] = sweep(res, cfg.params, cfg.observability,
                               ocp=cfg.ocp, scheme=scheme)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = min(len(results["fvm"]), len(results["fdm"]))
    import csv as _csv
    with open(out / "voltage_comparison.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["time_s", "voltage_fvm_V", "voltage_fdm_V"])
        for i in range(n):
            w.writerow([f"{results['fvm'].time[i]:.6f}",
                        f"{results['fvm'].voltage[i]:.8f}",
                        f"{results['fdm'].voltage[i]:.8f}"])
    sweeps["fvm"].to_csv(out / "cond_sweep_fvm.csv")
    sweeps["fdm"].to_csv(out / "cond_sweep_fdm.csv")
    dv = results["fvm"].voltage[:n] - results["fdm"].voltage[:n]
    summary = {
        "voltage_rms_diff_mV": float(1e3 * np.sqrt(np.mean(dv**2))),
        "mass_drift_rel": drifts,
        "median_log10_cond": {
            s: float(np.median(sweeps[s].finite_log10_cond())) for s in sweeps},
    }
    (out / "comparison.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {out / 'comparison.json'}: drift fvm {drifts['fvm']:.2e} "
          f"fdm {drifts['fdm']:.2e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="csespm",
        description="Core-shell single particle model: simulate, cycle, "
                    "observe, identify, compare-scheme")
    ap.add_argument("--version", action="version", version=f"csespm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", default=None, help="JSON run config (default: built-in)")
        sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("simulate", help="integrate a load profile")
    add_common(sp)
    sp.add_argument("--profile", required=True, help="load profile CSV (time_s,current_A)")
    sp.add_argument("--soc", type=float, default=None, help="initial SOC (default per direction)")
    sp.add_argument("--no-cutoffs", action="store_true", help="ignore voltage cutoffs")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("cycle", help="equal-Ah charge/discharge cycling with mass audit")
    add_common(sp)
    sp.add_argument("--crate", type=float, required=True)
    sp.add_argument("--cycles", type=int, required=True)
    sp.add_argument("--enforce-cutoffs", action="store_true",
                    help="stop at voltage cutoffs (off by default for equal-Ah audits)")
    sp.set_defaults(func=cmd_cycle)

    sp = sub.add_parser("observe", help="observability sweep along a profile")
    add_common(sp)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--nr", type=int, required=True, help="solid CV count")
    sp.add_argument("--scheme", choices=("fvm", "fdm"), default="fvm")
    sp.add_argument("--stride", type=float, default=None, help="sweep stride [s]")
    sp.add_argument("--soc", type=float, default=None)
    sp.set_defaults(func=cmd_observe)

    sp = sub.add_parser("identify", help="fit parameters to voltage data")
    add_common(sp)
    sp.add_argument("--data", required=True, help="dataset CSV path(s), comma separated")
    sp.add_argument("--subset", choices=("c4", "c2-1c"), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=500)
    sp.add_argument("--decades", type=float, default=1.0,
                    help="log-scale half width of the bounds")
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("compare-scheme", help="FVM vs FDM voltage, mass and conditioning")
    add_common(sp)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--nr", type=int, default=2,
                    help="solid CV/node count for the comparison")
    sp.set_defaults(func=cmd_compare_scheme)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _error_record(EXIT_MISSING_FILE, exc)
    except (ConfigError, ParameterError) as exc:
        return _error_record(EXIT_BAD_CONFIG, exc)
    except BlowupError as exc:
        return _error_record(EXIT_BLOWUP, exc)
    except CsespmError as exc:
        return _error_record(EXIT_RUNTIME, exc)


if __name__ == "__main__":
    sys.exit(main())
