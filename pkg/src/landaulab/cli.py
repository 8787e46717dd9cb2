"""Command-line entry point: validate, run, compare, and experiment shortcuts.

One run per process, one config file per run.  `run` dispatches on the config's
experiment kind; the named shortcuts (`roots`, `penrose`, `green`, `echo`,
`certify`) are `run` with the experiment overridden.  Exit codes: 0 success,
2 certificate failure, 1 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from . import echoes, linear, output
from .config import load_config
from .dynamics import simulate
from .errors import BlowUpError, ConfigError, LandauLabError
from .norms import check_gronwall, f_norm_from_modes, radius


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 1
    except LandauLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(prog="landaulab",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_like(name, help_text, experiment=None):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration (TOML or JSON)")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (recorded; numpy vectorisation does the work)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomised sweeps (recorded in the manifest)")
        p.set_defaults(handler=lambda a, exp=experiment: _cmd_run(a, exp))
        return p

    v = sub.add_parser("validate", help="validate a config file and exit")
    v.add_argument("--config", required=True)
    v.set_defaults(handler=_cmd_validate)

    add_run_like("run", "run the experiment named in the config")
    for name in ("free", "simulate", "roots", "penrose", "green", "echo",
                 "certify", "norms-report"):
        add_run_like(name, f"run a config as the {name} experiment", experiment=name)

    cp = sub.add_parser("compare", help="relative sup-norm diffs between two run outputs")
    cp.add_argument("manifest_a")
    cp.add_argument("manifest_b")
    cp.add_argument("--keys", default="abs", help="comma-separated fields.csv columns")
    cp.set_defaults(handler=_cmd_compare)
    return parser


def _cmd_validate(args) -> int:
    load_config(args.config)
    print("ok")
    return 0


def _cmd_run(args, experiment_override=None) -> int:
    cfg = load_config(args.config)
    if experiment_override is not None and cfg.experiment != experiment_override:
        cfg.experiment = experiment_override
    out_dir = Path(args.out) if args.out else Path(cfg.output["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = output.new_manifest(Path(args.config).read_bytes(), __version__)
    manifest.flags["experiment"] = cfg.experiment
    manifest.flags["seed"] = args.seed
    manifest.flags["threads"] = args.threads

    with output.OutputLock(out_dir):
        status = 0
        try:
            runner = _RUNNERS[cfg.experiment]
            status = runner(cfg, out_dir, manifest)
        except BlowUpError as exc:
            manifest.flags["blowup"] = {"time": exc.time, "mode": exc.mode}
            status = 1
        manifest.finish(status)
        manifest.write(out_dir / "manifest.json")
    return status


def _cmd_compare(args) -> int:
    man_a = output.load_manifest(args.manifest_a)
    man_b = output.load_manifest(args.manifest_b)
    base_a = Path(args.manifest_a).parent
    base_b = Path(args.manifest_b).parent
    names_a = {f["path"] for f in man_a["files"]}
    names_b = {f["path"] for f in man_b["files"]}
    report = {}
    for name in sorted(names_a & names_b):
        if not name.endswith(".csv"):
            continue
        cols_a = output.read_csv_columns(base_a / name)
        cols_b = output.read_csv_columns(base_b / name)
        for key in args.keys.split(","):
            key = key.strip()
            if key in cols_a and key in cols_b:
                report[f"{name}:{key}"] = output.compare_histories(cols_a, cols_b, key)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# ----------------------------------------------------------------------------
# experiment runners
# ----------------------------------------------------------------------------

def _run_dynamics(cfg, out_dir, manifest) -> int:
    snap_dir = out_dir / "snapshots" if cfg.output.get("snapshots", "none") != "none" else None
    sim_cfg = cfg.simulation_config(snapshot_dir=snap_dir)
    result = simulate(sim_cfg)

    manifest.add_file(output.write_fields_csv(out_dir / "fields.csv", result.field))
    if sim_cfg.weights is not None:
        _write_norm_outputs(cfg, result, out_dir, manifest)
    for snap in result.snapshots:
        manifest.add_file(snap)
    manifest.flags["epsilon0"] = result.epsilon0
    manifest.flags["c0"] = result.c0
    manifest.flags["tail_fraction_max"] = (
        float(np.max(result.tail_fraction)) if result.tail_fraction is not None
        and result.tail_fraction.size else 0.0)
    if sim_cfg.weights is not None:
        manifest.flags["cond_lambda"] = bool(result.cond_lambda_ok)
        gen_ok = _gronwall_flag(result)
        manifest.flags["generator_bound"] = gen_ok
    return 0


def _gronwall_flag(result) -> bool:
    """Integral form of the transport inequality: Gen(t) <= Gen(0) + C0 int F ds."""
    if not result.gen_samples or result.field.f_values is None:
        return True
    times = result.field.times
    f_vals = result.field.f_values
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (f_vals[1:] + f_vals[:-1]) * np.diff(times))])
    gen0 = result.gen_samples[0].value
    tol = 1e-3 * max(gen0, 1e-300)
    for s in result.gen_samples:
        i = result.field.index_of(s.time)
        if s.value > gen0 + result.c0 * cum[i] + tol:
            return False
    return True


def _write_norm_outputs(cfg, result, out_dir, manifest):
    params = result.config.weights
    cp_times = result.checkpoint_times
    lam = radius(params, cp_times)
    f_at_cp = np.array([result.field.f_values[result.field.index_of(t)] for t in cp_times])
    gen0 = np.array([s.breakdown[0] for s in result.gen_samples])
    gen1 = np.array([s.breakdown[1] if len(s.breakdown) > 1 else np.nan
                     for s in result.gen_samples])
    resid = _gronwall_residuals(result)
    manifest.add_file(output.write_norms_csv(
        out_dir / "norms.csv", cp_times, lam, f_at_cp, gen0, gen1, resid))


def _gronwall_residuals(result):
    """Max-over-z finite-difference residual of the transport inequality per checkpoint."""
    params = result.config.weights
    cp_times = np.asarray(result.checkpoint_times)
    n_t = cp_times.size
    if n_t < 3 or result.gen_grid is None:
        return np.full(n_t, np.nan)
    zs = result.gen_zs
    f_tz = np.array([[f_norm_from_modes(result.field.modes,
                                        result.field.amplitudes(result.field.index_of(t)),
                                        params, t, z) for z in zs] for t in cp_times])
    return check_gronwall(cp_times, zs, result.gen_grid, f_tz, result.c0)


def _run_roots(cfg, out_dir, manifest) -> int:
    profile = cfg.profile()
    alpha = cfg.riesz["alpha"]
    box = cfg.linear["box"]
    records = []
    for k in cfg.linear["probes"]:
        roots = linear.find_roots(profile, alpha, k,
                                  (box["re_min"], box["re_max"]),
                                  (box["im_min"], box["im_max"]))
        records.append({"k": k, "roots": [
            {"re": r.lam.real, "im": r.lam.imag, "residual": r.residual,
             "iterations": r.iterations} for r in roots]})
    manifest.add_file(output.write_json(out_dir / "roots.json",
                                        {"alpha": alpha, "records": records}))
    return 0


def _run_penrose(cfg, out_dir, manifest) -> int:
    profile = cfg.profile()
    alpha = cfg.riesz["alpha"]
    verdict = linear.penrose_verdict(profile, alpha, cfg.linear["k_list"])
    payload = {"alpha": alpha, "verdict": "stable" if verdict.stable else "unstable",
               "windings": {str(k): w for k, w in verdict.windings.items()}}
    if not verdict.stable:
        payload["k"] = verdict.unstable_k
        payload["root"] = {"re": verdict.root.lam.real, "im": verdict.root.lam.imag,
                           "residual": verdict.root.residual}
    manifest.add_file(output.write_json(out_dir / "penrose.json", payload))
    manifest.flags["stable"] = verdict.stable
    return 0


def _run_green(cfg, out_dir, manifest) -> int:
    profile = cfg.profile()
    alpha = cfg.riesz["alpha"]
    t_max = cfg.linear["t_max"]
    dt = cfg.linear["dt"]
    times = np.arange(int(round(t_max / dt)) + 1) * dt
    summary = []
    for k in cfg.linear["k_list"]:
        kern = linear.green_kernel(profile, alpha, k, times)
        manifest.add_file(output.write_kernel_csv(out_dir / f"kernel_k{int(k)}.csv", kern))
        summary.append({"k": k, "fit_c": kern.fit_c, "fit_theta": kern.fit_theta,
                        "decay_rate": kern.decay_rate, "residual": kern.residual})
    manifest.add_file(output.write_json(out_dir / "green.json",
                                        {"alpha": alpha, "kernels": summary}))
    return 0


def _run_echo(cfg, out_dir, manifest) -> int:
    profile = cfg.profile()
    pulses = [(int(p["k"]), float(p["eta"]), complex(p["amplitude"]))
              for p in cfg.echo["pulses"]]
    exp = echoes.run_echo(profile, pulses, alpha=cfg.riesz["alpha"],
                          k_max=int(cfg.grid["K"]), t_final=float(cfg.grid["T"]),
                          dt=float(cfg.grid["dt"]),
                          mu_coupling=cfg.echo.get("mu_coupling", True))
    payload = {"pulses": [{"k": k, "eta": eta, "amplitude": abs(a)}
                          for k, eta, a in pulses],
               "t1": exp.t1, "t2": exp.t2, "t3": exp.t3, "echo_mode": exp.echo_mode,
               "found": exp.found, "peak_time": exp.peak_time,
               "peak_amplitude": exp.peak_amplitude,
               "rel_timing_error": exp.rel_timing_error}
    manifest.add_file(output.write_json(out_dir / "echo.json", payload))
    lines = ["t,abs_rho_echo"]
    for t, v in zip(exp.times, exp.series):
        lines.append(f"{output.FLOAT_FMT % t},{output.FLOAT_FMT % v}")
    manifest.add_file(output.atomic_write_text(out_dir / "echo_trace.csv",
                                               "\n".join(lines) + "\n"))
    manifest.flags["echo_found"] = exp.found
    return 0


def _run_certify(cfg, out_dir, manifest) -> int:
    params = cfg.weight_params()
    if params is None:
        raise ConfigError(["norms: certification needs the norms section"])
    ranges = echoes.SweepSpec(k_max=int(cfg.certify.get("k_max", 32)),
                              t_max=float(cfg.certify.get("t_max", 1e3)),
                              t_points=int(cfg.certify.get("t_points", 13)))
    cert = echoes.certify_bound(cfg.certify["bound"], params, ranges)
    payload = {"bound": cert.bound_id, "sup": cert.sup,
               "argmax": list(cert.argmax), "passed": cert.passed,
               "case_sups": cert.case_sups,
               "params": {"sigma": params.sigma, "lambda0": params.lambda0,
                          "delta": params.delta, "theta1": params.theta1,
                          "theta2": params.theta2},
               "sweep": {"k_max": ranges.k_max, "t_max": ranges.t_max,
                         "t_points": ranges.t_points}}
    manifest.add_file(output.write_json(out_dir / "certificate.json", payload))
    manifest.flags[f"certificate_{cert.bound_id}"] = cert.passed
    return 0 if cert.passed else 2


_RUNNERS = {
    "free": _run_dynamics,
    "simulate": _run_dynamics,
    "norms-report": _run_dynamics,
    "roots": _run_roots,
    "penrose": _run_penrose,
    "green": _run_green,
    "echo": _run_echo,
    "certify": _run_certify,
}


if __name__ == "__main__":
    sys.exit(main())
