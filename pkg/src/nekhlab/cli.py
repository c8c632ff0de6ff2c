"""Command-line front end: validated configs in, CSV/JSON/SVG + manifest out.

Exit codes: 0 on success, 1 on a runtime failure (message names the
failing cell or run), 2 on a config violation (message carries the JSON
path).  Every run writes a ``manifest.json`` (config hash, timestamps,
versions, outputs) into its output directory; the environment variable
``NEKH_LAB_OUT`` overrides ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import platform
import sys
from importlib import metadata, resources

from . import __version__
from .autonomize import diophantine_scan, verify_autonomization
from .config import (
    ConfigError,
    build_family,
    build_horizon,
    build_integrable,
    build_mechanical,
    build_state,
    build_stepper,
    build_system,
    content_hash,
    validate_config,
)
from .experiments import (
    _lift_for,
    drift_records_to_csv,
    drift_scan,
    fit_exponent,
    measure_drift,
    predicted_exponents,
    theorem2_experiment,
    theorem2_to_csv,
    verify_scaling_conjugacy,
)
from .integrators import integrate, trajectory_to_csv
from .steepness import check_steepness
from .svgplot import emit_plot

__all__ = ["main"]

_BUNDLED = {
    "simulate": "simulate_demo.json",
    "drift-scan": "drift_demo.json",
    "theorem2": "theorem2_demo.json",
    "scaling-check": "scaling_demo.json",
    "steepness": "steepness_demo.json",
    "autonomize-verify": "autonomize_demo.json",
    "diophantine": "diophantine_demo.json",
}

_CASE_ALIASES = {
    "convex": "convex",
    "convex-autonomous": "convex",
    "periodic": "periodic",
    "periodic-quasiconvex": "periodic",
    "quasiperiodic": "quasiperiodic",
    "quasiperiodic-conjectural": "quasiperiodic",
    "mechanical": "mechanical",
}


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _versions() -> dict:
    out = {"nekhlab": __version__,
           "python": platform.python_version()}
    for dist in ("numpy", "numba", "jsonschema"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:  # pragma: no cover
            out[dist] = "unknown"
    return out


def _load_command_config(command: str, config_arg) -> tuple[dict, str, str, str]:
    """Returns (config dict, hash, display path, source 'user'|'bundled')."""
    if config_arg is not None:
        try:
            with open(config_arg, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_arg}: {exc}") from exc
        source, shown = "user", str(config_arg)
    else:
        name = _BUNDLED[command]
        raw = (resources.files("nekhlab") / "configs" / name).read_bytes()
        source, shown = "bundled", f"bundled:{name}"
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{shown} is not valid JSON: {exc}") from exc
    validate_config(cfg, command)
    return cfg, content_hash(raw), shown, source


class _Run:
    """Output directory plus the manifest accumulated over a run."""

    def __init__(self, command: str, args, cfg_hash=None, cfg_path=None,
                 cfg_source=None):
        outdir = os.environ.get("NEKH_LAB_OUT") or args.out
        os.makedirs(outdir, exist_ok=True)
        self.outdir = outdir
        self.outputs: list[str] = []
        self.manifest = {
            "command": command,
            "config": None if cfg_hash is None else {
                "path": cfg_path, "source": cfg_source, "sha1": cfg_hash,
            },
            "started_utc": _utc_now(),
            "versions": _versions(),
            "jobs": getattr(args, "jobs", 1),
            "seed_override": getattr(args, "seed", None),
        }

    def path(self, name: str) -> str:
        self.outputs.append(name)
        return os.path.join(self.outdir, name)

    def write_json(self, name: str, payload: dict) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def finish(self) -> None:
        self.manifest["finished_utc"] = _utc_now()
        self.manifest["outputs"] = self.outputs
        with open(os.path.join(self.outdir, "manifest.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommand runners
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("simulate", args.config)
    run = _Run("simulate", args, chash, cpath, csrc)
    system = build_system(cfg["system"])
    state0 = build_state(cfg["state"])
    spec = build_stepper(cfg["stepper"])
    target, start = _lift_for(spec, system, state0)
    traj = integrate(
        target, start, cfg["t_final"], spec,
        stride=cfg.get("stride", 1),
        drift_threshold=cfg.get("drift_threshold"),
        stop_at_threshold=cfg.get("stop_at_threshold", False),
    )
    out = run.path("trajectory.csv")
    trajectory_to_csv(traj, target, out)
    run.finish()
    print(f"wrote {out}: {traj.n_steps} steps, sup drift {traj.drift_sup!r}")
    return 0


def _scan_failures(records) -> list[dict]:
    return [
        {"epsilon": r.epsilon, "seed": r.seed, "error": r.error}
        for r in records if r.error is not None
    ]


def _fit_or_raise(records, failures, **kw):
    try:
        return fit_exponent(records, **kw)
    except ValueError as exc:
        cells = ", ".join(f"(epsilon={f['epsilon']:g}, seed={f['seed']})"
                          for f in failures) or "none"
        raise RuntimeError(
            f"exponent fit impossible ({exc}); failed cells: {cells}"
        ) from exc


def _cmd_drift_scan(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("drift-scan", args.config)
    run = _Run("drift-scan", args, chash, cpath, csrc)
    family = build_family(cfg["family"])
    horizon = build_horizon(cfg["horizon"])
    spec = build_stepper(cfg["stepper"])
    master_seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    records = drift_scan(
        family, cfg["epsilon_grid"], horizon, cfg["seeds"], spec=spec,
        threshold=cfg.get("threshold"), master_seed=master_seed,
        jobs=args.jobs,
    )
    csv_path = run.path("drift_scan.csv")
    drift_records_to_csv(records, csv_path)
    failures = _scan_failures(records)
    fit = _fit_or_raise(records, failures)
    run.write_json("drift_scan_summary.json", {
        "fit": fit.to_dict(),
        "epsilon_grid": cfg["epsilon_grid"],
        "horizon": horizon.to_dict(),
        "seeds": cfg["seeds"],
        "master_seed": master_seed,
        "stepper": {"method": spec.method, "dt": spec.dt},
        "n_records": len(records),
        "failures": failures,
        "config_sha1": chash,
    })
    if args.plot:
        emit_plot(csv_path, "drift-scan")
        run.outputs.append("drift_scan.svg")
    run.finish()
    print(f"wrote {csv_path}: {len(records)} records "
          f"({len(failures)} failed); b_hat={fit.slope!r} r2={fit.r_squared!r}")
    return 0


def _cmd_theorem2(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("theorem2", args.config)
    run = _Run("theorem2", args, chash, cpath, csrc)
    mech = build_mechanical(cfg["mechanical"])
    horizon = build_horizon(cfg["horizon"])
    spec = build_stepper(cfg["stepper"])
    master_seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    result = theorem2_experiment(
        mech, cfg["R_grid"], cfg["seeds"], horizon_rule=horizon, spec=spec,
        master_seed=master_seed, jobs=args.jobs,
    )
    csv_path = run.path("theorem2.csv")
    theorem2_to_csv(result, csv_path)
    failures = [
        {"R": r.R, "seed": r.seed, "error": r.error}
        for r in result.records if r.error is not None
    ]
    run.write_json("theorem2_summary.json", {
        "fit": result.fit.to_dict(),
        "slope_prediction": result.slope_prediction,
        "n": result.n,
        "p": result.p,
        "R_grid": cfg["R_grid"],
        "horizon": horizon.to_dict(),
        "seeds": cfg["seeds"],
        "master_seed": master_seed,
        "stepper": {"method": spec.method, "dt": spec.dt},
        "failures": failures,
        "config_sha1": chash,
    })
    if args.plot:
        emit_plot(csv_path, "theorem2")
        run.outputs.append("theorem2.svg")
    run.finish()
    print(f"wrote {csv_path}: {len(result.records)} records; "
          f"slope={result.fit.slope!r} (guide {result.slope_prediction!r})")
    return 0


def _cmd_scaling_check(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("scaling-check", args.config)
    if args.p is not None:
        cfg["mechanical"]["p"] = args.p
        validate_config(cfg, "scaling-check")
    if args.R is not None:
        cfg["R"] = args.R
        validate_config(cfg, "scaling-check")
    run = _Run("scaling-check", args, chash, cpath, csrc)
    mech = build_mechanical(cfg["mechanical"])
    state0 = build_state(cfg["state"])
    spec = build_stepper(cfg["stepper"])
    check = verify_scaling_conjugacy(
        mech, cfg["R"], state0, cfg["t_prime"], spec,
        n_field_points=cfg.get("n_field_points", 100),
        field_seed=cfg.get("field_seed", 0),
    )
    run.write_json("scaling_check.json", {
        "check": check.to_dict(),
        "config_sha1": chash,
    })
    run.finish()
    print(f"R={check.R!r} p={check.p}: trajectory deviation "
          f"{check.max_deviation!r}, field residual {check.field_residual!r} "
          f"over {check.n_field_points} points")
    return 0


def _cmd_steepness(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("steepness", args.config)
    run = _Run("steepness", args, chash, cpath, csrc)
    h = build_integrable(cfg["hamiltonian"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    constants = cfg.get("constants")
    report = check_steepness(
        h,
        k=cfg.get("k"),
        n_subspaces=cfg["n_subspaces"],
        n_curves_per=cfg["n_curves"],
        delta_grid=cfg.get("delta_grid"),
        constants=tuple(constants) if constants is not None else None,
        seed=seed,
    )
    path = run.path("steepness_report.json")
    report.save_json(path)
    run.finish()
    for rec in report.records:
        print(f"k={rec.k}: worst margin {rec.worst_margin!r}, "
              f"{rec.n_violations} violating curves")
    verdict = "no counterexample found" if report.passed else "COUNTEREXAMPLE found"
    print(f"{report.h_label}: {verdict} (report: {path})")
    return 0


def _cmd_autonomize_verify(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("autonomize-verify", args.config)
    run = _Run("autonomize-verify", args, chash, cpath, csrc)
    system = build_system(cfg["system"])
    state0 = build_state(cfg["state"])
    spec = build_stepper(cfg["stepper"]) if "stepper" in cfg else None
    check = verify_autonomization(system, state0, cfg["t_final"], spec,
                                  stride=cfg.get("stride", 1))
    run.write_json("autonomize_check.json", {
        "check": check.to_dict(),
        "config_sha1": chash,
    })
    run.finish()
    print(f"{check.form}: deviation {check.deviation!r}, energy drift "
          f"{check.energy_drift!r} over {check.steps} steps")
    return 0


def _cmd_diophantine(args) -> int:
    cfg, chash, cpath, csrc = _load_command_config("diophantine", args.config)
    run = _Run("diophantine", args, chash, cpath, csrc)
    rows = diophantine_scan(cfg["omega"], cfg["tau"], cfg["K_grid"])
    path = run.path("diophantine.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["K", "gamma_hat", "k_min"])
        for row in rows:
            writer.writerow([row["K"], repr(row["gamma_hat"]), row["k_min"]])
    run.finish()
    last = rows[-1]
    print(f"wrote {path}: gamma_hat={last['gamma_hat']!r} at K={last['K']} "
          f"(minimizer k=[{last['k_min']}])")
    return 0


def _cmd_exponents(args) -> int:
    case = _CASE_ALIASES.get(args.case)
    if case is None:
        raise ConfigError(f"$.case: unknown case {args.case!r}; expected one of "
                          f"{sorted(set(_CASE_ALIASES))}")
    table = predicted_exponents(args.n, case, tau=args.tau, p=args.p)
    for key in ("case", "n", "tau", "p", "a", "b", "drift_vs_R_slope",
                "status", "note"):
        if key in table:
            value = table[key]
            print(f"{key} = {value!r}" if not isinstance(value, str)
                  else f"{key} = {value}")
    if args.out is not None:
        run = _Run("exponents", args)
        run.write_json("exponents.json", table)
        run.finish()
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub, plot: bool = False, seed: bool = True, jobs: bool = True):
    sub.add_argument("--config", metavar="PATH",
                     help="JSON config file (default: the bundled demo)")
    sub.add_argument("--out", metavar="DIR", default=".",
                     help="output directory (NEKH_LAB_OUT overrides)")
    if jobs:
        sub.add_argument("--jobs", type=int, metavar="N",
                         default=os.cpu_count() or 1,
                         help="worker processes for scans")
    if seed:
        sub.add_argument("--seed", type=int, metavar="N", default=None,
                         help="override the config's master seed")
    if plot:
        sub.add_argument("--plot", action="store_true",
                         help="also write an SVG plot next to the CSV")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nekhlab",
        description="Near-integrable Hamiltonian stability experiments",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser(
        "simulate", help="integrate one trajectory to CSV"), seed=False,
        jobs=False)
    _add_common(subs.add_parser(
        "drift-scan", help="sup-drift scan over an epsilon grid"), plot=True)
    _add_common(subs.add_parser(
        "theorem2", help="drift of the rescaled mechanical family over R"),
        plot=True)
    sc = subs.add_parser("scaling-check",
                         help="verify the action/time rescaling conjugacy")
    _add_common(sc, seed=False, jobs=False)
    sc.add_argument("--p", type=int, metavar="P", default=None,
                    help="override the config's power p")
    sc.add_argument("--R", type=float, metavar="R", default=None,
                    help="override the config's scaling factor R")
    _add_common(subs.add_parser(
        "steepness", help="Monte Carlo steepness-constant search"), jobs=False)
    _add_common(subs.add_parser(
        "autonomize-verify", help="compare direct vs extended integration"),
        seed=False, jobs=False)
    _add_common(subs.add_parser(
        "diophantine", help="small-divisor constant scan"), seed=False,
        jobs=False)

    ex = subs.add_parser("exponents", help="print reference stability exponents")
    ex.add_argument("--n", type=int, required=True, help="degrees of freedom")
    ex.add_argument("--case", required=True,
                    help="convex | periodic | quasiperiodic | mechanical")
    ex.add_argument("--tau", type=float, default=None,
                    help="Diophantine exponent (quasiperiodic case)")
    ex.add_argument("--p", type=int, default=None,
                    help="power of the kinetic part (mechanical case)")
    ex.add_argument("--out", metavar="DIR", default=None,
                    help="also write exponents.json under DIR")
    return parser


_COMMANDS = {
    "simulate": _cmd_simulate,
    "drift-scan": _cmd_drift_scan,
    "theorem2": _cmd_theorem2,
    "scaling-check": _cmd_scaling_check,
    "steepness": _cmd_steepness,
    "autonomize-verify": _cmd_autonomize_verify,
    "diophantine": _cmd_diophantine,
    "exponents": _cmd_exponents,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # bad parameter combinations surfaced by library preconditions
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
