"""Command-line benchmark harness.

Subcommands:
  run       one solve of a preset, writing results.csv / trace.json
            (and value_function.csv when sampling horizons are configured)
  sweep     a family of solves over lists of M and/or n, additionally
            writing orders.csv with observed log2-ratio convergence orders
  defaults  print the built-in configuration of every preset

Configuration is a flat key/value file with one section per preset
(configparser syntax); command-line flags override the file.  All numeric
output uses '.' as the decimal separator regardless of locale.  Exit codes:
0 converged, 2 no convergence, 3 configuration error.
"""

import argparse
import concurrent.futures
import configparser
import csv
import json
import sys
import time

import numpy as np

from .cg import CgOptions
from .errors import ConfigError, NoConvergence, ToptError
from .fem import heat_distributed_preset, heat_neumann_preset
from .grid import TimeGrid
from .newton import NewtonOptions, newton_solve, sample_value_function
from .ode import PENDULUM_OPTIMAL_TIME, pendulum_preset

#: per-preset defaults; `n` is the FEM subdivisions per side (N = (n+1)^2)
PRESET_DEFAULTS = {
    "pendulum": {
        "M": 10000, "n": 0, "nu0": 5.0, "tol": 0.0,
        "accelerate": True, "delta0": 0.0, "sample_nus": "",
        "M_list": "100,1000,10000", "n_list": "0",
    },
    "heat-distributed": {
        "M": 80, "n": 16, "nu0": 0.8, "tol": 0.0,
        "accelerate": True, "delta0": 0.0, "sample_nus": "",
        "M_list": "20,40,80", "n_list": "16",
    },
    "heat-neumann": {
        "M": 80, "n": 16, "nu0": 0.6, "tol": 0.0,
        "accelerate": True, "delta0": 0.0, "sample_nus": "",
        "M_list": "20,40,80", "n_list": "16",
    },
}

RESULT_COLUMNS = ["M", "N", "T_k", "abs_err", "newton_steps", "damped_steps",
                  "cg_steps_total", "wall_time"]


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def build_system(preset, n, delta0=0.0):
    """Instantiate a preset system; delta0 > 0 overrides the built-in radius."""
    if preset == "pendulum":
        system = pendulum_preset()
    elif preset == "heat-distributed":
        system = heat_distributed_preset(n)
    elif preset == "heat-neumann":
        system = heat_neumann_preset(n)
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    if delta0 > 0.0:
        system.delta0 = float(delta0)
    return system


def state_count(preset, n):
    """Mesh node count reported in the N column (states for the pendulum)."""
    if preset == "pendulum":
        return 2
    return (n + 1) ** 2


def load_config(args):
    """Merge built-in defaults, the config file, and CLI overrides."""
    preset = args.preset
    cp = None
    if args.config is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys are case-sensitive (M vs n)
        read = cp.read(args.config)
        if not read:
            raise ConfigError(f"cannot read config file {args.config!r}")
        if preset is None:
            sections = cp.sections()
            if len(sections) != 1:
                raise ConfigError(
                    "config file must have exactly one preset section when "
                    "--preset is not given"
                )
            preset = sections[0]
    if preset is None:
        raise ConfigError("no preset selected (use --preset or a config file)")
    if preset not in PRESET_DEFAULTS:
        raise ConfigError(f"unknown preset {preset!r}")

    cfg = dict(PRESET_DEFAULTS[preset])
    cfg["preset"] = preset
    if cp is not None and cp.has_section(preset):
        for key, raw in cp.items(preset):
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r} in [{preset}]")
            kind = type(PRESET_DEFAULTS[preset][key])
            try:
                if kind is bool:
                    cfg[key] = cp.getboolean(preset, key)
                else:
                    cfg[key] = kind(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc

    for key in ("M", "n", "nu0", "tol", "accelerate"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value

    if cfg["M"] < 1:
        raise ConfigError("M must be a positive integer")
    if cfg["nu0"] <= 0:
        raise ConfigError("nu0 must be positive")
    return cfg


def _parse_bool(text):
    value = {"true": True, "1": True, "yes": True,
             "false": False, "0": False, "no": False}.get(text.lower())
    if value is None:
        raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")
    return value


def _parse_int_list(text):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def _parse_float_list(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def solve_row(cfg, M, n):
    """One complete outer solve; returns (ResultRow dict, trace dict)."""
    system = build_system(cfg["preset"], n, cfg["delta0"])
    inner = CgOptions(accelerate=cfg["accelerate"])
    tol = cfg["tol"] if cfg["tol"] > 0 else None
    opts = NewtonOptions(nu0=cfg["nu0"], tol_delta=tol, inner=inner)
    start = time.perf_counter()
    trace = newton_solve(system, TimeGrid(M), opts)
    wall = time.perf_counter() - start
    row = {
        "M": M,
        "N": state_count(cfg["preset"], n),
        "T_k": trace.nu_final,
        "abs_err": None,
        "newton_steps": trace.newton_steps,
        "damped_steps": trace.damped_steps,
        "cg_steps_total": trace.total_cg_steps,
        "wall_time": wall,
    }
    trace_doc = {
        "preset": cfg["preset"],
        "M": M,
        "n": n,
        "nu_final": trace.nu_final,
        "delta_final": trace.delta_final,
        "status": trace.status,
        "newton_steps": trace.newton_steps,
        "damped_steps": trace.damped_steps,
        "cg_steps_total": trace.total_cg_steps,
        "records": trace.records,
        "inner_log": trace.solution.log if trace.solution is not None else [],
    }
    return row, trace_doc


def reference_time(cfg, rows):
    """Reference horizon for the error column.

    The pendulum has an analytic optimum; the heat presets use the finest
    run of the sweep (largest M, then largest N) as the reference, which is
    recorded in the trace metadata.
    """
    if cfg["preset"] == "pendulum":
        return PENDULUM_OPTIMAL_TIME, "analytic"
    best = max(rows, key=lambda r: (r["M"], r["N"]))
    return best["T_k"], f"finest run (M={best['M']}, N={best['N']})"


def write_results(out_dir, rows):
    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(_fmt(row[c]) if row[c] is not None else ""
                            for c in RESULT_COLUMNS)


def observed_orders(rows, axis):
    """log2-ratio convergence orders between consecutive sweep rows.

    ``axis`` is "M" or "N"; the rows must be sorted along it.  Pairs where
    either error vanishes (e.g. the reference row itself) are skipped.
    """
    orders = []
    for prev, cur in zip(rows, rows[1:]):
        e0, e1 = prev["abs_err"], cur["abs_err"]
        h_ratio = cur[axis] / prev[axis]
        if not e0 or not e1 or h_ratio <= 1.0:
            continue
        order = np.log2(e0 / e1) / np.log2(h_ratio)
        if axis == "N":
            # N grows like n^2 while the mesh width shrinks like 1/n
            order *= 2.0
        orders.append({axis: cur[axis], "order": float(order)})
    return orders


def write_value_function(out_dir, samples):
    with open(out_dir / "value_function.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nu", "delta"])
        for nu, delta, _ in samples:
            writer.writerow([_fmt(nu), _fmt(delta)])


def cmd_run(args):
    cfg = load_config(args)
    out_dir = _prepare_out(args.out)
    row, trace_doc = solve_row(cfg, cfg["M"], cfg["n"])
    if cfg["preset"] == "pendulum":
        row["abs_err"] = abs(row["T_k"] - PENDULUM_OPTIMAL_TIME)
        trace_doc["T_ref"] = PENDULUM_OPTIMAL_TIME
        trace_doc["T_ref_source"] = "analytic"
    write_results(out_dir, [row])
    with open(out_dir / "trace.json", "w") as fh:
        json.dump(trace_doc, fh, indent=1)
    if cfg["sample_nus"]:
        nus = _parse_float_list(cfg["sample_nus"])
        system = build_system(cfg["preset"], cfg["n"], cfg["delta0"])
        samples = sample_value_function(
            system, TimeGrid(cfg["M"]), nus,
            CgOptions(accelerate=cfg["accelerate"]))
        write_value_function(out_dir, samples)
    return 0


def cmd_sweep(args):
    cfg = load_config(args)
    out_dir = _prepare_out(args.out)
    M_list = sorted(set(args.M_list if args.M_list is not None
                        else _parse_int_list(cfg["M_list"])))
    n_list = sorted(set(args.n_list if args.n_list is not None
                        else _parse_int_list(cfg["n_list"])))
    if not M_list:
        raise ConfigError("sweep needs a nonempty M list")
    if not n_list:
        raise ConfigError("sweep needs a nonempty n list")
    combos = [(M, n) for M in M_list for n in n_list]
    build_system(cfg["preset"], max(n_list), cfg["delta0"])  # validate early

    if args.jobs > 1 and len(combos) > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            done = list(pool.map(solve_row, [cfg] * len(combos),
                                 [c[0] for c in combos],
                                 [c[1] for c in combos]))
    else:
        done = [solve_row(cfg, M, n) for M, n in combos]
    rows = [row for row, _ in done]
    traces = [trace for _, trace in done]

    t_ref, ref_source = reference_time(cfg, rows)
    for row in rows:
        row["abs_err"] = abs(row["T_k"] - t_ref)
    write_results(out_dir, rows)

    orders = []
    if len(M_list) > 1 and len(n_list) == 1:
        orders = observed_orders(rows, "M")
    elif len(n_list) > 1 and len(M_list) == 1:
        orders = observed_orders(rows, "N")
    with open(out_dir / "orders.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["M", "N", "order"])
        by = "M" if (len(M_list) > 1 and len(n_list) == 1) else "N"
        for entry, row in zip(orders, rows[1:]):
            writer.writerow([row["M"], row["N"], _fmt(entry["order"])])

    with open(out_dir / "trace.json", "w") as fh:
        json.dump({"T_ref": t_ref, "T_ref_source": ref_source,
                   "rows": traces}, fh, indent=1)
    return 0


def cmd_defaults(args):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for preset, values in PRESET_DEFAULTS.items():
        cp[preset] = {k: _fmt(v) for k, v in values.items()}
    cp.write(sys.stdout)
    return 0


def _prepare_out(out):
    import pathlib

    out_dir = pathlib.Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def make_parser():
    parser = argparse.ArgumentParser(
        prog="topt",
        description="benchmark harness for time-optimal control solves")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--preset",
                       help="pendulum | heat-distributed | heat-neumann")
        p.add_argument("--M", type=int, default=None,
                       help="number of time steps")
        p.add_argument("--n", type=int, default=None,
                       help="FEM subdivisions per side")
        p.add_argument("--nu0", type=float, default=None,
                       help="initial horizon for the outer Newton method")
        p.add_argument("--tol", type=float, default=None,
                       help="outer tolerance on the value function")
        p.add_argument("--accelerate", type=_parse_bool, default=None,
                       help="enable the fully corrective acceleration")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel solves during a sweep")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--config", default=None, help="config file")

    p_run = sub.add_parser("run", help="single solve")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="family of solves plus orders")
    add_common(p_sweep)
    p_sweep.add_argument("--M-list", type=_parse_int_list, default=None,
                         dest="M_list", help="comma-separated time step counts")
    p_sweep.add_argument("--n-list", type=_parse_int_list, default=None,
                         dest="n_list", help="comma-separated mesh sides")
    p_sweep.set_defaults(func=cmd_sweep)

    p_def = sub.add_parser("defaults", help="print built-in configuration")
    p_def.set_defaults(func=cmd_defaults)
    return parser


def _diagnostic(kind, exc):
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _diagnostic("config", exc)
        return 3
    except NoConvergence as exc:
        _diagnostic("no-convergence", exc)
        return 2
    except ToptError as exc:
        _diagnostic("solver", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
