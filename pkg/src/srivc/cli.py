"""Command line front end.

Subcommands: ``simulate`` synthesises records, ``estimate`` fits a model
to one record, ``mc-sweep`` runs a Monte Carlo study from a config file,
``analyze`` turns raw sweep results into summary tables and figures.

Exit codes: 0 success (including an estimate that merely failed to
converge, which is reported as a warning), 2 configuration or usage
errors, 3 singular normal equations, 4 I/O failures.  The environment
variable ``SRIVC_OUT_DIR`` supplies the directory for default output
paths; explicit paths are used as given.
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys
from pathlib import Path

import numpy as np

from srivc.ctlti import theta_from_tf
from srivc.estimator import (
    HoldPolicy,
    SingularNormalMatrix,
    SrivcConfig,
    srivc_estimate,
    write_result_csv,
)
from srivc.holdsim import Hold
from srivc.mcharness import (
    emit_plot_data,
    parse_sweep_config,
    read_raw_csv,
    run_mc_sweep,
    stable_hash,
    summarize,
    write_raw_csv,
    write_summary_csv,
    write_sweep_config,
)
from srivc.signals import (
    DEFAULT_MULTISINE_FREQS,
    NoiseSpec,
    gen_multisine,
    gen_prbs,
    gen_random_binary,
    parse_system,
    read_record,
    read_signal,
    synthesize_record,
    write_record,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_IO = 4


def _out_dir() -> Path:
    return Path(os.environ.get("SRIVC_OUT_DIR", "."))


def _parse_freqs(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(","))


def _cmd_simulate(args) -> int:
    system = parse_system(args.system)
    if args.input_file is not None:
        u = read_signal(args.input_file)
    else:
        if args.N is None or args.T is None:
            raise ValueError("need --N and --T unless --input-file is given")
        if args.input == "binary":
            u = gen_random_binary(args.N, args.amplitude, args.input_seed, args.T)
        elif args.input == "prbs":
            u = gen_prbs(args.N, args.amplitude, args.input_seed, args.T)
        else:
            t = args.T * np.arange(args.N)
            u = gen_multisine(t, args.freqs, args.amplitude)
    if args.hold == "analytic":
        if args.input != "multisine" or args.input_file is not None:
            raise ValueError(
                "analytic output generation is only defined for a generated "
                "multisine input"
            )
        true_hold = None
        freqs = args.freqs
    else:
        true_hold = Hold.parse(args.hold)
        freqs = None
    record = synthesize_record(
        system,
        u,
        true_hold,
        NoiseSpec(args.noise_var),
        seed=args.seed,
        analytic_freqs=freqs,
        analytic_amplitudes=args.amplitude,
    )
    out = Path(args.out) if args.out else _out_dir() / "record.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_record(record, out)
    print(f"wrote {record.N} samples to {out}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    record = read_record(args.data)
    holds = HoldPolicy(
        regressor_input=Hold.parse(args.hold_regressor_input),
        instrument_input=Hold.parse(args.hold_instrument_input),
        output=Hold.parse(args.hold_output),
    )
    theta0 = None
    if args.theta0 is not None:
        theta0 = np.array([float(tok) for tok in args.theta0.split(",")])
    config = SrivcConfig(
        n=args.n,
        m=args.m,
        holds=holds,
        max_iterations=args.max_iter,
        epsilon=args.eps,
        init_lambda=args.init_lambda,
        theta0=theta0,
        condition_limit=args.condition_limit,
    )
    result = srivc_estimate(record, config)
    out = (
        Path(args.out)
        if args.out
        else _out_dir() / (Path(args.data).stem + "_fit.csv")
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    write_result_csv(result, args.n, args.m, out)
    names = [f"a{i}" for i in range(1, args.n + 1)] + [
        f"b{i}" for i in range(0, args.m + 1)
    ]
    for name, value in zip(names, result.theta):
        print(f"{name}={float(value)!r}")
    print(f"iterations={result.iterations} converged={str(result.converged).lower()}")
    print(f"history written to {out}")
    if not result.converged:
        print(
            f"warning: no convergence within {config.max_iterations} iterations "
            f"(last relative step {result.final_relative_step:.3e})",
            file=sys.stderr,
        )
    return EXIT_OK


def _resolve_config_path(token: str) -> Path:
    path = Path(token)
    if path.exists():
        return path
    if "/" not in token and "\\" not in token:
        bundled = importlib.resources.files("srivc") / "presets" / token
        if bundled.is_file():
            return Path(str(bundled))
        candidate = importlib.resources.files("srivc") / "presets" / (token + ".cfg")
        if candidate.is_file():
            return Path(str(candidate))
    raise FileNotFoundError(f"config {token!r} is neither a file nor a bundled preset")


def _theta_true_for(cfg):
    if cfg.system.order_den == cfg.n and cfg.system.order_num == cfg.m:
        return theta_from_tf(cfg.system)
    return None


def _cmd_mc_sweep(args) -> int:
    path = _resolve_config_path(args.config)
    cfg = parse_sweep_config(path.read_text())
    out_dir = Path(args.out_dir) if args.out_dir else _out_dir() / "sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    outcomes = run_mc_sweep(cfg, jobs=args.jobs, progress=args.progress)
    summary = summarize(outcomes, cfg.n, cfg.m, theta_true=_theta_true_for(cfg))
    write_raw_csv(outcomes, cfg.n, cfg.m, out_dir / "raw.csv")
    write_summary_csv(summary, out_dir / "summary.csv")
    write_sweep_config(cfg, out_dir / "config.cfg")
    failures = sum(1 for o in outcomes if not o.success)
    print(
        f"{len(outcomes)} runs over {len(cfg.instances)} instances and "
        f"{len(cfg.n_grid)} record lengths; {failures} failures"
    )
    print(f"results in {out_dir}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    results_path = Path(args.results)
    outcomes, n, m = read_raw_csv(results_path)
    cfg = None
    if args.config is not None:
        cfg_path = _resolve_config_path(args.config)
        cfg = parse_sweep_config(cfg_path.read_text())
    else:
        sibling = results_path.with_name("config.cfg")
        if sibling.exists():
            cfg = parse_sweep_config(sibling.read_text())
    theta_true = None
    if cfg is not None:
        if (cfg.n, cfg.m) != (n, m):
            raise ValueError(
                f"config declares orders ({cfg.n},{cfg.m}) but results carry "
                f"({n},{m})"
            )
        theta_true = _theta_true_for(cfg)
    summary = summarize(outcomes, n, m, theta_true=theta_true)
    out_dir = Path(args.out) if args.out else _out_dir() / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summary, out_dir / "summary.csv")
    created = emit_plot_data(summary, out_dir)
    print(f"wrote summary.csv and {len(created)} files to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srivc",
        description="Continuous-time transfer function estimation with "
        "explicit per-signal intersample behaviour.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesise an input/output record")
    sim.add_argument("--system", required=True,
                     help="transfer function, e.g. 'num:1;den:0.04,0.2,1'")
    sim.add_argument("--N", type=int, help="number of samples")
    sim.add_argument("--T", type=float, help="sampling period")
    sim.add_argument("--input", choices=("binary", "multisine", "prbs"),
                     default="binary", help="generated input kind")
    sim.add_argument("--input-file", help="read the input signal from a t,value CSV")
    sim.add_argument("--hold", required=True, choices=("zoh", "foh", "analytic"),
                     help="true intersample behaviour of the input")
    sim.add_argument("--noise-var", type=float, default=0.0,
                     help="additive output noise variance")
    sim.add_argument("--seed", type=int, default=0, help="noise seed")
    sim.add_argument("--input-seed", type=int, default=None,
                     help="input generator seed (default derived from --seed)")
    sim.add_argument("--amplitude", type=float, default=1.0)
    sim.add_argument("--freqs", type=_parse_freqs,
                     default=DEFAULT_MULTISINE_FREQS,
                     help="multisine frequencies in rad/s, comma separated")
    sim.add_argument("--out", help="output record path (default record.csv)")
    sim.set_defaults(func=_cmd_simulate)

    est = sub.add_parser("estimate", help="fit a model to one record")
    est.add_argument("--data", required=True, help="record CSV (t,u,y)")
    est.add_argument("--n", type=int, required=True, help="denominator order")
    est.add_argument("--m", type=int, required=True, help="numerator order")
    est.add_argument("--hold-regressor-input", default="zoh", choices=("zoh", "foh"))
    est.add_argument("--hold-instrument-input", default="zoh", choices=("zoh", "foh"))
    est.add_argument("--hold-output", default="zoh", choices=("zoh", "foh"))
    est.add_argument("--max-iter", type=int, default=200)
    est.add_argument("--eps", type=float, default=1e-7,
                     help="relative parameter step that stops the iteration")
    est.add_argument("--init-lambda", type=float, default=None,
                     help="initialisation filter cutoff (default 1/T)")
    est.add_argument("--condition-limit", type=float, default=1e12)
    est.add_argument("--theta0", default=None,
                     help="comma separated start vector, skips initialisation")
    est.add_argument("--out", help="iteration history CSV path")
    est.set_defaults(func=_cmd_estimate)

    mc = sub.add_parser("mc-sweep", help="run a Monte Carlo sweep from a config")
    mc.add_argument("--config", required=True,
                    help="sweep config path or bundled preset name")
    mc.add_argument("--out-dir", help="directory for raw.csv/summary.csv/config.cfg")
    mc.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                    help="worker processes")
    mc.add_argument("--progress", action="store_true",
                    help="print a line per finished cell")
    mc.set_defaults(func=_cmd_mc_sweep)

    ana = sub.add_parser("analyze", help="summarise raw sweep results")
    ana.add_argument("--results", required=True, help="raw.csv from mc-sweep")
    ana.add_argument("--config", default=None,
                     help="sweep config (default: config.cfg next to results)")
    ana.add_argument("--out", help="output directory for tables and figures")
    ana.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "input_seed", "missing") is None:
        args.input_seed = stable_hash("input", args.seed)
    try:
        return args.func(args)
    except SingularNormalMatrix as exc:
        print(f"error: singular normal equations: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
