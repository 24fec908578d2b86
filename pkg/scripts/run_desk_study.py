"""Run the desk-scale consistency study and print a compact report.

Thin driver over the library: loads a sweep config (the bundled desk
preset by default), runs it, writes raw/summary CSVs plus the overview
figures, and prints the N=max means next to the true parameters.

    python scripts/run_desk_study.py --out-dir out/desk
    python scripts/run_desk_study.py --config src/srivc/presets/paper-full.cfg
"""

from __future__ import annotations

import argparse
import importlib.resources
import sys
import time
from pathlib import Path

from srivc.ctlti import theta_from_tf
from srivc.mcharness import (
    emit_plot_data,
    parse_sweep_config,
    run_mc_sweep,
    summarize,
    variance_slope,
    write_raw_csv,
    write_summary_csv,
    write_sweep_config,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None,
                        help="sweep config path (default: bundled desk preset)")
    parser.add_argument("--out-dir", default="out/desk")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    if args.config is None:
        text = (
            importlib.resources.files("srivc") / "presets" / "paper-desk.cfg"
        ).read_text()
    else:
        text = Path(args.config).read_text()
    cfg = parse_sweep_config(text)

    t0 = time.time()
    outcomes = run_mc_sweep(cfg, jobs=args.jobs, progress=True)
    elapsed = time.time() - t0

    theta_true = None
    if cfg.system.order_den == cfg.n and cfg.system.order_num == cfg.m:
        theta_true = theta_from_tf(cfg.system)
    summary = summarize(outcomes, cfg.n, cfg.m, theta_true=theta_true)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_raw_csv(outcomes, cfg.n, cfg.m, out_dir / "raw.csv")
    write_summary_csv(summary, out_dir / "summary.csv")
    write_sweep_config(cfg, out_dir / "config.cfg")
    emit_plot_data(summary, out_dir)

    n_top = max(cfg.n_grid)
    print(f"\n{len(outcomes)} runs in {elapsed:.1f} s; results in {out_dir}")
    if theta_true is not None:
        print("true:", "  ".join(f"{v:+.6f}" for v in theta_true))
    print(f"means at N={n_top}:")
    for inst in cfg.instances:
        stats = summary.cells.get((inst.label, n_top))
        if stats is None or stats.mean is None:
            print(f"  {inst.label:24s}  (no successful runs)")
            continue
        mean_txt = "  ".join(f"{v:+.6f}" for v in stats.mean)
        slopes = []
        for j in range(len(summary.param_names)):
            try:
                slopes.append(f"{variance_slope(summary, inst.label, j):+.2f}")
            except ValueError:
                slopes.append("n/a")
        print(
            f"  {inst.label:24s}  {mean_txt}   "
            f"failures={stats.failures}  var-slopes={','.join(slopes)}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
