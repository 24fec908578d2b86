"""Monte Carlo studies of estimator bias and variance over record length.

A sweep runs a set of named instances (input kind, true intersample
behaviour, estimator hold assignment) over a grid of record lengths with
repeated noise realisations.  Seeds are derived per (instance, length,
run) from a stable hash, so results are reproducible bit for bit across
processes and across degrees of parallelism.
"""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from srivc.ctlti import (
    DegenerateModelError,
    ImaginaryAxisPoleError,
    TransferFunction,
    format_tf,
    parse_tf,
)
from srivc.holdsim import Hold
from srivc.estimator import HoldPolicy, SingularNormalMatrix, SrivcConfig, srivc_estimate
from srivc.signals import (
    DEFAULT_MULTISINE_FREQS,
    NoiseSpec,
    drop_initial,
    gen_multisine,
    gen_random_binary,
    synthesize_record,
)

__all__ = [
    "McInstance",
    "SweepConfig",
    "RunOutcome",
    "CellStats",
    "McSummary",
    "builtin_instances",
    "log_n_grid",
    "run_mc_sweep",
    "summarize",
    "variance_slope",
    "emit_plot_data",
    "stable_hash",
    "parse_sweep_config",
    "write_sweep_config",
    "write_raw_csv",
    "read_raw_csv",
    "write_summary_csv",
]

_SEED_MASK = (1 << 63) - 1


def stable_hash(*parts) -> int:
    """Deterministic 63-bit hash of the stringified parts (process independent)."""
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little") & _SEED_MASK


@dataclass(frozen=True)
class McInstance:
    """One named experimental condition.

    ``true_hold`` fixes how the simulated output is generated (None means
    the analytic stationary multisine response); ``holds`` is what the
    estimator assumes.  The interesting cases are the mismatched ones.
    """

    label: str
    input_kind: str
    true_hold: Hold | None
    holds: HoldPolicy

    def __post_init__(self):
        if self.input_kind not in ("binary", "multisine"):
            raise ValueError(f"unknown input kind {self.input_kind!r}")
        if self.true_hold is None and self.input_kind != "multisine":
            raise ValueError("analytic output generation needs a multisine input")


def builtin_instances() -> dict[str, McInstance]:
    """The five standard study conditions, keyed by label."""
    Z, F = Hold.ZOH, Hold.FOH
    instances = [
        McInstance("zoh-all", "binary", Z, HoldPolicy(Z, Z, Z)),
        McInstance("foh-regressor-input", "binary", Z, HoldPolicy(F, Z, Z)),
        McInstance("foh-instrument-input", "binary", Z, HoldPolicy(Z, F, Z)),
        McInstance("foh-output", "binary", Z, HoldPolicy(Z, Z, F)),
        McInstance("multisine-foh", "multisine", None, HoldPolicy(F, F, F)),
    ]
    return {inst.label: inst for inst in instances}


def log_n_grid(n_min: int, n_max: int, points: int) -> tuple[int, ...]:
    """Logarithmically spaced record lengths, rounded to unique integers."""
    if not (1 <= n_min <= n_max) or points < 1:
        raise ValueError("need 1 <= n_min <= n_max and points >= 1")
    grid = np.rint(np.geomspace(n_min, n_max, points)).astype(int)
    return tuple(sorted(set(int(v) for v in grid)))


@dataclass(frozen=True)
class SweepConfig:
    """Everything one sweep needs, including the estimator settings.

    Per-run seeds are ``base_seed ^ stable_hash(...)`` over the cell
    coordinates; ``fixed_input`` drops the run index from the input seed so
    every run of a cell shares one input realisation while noise still
    varies.
    """

    system: TransferFunction
    T: float
    n_grid: tuple[int, ...]
    runs_per_n: int
    instances: tuple[McInstance, ...]
    n: int
    m: int
    noise_variance: float
    base_seed: int = 0
    max_iterations: int = 200
    epsilon: float = 1e-7
    init_lambda: float | None = None
    condition_limit: float = 1e12
    warmup_discard: int = 0
    fixed_input: bool = False
    amplitude: float = 1.0
    multisine_freqs: tuple[float, ...] = DEFAULT_MULTISINE_FREQS

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(
            self, "multisine_freqs", tuple(float(f) for f in self.multisine_freqs)
        )
        if not self.n_grid or not self.instances:
            raise ValueError("sweep needs at least one record length and one instance")
        if len({i.label for i in self.instances}) != len(self.instances):
            raise ValueError("instance labels must be unique")
        if self.runs_per_n < 1:
            raise ValueError("runs_per_n must be >= 1")
        if not (np.isfinite(self.T) and self.T > 0.0):
            raise ValueError("sampling period must be positive")
        if self.warmup_discard < 0:
            raise ValueError("warmup_discard must be >= 0")
        # Fail fast on bad estimator settings rather than inside every run.
        self.estimator_config(HoldPolicy())

    def estimator_config(self, holds: HoldPolicy) -> SrivcConfig:
        return SrivcConfig(
            n=self.n,
            m=self.m,
            holds=holds,
            max_iterations=self.max_iterations,
            epsilon=self.epsilon,
            init_lambda=self.init_lambda,
            condition_limit=self.condition_limit,
        )

    @property
    def dim(self) -> int:
        return self.n + self.m + 1

    @property
    def param_names(self) -> list[str]:
        return [f"a{i}" for i in range(1, self.n + 1)] + [
            f"b{i}" for i in range(0, self.m + 1)
        ]


@dataclass
class RunOutcome:
    """Raw result of a single estimation run; theta is None when it raised."""

    instance: str
    N: int
    run: int
    theta: np.ndarray | None
    iterations: int
    converged: bool
    stabilized_count: int

    @property
    def success(self) -> bool:
        return (
            self.converged
            and self.theta is not None
            and bool(np.all(np.isfinite(self.theta)))
        )


_RUN_FAILURES = (
    SingularNormalMatrix,
    ImaginaryAxisPoleError,
    DegenerateModelError,
    np.linalg.LinAlgError,
)


def _input_seed(cfg: SweepConfig, label: str, N: int, run: int) -> int:
    if cfg.fixed_input:
        return (cfg.base_seed ^ stable_hash("input", label, N)) & _SEED_MASK
    return (cfg.base_seed ^ stable_hash("input", label, N, run)) & _SEED_MASK


def _noise_seed(cfg: SweepConfig, label: str, N: int, run: int) -> int:
    return (cfg.base_seed ^ stable_hash("noise", label, N, run)) & _SEED_MASK


def run_single(cfg: SweepConfig, inst: McInstance, N: int, run: int) -> RunOutcome:
    """Synthesise one record and estimate on it; exceptions become failures."""
    total = N + cfg.warmup_discard
    if inst.input_kind == "binary":
        u = gen_random_binary(
            total, cfg.amplitude, _input_seed(cfg, inst.label, N, run), cfg.T
        )
        freqs = None
    else:
        t = cfg.T * np.arange(total)
        u = gen_multisine(t, cfg.multisine_freqs, cfg.amplitude)
        freqs = cfg.multisine_freqs
    record = synthesize_record(
        cfg.system,
        u,
        inst.true_hold,
        NoiseSpec(cfg.noise_variance),
        seed=_noise_seed(cfg, inst.label, N, run),
        analytic_freqs=freqs,
        analytic_amplitudes=cfg.amplitude,
    )
    if cfg.warmup_discard:
        record = drop_initial(record, cfg.warmup_discard)
    try:
        result = srivc_estimate(record, cfg.estimator_config(inst.holds))
    except _RUN_FAILURES:
        return RunOutcome(inst.label, N, run, None, 0, False, 0)
    return RunOutcome(
        inst.label,
        N,
        run,
        result.theta.copy(),
        result.iterations,
        result.converged,
        int(np.sum(result.stabilized_flags)),
    )


def _run_cell(args) -> tuple[tuple[str, int], list[RunOutcome]]:
    cfg, inst, N = args
    outcomes = [run_single(cfg, inst, N, run) for run in range(cfg.runs_per_n)]
    return (inst.label, N), outcomes


def run_mc_sweep(cfg: SweepConfig, jobs: int = 1, progress: bool = False) -> list[RunOutcome]:
    """Run the whole sweep; output order is (instance, N, run) as configured.

    ``jobs`` > 1 distributes (instance, N) cells over worker processes.
    Results are identical for any job count because every run's seeds are
    a pure function of its coordinates.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    tasks = [(cfg, inst, N) for inst in cfg.instances for N in cfg.n_grid]
    cells: dict[tuple[str, int], list[RunOutcome]] = {}
    if jobs == 1:
        for task in tasks:
            key, outcomes = _run_cell(task)
            cells[key] = outcomes
            if progress:
                print(f"done {key[0]} N={key[1]}", flush=True)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, outcomes in pool.map(_run_cell, tasks):
                cells[key] = outcomes
                if progress:
                    print(f"done {key[0]} N={key[1]}", flush=True)
    ordered: list[RunOutcome] = []
    for inst in cfg.instances:
        for N in cfg.n_grid:
            ordered.extend(cells[(inst.label, N)])
    return ordered


@dataclass
class CellStats:
    """Per-(instance, N) moments over the successful runs."""

    mean: np.ndarray | None
    variance: np.ndarray | None
    runs: int
    failures: int


@dataclass
class McSummary:
    param_names: list[str]
    labels: list[str]
    n_values: list[int]
    cells: dict[tuple[str, int], CellStats]
    theta_true: np.ndarray | None = None


def summarize(
    outcomes: list[RunOutcome], n: int, m: int, theta_true=None
) -> McSummary:
    """Group outcomes by (instance, N) and take mean and unbiased variance.

    Non-converged or raised runs count as failures and are excluded from
    the moments.  A cell with no successes has mean None; one with a
    single success has variance None.
    """
    dim = n + m + 1
    names = [f"a{i}" for i in range(1, n + 1)] + [f"b{i}" for i in range(0, m + 1)]
    groups: dict[tuple[str, int], list[RunOutcome]] = {}
    labels: list[str] = []
    n_values: list[int] = []
    for out in outcomes:
        key = (out.instance, out.N)
        if out.instance not in labels:
            labels.append(out.instance)
        if out.N not in n_values:
            n_values.append(out.N)
        groups.setdefault(key, []).append(out)
    n_values.sort()
    cells: dict[tuple[str, int], CellStats] = {}
    for key, group in groups.items():
        thetas = [o.theta for o in group if o.success]
        failures = len(group) - len(thetas)
        if thetas:
            arr = np.asarray(thetas)
            if arr.shape[1] != dim:
                raise ValueError(
                    f"outcome dimension {arr.shape[1]} does not match n+m+1={dim}"
                )
            mean = arr.mean(axis=0)
            variance = arr.var(axis=0, ddof=1) if arr.shape[0] >= 2 else None
        else:
            mean = None
            variance = None
        cells[key] = CellStats(mean, variance, len(thetas), failures)
    if theta_true is not None:
        theta_true = np.asarray(theta_true, dtype=float)
        if theta_true.shape != (dim,):
            raise ValueError(f"theta_true must have shape ({dim},)")
    return McSummary(names, labels, n_values, cells, theta_true)


def variance_slope(
    summary: McSummary, label: str, param_index: int, decades: float = 1.0
) -> float:
    """Log-log slope of variance vs N over the top ``decades`` of lengths.

    A consistent estimator with vanishing bias shows a slope near -1.
    """
    pts = [
        (N, stats.variance[param_index])
        for (lab, N), stats in summary.cells.items()
        if lab == label and stats.variance is not None and stats.variance[param_index] > 0
    ]
    if not pts:
        raise ValueError(f"no variance data for instance {label!r}")
    n_max = max(N for N, _ in pts)
    window = [(N, v) for N, v in pts if N >= n_max / 10.0**decades]
    if len(window) < 2:
        raise ValueError("need at least two grid points inside the slope window")
    logn = np.log10([N for N, _ in window])
    logv = np.log10([v for _, v in window])
    return float(np.polyfit(logn, logv, 1)[0])


# ---------------------------------------------------------------------------
# sweep config files: flat key=value, '#' comments


def _format_instance(inst: McInstance, builtins: dict[str, McInstance]) -> str:
    if builtins.get(inst.label) == inst:
        return inst.label
    true = "analytic" if inst.true_hold is None else str(inst.true_hold)
    return ":".join(
        [
            inst.label,
            inst.input_kind,
            true,
            str(inst.holds.regressor_input),
            str(inst.holds.instrument_input),
            str(inst.holds.output),
        ]
    )


def _parse_instance(token: str, builtins: dict[str, McInstance]) -> McInstance:
    token = token.strip()
    if ":" not in token:
        if token not in builtins:
            raise ValueError(
                f"unknown instance {token!r}; known: {sorted(builtins)} "
                "or label:input:true_hold:reg:ins:out"
            )
        return builtins[token]
    parts = [p.strip() for p in token.split(":")]
    if len(parts) != 6:
        raise ValueError(
            f"custom instance needs label:input:true_hold:reg:ins:out, got {token!r}"
        )
    label, kind, true, reg, ins, out = parts
    true_hold = None if true == "analytic" else Hold.parse(true)
    holds = HoldPolicy(Hold.parse(reg), Hold.parse(ins), Hold.parse(out))
    return McInstance(label, kind, true_hold, holds)


def parse_sweep_config(text: str) -> SweepConfig:
    """Parse the flat key=value sweep description.

    ``n_grid`` is either an explicit comma list or ``log:min:max:points``.
    ``instances`` is a comma list of builtin labels or inline
    ``label:input:true_hold:reg:ins:out`` forms.
    """
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key = key.strip()
        if key in fields:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value.strip()

    required = ["system", "T", "n_grid", "runs_per_n", "instances", "n", "m",
                "noise_variance"]
    missing = [k for k in required if k not in fields]
    if missing:
        raise ValueError(f"missing config keys: {missing}")

    grid_text = fields["n_grid"]
    if grid_text.startswith("log:"):
        parts = grid_text.split(":")
        if len(parts) != 4:
            raise ValueError(f"expected log:min:max:points, got {grid_text!r}")
        n_grid = log_n_grid(int(parts[1]), int(parts[2]), int(parts[3]))
    else:
        n_grid = tuple(int(tok) for tok in grid_text.split(","))

    builtins = builtin_instances()
    instances = tuple(
        _parse_instance(tok, builtins) for tok in fields["instances"].split(",")
    )

    def opt(key, conv, default):
        if key not in fields or fields[key] == "":
            return default
        return conv(fields[key])

    def parse_bool(text):
        val = text.strip().lower()
        if val in ("1", "true", "yes"):
            return True
        if val in ("0", "false", "no"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")

    return SweepConfig(
        system=parse_tf(fields["system"]),
        T=float(fields["T"]),
        n_grid=n_grid,
        runs_per_n=int(fields["runs_per_n"]),
        instances=instances,
        n=int(fields["n"]),
        m=int(fields["m"]),
        noise_variance=float(fields["noise_variance"]),
        base_seed=opt("base_seed", int, 0),
        max_iterations=opt("max_iterations", int, 200),
        epsilon=opt("epsilon", float, 1e-7),
        init_lambda=opt("init_lambda", float, None),
        condition_limit=opt("condition_limit", float, 1e12),
        warmup_discard=opt("warmup_discard", int, 0),
        fixed_input=opt("fixed_input", parse_bool, False),
        amplitude=opt("amplitude", float, 1.0),
        multisine_freqs=opt(
            "multisine_freqs",
            lambda s: tuple(float(tok) for tok in s.split(",")),
            DEFAULT_MULTISINE_FREQS,
        ),
    )


def write_sweep_config(cfg: SweepConfig, path) -> None:
    """Canonical emission; parsing it back reproduces the config exactly."""
    builtins = builtin_instances()
    lines = [
        f"system={format_tf(cfg.system)}",
        f"T={cfg.T!r}",
        "n_grid=" + ",".join(str(v) for v in cfg.n_grid),
        f"runs_per_n={cfg.runs_per_n}",
        "instances=" + ",".join(_format_instance(i, builtins) for i in cfg.instances),
        f"n={cfg.n}",
        f"m={cfg.m}",
        f"noise_variance={cfg.noise_variance!r}",
        f"base_seed={cfg.base_seed}",
        f"max_iterations={cfg.max_iterations}",
        f"epsilon={cfg.epsilon!r}",
        "init_lambda=" + ("" if cfg.init_lambda is None else repr(cfg.init_lambda)),
        f"condition_limit={cfg.condition_limit!r}",
        f"warmup_discard={cfg.warmup_discard}",
        f"fixed_input={'true' if cfg.fixed_input else 'false'}",
        f"amplitude={cfg.amplitude!r}",
        "multisine_freqs=" + ",".join(repr(f) for f in cfg.multisine_freqs),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# raw and summary CSV


def _theta_names(n: int, m: int) -> list[str]:
    return [f"a{i}" for i in range(1, n + 1)] + [f"b{i}" for i in range(0, m + 1)]


def write_raw_csv(outcomes: list[RunOutcome], n: int, m: int, path) -> None:
    names = _theta_names(n, m)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "N", "run", *names, "iterations", "converged",
                        "stabilized_count"])
        for out in outcomes:
            if out.theta is None:
                theta_cols = [""] * len(names)
            else:
                theta_cols = [repr(float(v)) for v in out.theta]
            writer.writerow(
                [
                    out.instance,
                    str(out.N),
                    str(out.run),
                    *theta_cols,
                    str(out.iterations),
                    "true" if out.converged else "false",
                    str(out.stabilized_count),
                ]
            )


def read_raw_csv(path) -> tuple[list[RunOutcome], int, int]:
    """Read outcomes back; model orders are recovered from the header names."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty results file")
        header = [h.strip() for h in header]
        if header[:3] != ["instance", "N", "run"] or header[-3:] != [
            "iterations", "converged", "stabilized_count",
        ]:
            raise ValueError(f"{path}: unexpected results header {header}")
        names = header[3:-3]
        n = sum(1 for name in names if name.startswith("a"))
        m = sum(1 for name in names if name.startswith("b")) - 1
        if m < 0 or names != _theta_names(n, m):
            raise ValueError(f"{path}: unexpected parameter columns {names}")
        outcomes = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row has {len(row)} fields, expected {len(header)}")
            theta_cols = row[3:-3]
            if all(c == "" for c in theta_cols):
                theta = None
            else:
                theta = np.array([float(c) for c in theta_cols])
            outcomes.append(
                RunOutcome(
                    instance=row[0],
                    N=int(row[1]),
                    run=int(row[2]),
                    theta=theta,
                    iterations=int(row[-3]),
                    converged=row[-2] == "true",
                    stabilized_count=int(row[-1]),
                )
            )
    if not outcomes:
        raise ValueError(f"{path}: no result rows")
    return outcomes, n, m


def write_summary_csv(summary: McSummary, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "N", "param", "mean", "variance", "runs",
                        "failures"])
        for label in summary.labels:
            for N in summary.n_values:
                stats = summary.cells.get((label, N))
                if stats is None:
                    continue
                for j, name in enumerate(summary.param_names):
                    mean = "" if stats.mean is None else repr(float(stats.mean[j]))
                    var = (
                        ""
                        if stats.variance is None
                        else repr(float(stats.variance[j]))
                    )
                    writer.writerow(
                        [label, str(N), name, mean, var, str(stats.runs),
                         str(stats.failures)]
                    )


def emit_plot_data(summary: McSummary, out_dir) -> list[Path]:
    """Per-parameter mean/variance CSVs plus overview figures.

    Writes ``mean_<param>.csv`` and ``variance_<param>.csv`` (one row per
    instance and record length, empty fields for absent cells) and the
    figures ``mean.svg`` / ``variance.svg`` with one panel per parameter.
    Returns the created paths.
    """
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    if not summary.cells:
        raise ValueError("summary has no cells to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    for j, name in enumerate(summary.param_names):
        mpath = out_dir / f"mean_{name}.csv"
        vpath = out_dir / f"variance_{name}.csv"
        with mpath.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["instance", "N", "mean"]
            if summary.theta_true is not None:
                header.append("truth")
            writer.writerow(header)
            for label in summary.labels:
                for N in summary.n_values:
                    stats = summary.cells.get((label, N))
                    mean = (
                        ""
                        if stats is None or stats.mean is None
                        else repr(float(stats.mean[j]))
                    )
                    row = [label, str(N), mean]
                    if summary.theta_true is not None:
                        row.append(repr(float(summary.theta_true[j])))
                    writer.writerow(row)
        with vpath.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance", "N", "variance"])
            for label in summary.labels:
                for N in summary.n_values:
                    stats = summary.cells.get((label, N))
                    var = (
                        ""
                        if stats is None or stats.variance is None
                        else repr(float(stats.variance[j]))
                    )
                    writer.writerow([label, str(N), var])
        created.extend([mpath, vpath])

    dim = len(summary.param_names)
    for kind in ("mean", "variance"):
        fig, axes = plt.subplots(dim, 1, figsize=(7.0, 2.6 * dim), squeeze=False)
        for j, name in enumerate(summary.param_names):
            ax = axes[j, 0]
            for label in summary.labels:
                ns, vals = [], []
                for N in summary.n_values:
                    stats = summary.cells.get((label, N))
                    if stats is None:
                        continue
                    val = None
                    if kind == "mean" and stats.mean is not None:
                        val = stats.mean[j]
                    if kind == "variance" and stats.variance is not None:
                        val = stats.variance[j]
                    if val is not None:
                        ns.append(N)
                        vals.append(val)
                if ns:
                    ax.plot(ns, vals, marker="o", markersize=3, label=label)
            ax.set_xscale("log")
            if kind == "variance":
                ax.set_yscale("log")
            elif summary.theta_true is not None:
                ax.axhline(
                    summary.theta_true[j], color="k", linestyle=":", linewidth=1,
                    label="truth",
                )
            ax.set_ylabel(f"{kind}({name})")
            if j == dim - 1:
                ax.set_xlabel("record length N")
            if j == 0:
                ax.legend(fontsize=7)
        fig.tight_layout()
        fpath = out_dir / f"{kind}.svg"
        fig.savefig(fpath)
        plt.close(fig)
        created.append(fpath)
    return created
