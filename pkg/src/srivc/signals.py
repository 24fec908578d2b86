"""Test-signal generation and sampled-record synthesis.

Records are (input, output) pairs on a shared uniform grid.  The output
of a simulated system is exact for the declared intersample behaviour of
the input; for periodic multisine inputs the stationary response is also
available in closed form, which sidesteps the hold question entirely on
the output side.

CSV formats: a bare signal is ``t,value``; a record is ``t,u,y`` with a
``<path>.meta`` sidecar of ``key=value`` lines carrying provenance
(system, hold, variance, seed, T, N, t0).  Floats are written with repr
so read/write round-trips are exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.signal

from srivc.ctlti import TransferFunction, format_tf, is_stable, parse_tf, tf_frequency_response
from srivc.holdsim import Hold, SampledSignal, bank_outputs, discretize, realize_filter_bank

__all__ = [
    "NoiseSpec",
    "RecordMeta",
    "SampledRecord",
    "gen_random_binary",
    "gen_prbs",
    "gen_multisine",
    "analytic_multisine_output",
    "gen_gaussian_noise",
    "synthesize_record",
    "drop_initial",
    "write_signal",
    "read_signal",
    "write_record",
    "read_record",
]

DEFAULT_MULTISINE_FREQS = (0.5, 2.0, 5.0, 7.0)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive output noise: white Gaussian, optionally coloured.

    ``coloring`` is a discrete-time filter (num, den) applied to the white
    sequence; its poles must lie strictly inside the unit circle.  Zero
    variance means exactly zero noise.
    """

    variance: float
    coloring: tuple | None = None

    def __post_init__(self):
        if not (np.isfinite(self.variance) and self.variance >= 0.0):
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")
        if self.coloring is not None:
            b = np.asarray(self.coloring[0], dtype=float)
            a = np.asarray(self.coloring[1], dtype=float)
            if b.ndim != 1 or a.ndim != 1 or b.size == 0 or a.size == 0:
                raise ValueError("coloring filter needs 1-D coefficient arrays")
            if a[0] == 0.0:
                raise ValueError("coloring denominator must have nonzero leading term")
            if a.size > 1 and np.any(np.abs(np.roots(a)) >= 1.0):
                raise ValueError("coloring filter poles must be inside the unit circle")
            object.__setattr__(self, "coloring", (b, a))


@dataclass(frozen=True)
class RecordMeta:
    """Provenance of a synthesised record, round-tripped via the sidecar file."""

    system: str
    hold: str
    variance: float
    seed: int
    T: float
    N: int
    t0: float = 0.0


@dataclass(frozen=True)
class SampledRecord:
    """Input/output pair on one uniform sampling grid."""

    u: SampledSignal
    y: SampledSignal
    meta: RecordMeta | None = None

    def __post_init__(self):
        if len(self.u) != len(self.y):
            raise ValueError("input and output must have the same length")
        if not np.isclose(self.u.T, self.y.T, rtol=1e-12, atol=0.0):
            raise ValueError("input and output must share the sampling period")
        if len(self.u) == 0:
            raise ValueError("record must be nonempty")

    @property
    def T(self) -> float:
        return self.u.T

    @property
    def N(self) -> int:
        return len(self.u)


def gen_random_binary(
    N: int, amplitude: float = 1.0, seed: int = 0, T: float = 1.0, t0: float = 0.0
) -> SampledSignal:
    """Independent equiprobable +/-amplitude samples."""
    if N < 1:
        raise ValueError("need at least one sample")
    if not (np.isfinite(amplitude) and amplitude > 0.0):
        raise ValueError("amplitude must be positive")
    rng = np.random.default_rng(seed)
    values = amplitude * (2.0 * rng.integers(0, 2, size=N) - 1.0)
    return SampledSignal(values=values, T=T, t0=t0)


# Primitive trinomials x^o + x^t + 1 for maximal-length shift registers.
_PRBS_TAPS = {
    2: 1, 3: 2, 4: 3, 5: 3, 6: 5, 7: 6, 9: 5, 10: 7, 11: 9, 15: 14,
    17: 14, 18: 11, 20: 17, 21: 19, 22: 21, 23: 18, 25: 22, 28: 25,
    29: 27, 31: 28,
}


def gen_prbs(
    N: int,
    amplitude: float = 1.0,
    seed: int = 0,
    T: float = 1.0,
    order: int | None = None,
    t0: float = 0.0,
) -> SampledSignal:
    """Maximal-length shift-register binary sequence, +/-amplitude levels.

    ``order`` picks the register length (period 2^order - 1); by default
    the smallest supported order whose period covers N.  ``seed`` selects
    the nonzero initial register state.
    """
    if N < 1:
        raise ValueError("need at least one sample")
    if order is None:
        for cand in sorted(_PRBS_TAPS):
            if 2**cand - 1 >= N:
                order = cand
                break
        else:
            raise ValueError(f"no supported register length covers N={N}")
    if order not in _PRBS_TAPS:
        raise ValueError(
            f"unsupported register length {order}; choose from {sorted(_PRBS_TAPS)}"
        )
    tap = _PRBS_TAPS[order]
    rng = np.random.default_rng(seed)
    state = int(rng.integers(1, 2**order))
    mask = 2**order - 1
    bits = np.empty(N)
    for k in range(N):
        out = (state >> (order - 1)) & 1
        bits[k] = out
        # feedback must reuse the outgoing bit, otherwise the register map
        # loses information and the cycle is not maximal
        fb = out ^ ((state >> (tap - 1)) & 1)
        state = ((state << 1) | fb) & mask
    return SampledSignal(values=amplitude * (2.0 * bits - 1.0), T=T, t0=t0)


def _uniform_grid(t_grid: np.ndarray) -> tuple[float, float]:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be 1-D with at least two samples")
    T = (t[-1] - t[0]) / (t.size - 1)
    if not (np.isfinite(T) and T > 0.0):
        raise ValueError("time grid must be increasing")
    k = np.arange(t.size)
    if np.max(np.abs(t - (t[0] + k * T))) > 1e-9 * max(T, abs(t[-1])):
        raise ValueError("time grid must be uniform")
    return float(t[0]), float(T)


def gen_multisine(
    t_grid, freqs=DEFAULT_MULTISINE_FREQS, amplitudes=1.0
) -> SampledSignal:
    """Sum of zero-phase sines at ``freqs`` (rad/s) on a uniform grid."""
    t = np.asarray(t_grid, dtype=float)
    t0, T = _uniform_grid(t)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    amps = np.broadcast_to(np.asarray(amplitudes, dtype=float), freqs.shape)
    values = np.zeros(t.size)
    for w, a in zip(freqs, amps):
        values += a * np.sin(w * t)
    return SampledSignal(values=values, T=T, t0=t0)


def analytic_multisine_output(
    tf: TransferFunction, t_grid, freqs=DEFAULT_MULTISINE_FREQS, amplitudes=1.0
) -> SampledSignal:
    """Stationary response of a stable system to the multisine, in closed form.

    Each tone a sin(w t) maps to a |G(jw)| sin(w t + arg G(jw)); no hold
    assumption enters because the true input is known between samples.
    """
    if not is_stable(tf):
        raise ValueError("stationary response needs a stable system")
    t = np.asarray(t_grid, dtype=float)
    t0, T = _uniform_grid(t)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    amps = np.broadcast_to(np.asarray(amplitudes, dtype=float), freqs.shape)
    values = np.zeros(t.size)
    for w, a in zip(freqs, amps):
        g = tf_frequency_response(tf, w)
        values += a * np.abs(g) * np.sin(w * t + np.angle(g))
    return SampledSignal(values=values, T=T, t0=t0)


def gen_gaussian_noise(
    N: int, spec: NoiseSpec, seed: int = 0, T: float = 1.0, t0: float = 0.0
) -> SampledSignal:
    """Zero-mean Gaussian noise per ``spec``; zero variance gives exact zeros."""
    if N < 1:
        raise ValueError("need at least one sample")
    if spec.variance == 0.0:
        return SampledSignal(values=np.zeros(N), T=T, t0=t0)
    rng = np.random.default_rng(seed)
    white = rng.normal(0.0, np.sqrt(spec.variance), size=N)
    if spec.coloring is not None:
        b, a = spec.coloring
        white = scipy.signal.lfilter(b, a, white)
    return SampledSignal(values=white, T=T, t0=t0)


def synthesize_record(
    tf: TransferFunction,
    u: SampledSignal,
    true_hold: Hold | None,
    noise: NoiseSpec,
    seed: int = 0,
    analytic_freqs=None,
    analytic_amplitudes=1.0,
) -> SampledRecord:
    """Simulate a stable system on ``u`` and add output noise.

    ``true_hold`` fixes the intersample behaviour the simulation honours
    exactly.  Passing None requests the analytic stationary path instead:
    ``analytic_freqs`` must then be given, the noise-free output is the
    closed-form multisine response on u's grid, and the meta hold reads
    "analytic".  The caller is responsible for u actually being that
    multisine.
    """
    if not is_stable(tf):
        raise ValueError("simulation needs a stable system")
    if true_hold is None:
        if analytic_freqs is None:
            raise ValueError("analytic output needs the multisine frequencies")
        clean = analytic_multisine_output(
            tf, u.times(), freqs=analytic_freqs, amplitudes=analytic_amplitudes
        )
        hold_name = "analytic"
    else:
        ss = realize_filter_bank(tf.den, [tf.num])
        bank = discretize(ss, u.T, true_hold)
        clean = SampledSignal(values=bank_outputs(bank, u.values)[0], T=u.T, t0=u.t0)
        hold_name = str(true_hold)
    e = gen_gaussian_noise(len(u), noise, seed=seed, T=u.T, t0=u.t0)
    y = SampledSignal(values=clean.values + e.values, T=u.T, t0=u.t0)
    meta = RecordMeta(
        system=format_tf(tf), hold=hold_name, variance=noise.variance,
        seed=seed, T=u.T, N=len(u), t0=u.t0,
    )
    return SampledRecord(u=u, y=y, meta=meta)


def drop_initial(record: SampledRecord, count: int) -> SampledRecord:
    """Trim the first ``count`` samples (transient warm-up) off a record."""
    if not 0 <= count < record.N:
        raise ValueError(f"cannot drop {count} of {record.N} samples")
    if count == 0:
        return record
    t0 = record.u.t0 + count * record.T
    u = SampledSignal(values=record.u.values[count:], T=record.T, t0=t0)
    y = SampledSignal(values=record.y.values[count:], T=record.T, t0=t0)
    meta = record.meta
    if meta is not None:
        meta = replace(meta, N=record.N - count, t0=t0)
    return SampledRecord(u=u, y=y, meta=meta)


def write_signal(sig: SampledSignal, path) -> None:
    path = Path(path)
    t = sig.times()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value"])
        for tk, vk in zip(t, sig.values):
            writer.writerow([repr(float(tk)), repr(float(vk))])


def read_signal(path) -> SampledSignal:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise ValueError(f"{path}: expected header 't,value'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    t0, T = _uniform_grid(t)
    return SampledSignal(values=v, T=T, t0=t0)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def write_record(record: SampledRecord, path) -> None:
    """Write ``t,u,y`` rows plus the ``<path>.meta`` sidecar when meta is set."""
    path = Path(path)
    t = record.u.times()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u", "y"])
        for tk, uk, yk in zip(t, record.u.values, record.y.values):
            writer.writerow([repr(float(tk)), repr(float(uk)), repr(float(yk))])
    meta = record.meta
    if meta is None:
        return
    lines = [
        f"system={meta.system}",
        f"hold={meta.hold}",
        f"variance={meta.variance!r}",
        f"seed={meta.seed}",
        f"T={meta.T!r}",
        f"N={meta.N}",
        f"t0={meta.t0!r}",
    ]
    _meta_path(path).write_text("\n".join(lines) + "\n")


def read_record(path) -> SampledRecord:
    """Read a ``t,u,y`` CSV; the sidecar, when present, pins T and t0 exactly."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "u", "y"]:
            raise ValueError(f"{path}: expected header 't,u,y'")
        rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = np.array([r[0] for r in rows])
    u = np.array([r[1] for r in rows])
    y = np.array([r[2] for r in rows])
    t0, T = _uniform_grid(t)

    meta = None
    mpath = _meta_path(path)
    if mpath.exists():
        fields: dict[str, str] = {}
        for line in mpath.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{mpath}: malformed line {line!r}")
            fields[key.strip()] = value.strip()
        try:
            meta = RecordMeta(
                system=fields["system"],
                hold=fields["hold"],
                variance=float(fields["variance"]),
                seed=int(fields["seed"]),
                T=float(fields["T"]),
                N=int(fields["N"]),
                t0=float(fields.get("t0", "0.0")),
            )
        except KeyError as exc:
            raise ValueError(f"{mpath}: missing key {exc}") from exc
        if meta.N != t.size:
            raise ValueError(
                f"{mpath}: meta N={meta.N} disagrees with {t.size} data rows"
            )
        # Validate instead of trusting the inferred grid: the sidecar wrote
        # these exactly.
        if not np.isclose(meta.T, T, rtol=1e-9, atol=0.0):
            raise ValueError(f"{mpath}: meta T={meta.T} disagrees with data grid")
        T = meta.T
        t0 = meta.t0
    us = SampledSignal(values=u, T=T, t0=t0)
    ys = SampledSignal(values=y, T=T, t0=t0)
    return SampledRecord(u=us, y=ys, meta=meta)


def parse_system(text: str) -> TransferFunction:
    """Alias of the transfer-function text parser, re-exported for CLI use."""
    return parse_tf(text)
