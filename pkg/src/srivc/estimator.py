"""Iterative instrumental-variable estimator with per-signal holds.

One iteration filters the data through banks built from the current
denominator estimate, assembles the regressor and a noise-free instrument
from the current model, and solves the sample normal equations.  The hold
assigned to each signal decides how its filter banks are discretised;
regressor input, instrument input and output each carry their own hold.

Iterations stop when the relative parameter step drops below ``epsilon``
or after ``max_iterations`` sweeps.  Unstable iterates are mirrored back
into the stability region before the next sweep, since the banks are only
defined for stable denominators.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.special

from srivc.ctlti import (
    TransferFunction,
    as_poly,
    is_stable,
    reflect_unstable_poles,
    tf_from_theta,
    theta_from_tf,
)
from srivc.holdsim import (
    Hold,
    SampledSignal,
    bank_outputs,
    discretize,
    filter_derivatives,
    realize_filter_bank,
)

__all__ = [
    "HoldPolicy",
    "SrivcConfig",
    "EstimationResult",
    "SingularNormalMatrix",
    "build_regressor",
    "build_instrument",
    "srivc_step",
    "srivc_estimate",
    "lssvf_initialize",
    "gee",
    "write_result_csv",
]


class SingularNormalMatrix(RuntimeError):
    """Normal equations are singular or too badly conditioned to trust."""


@dataclass(frozen=True)
class HoldPolicy:
    """Hold assignment for the three places a signal enters the estimator."""

    regressor_input: Hold = Hold.ZOH
    instrument_input: Hold = Hold.ZOH
    output: Hold = Hold.ZOH

    @classmethod
    def uniform(cls, hold: Hold) -> "HoldPolicy":
        return cls(regressor_input=hold, instrument_input=hold, output=hold)

    def describe(self) -> str:
        return (
            f"regressor_input={self.regressor_input},"
            f"instrument_input={self.instrument_input},output={self.output}"
        )


@dataclass(frozen=True)
class SrivcConfig:
    """Orders, holds and iteration controls for one estimation run.

    ``init_lambda`` is the cutoff of the state-variable filter used by the
    least-squares initialisation; None means 1/T of the record.  A caller
    supplied ``theta0`` skips that initialisation entirely.
    """

    n: int
    m: int
    holds: HoldPolicy = field(default_factory=HoldPolicy)
    max_iterations: int = 200
    epsilon: float = 1e-7
    init_lambda: float | None = None
    theta0: np.ndarray | None = None
    condition_limit: float = 1e12

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise ValueError("model orders must be nonnegative")
        if self.m > self.n:
            raise ValueError(
                f"numerator order {self.m} exceeds denominator order {self.n}"
            )
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        if self.init_lambda is not None and not (
            np.isfinite(self.init_lambda) and self.init_lambda > 0.0
        ):
            raise ValueError("init_lambda must be positive when given")
        if self.condition_limit <= 0.0:
            raise ValueError("condition_limit must be positive")
        if self.theta0 is not None:
            theta0 = np.asarray(self.theta0, dtype=float)
            if theta0.shape != (self.dim,):
                raise ValueError(
                    f"theta0 must have shape ({self.dim},), got {theta0.shape}"
                )
            if not np.all(np.isfinite(theta0)):
                raise ValueError("theta0 must be finite")
            object.__setattr__(self, "theta0", theta0)

    @property
    def dim(self) -> int:
        return self.n + self.m + 1


@dataclass
class EstimationResult:
    """Iteration trace of one estimation run.

    ``theta_history`` has one row per iterate including the initial point,
    so ``iterations == len(theta_history) - 1``.  ``condition_estimates``
    and ``stabilized_flags`` have one entry per completed iteration.
    """

    theta_history: np.ndarray
    converged: bool
    iterations: int
    final_relative_step: float
    condition_estimates: np.ndarray
    stabilized_flags: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.theta_history[-1]


def _check_model(model: TransferFunction) -> None:
    if not is_stable(model):
        raise ValueError(
            "filter banks need a stable denominator; stabilise the iterate first"
        )


def build_regressor(record, model: TransferFunction, holds: HoldPolicy):
    """Filtered regressor matrix and filtered output for one model iterate.

    Columns are, in order, the negated output derivatives p^n y .. p y and
    the input derivatives p^m u .. u, all filtered by 1/A(p).  Output rows
    use ``holds.output``, input rows use ``holds.regressor_input``.
    Returns ``(Phi, y_f)`` with Phi of shape (N, n + m + 1).
    """
    _check_model(model)
    n = model.order_den
    m = model.order_num
    out_rows = filter_derivatives(model.den, record.y, n, holds.output)
    in_rows = filter_derivatives(model.den, record.u, m, holds.regressor_input)
    # out_rows[i] is order i; regressor wants orders n..1 negated, then m..0.
    Phi = np.concatenate([-out_rows[:0:-1], in_rows[::-1]], axis=0).T
    y_f = out_rows[0]
    return Phi, y_f


def build_instrument(record, model: TransferFunction, holds: HoldPolicy) -> np.ndarray:
    """Noise-free companion of the regressor, built from the input only.

    The output-derivative columns are replaced by -p^i B(p)/A(p)^2 u; the
    input-derivative columns repeat the regressor construction.  Both parts
    use ``holds.instrument_input``, so when that matches
    ``holds.regressor_input`` the input columns are bit-identical to the
    regressor's.
    """
    _check_model(model)
    n = model.order_den
    m = model.order_num
    blocks = []
    if n > 0:
        den2 = np.polymul(model.den, model.den)
        numerators = [
            np.concatenate([model.num, np.zeros(i)]) for i in range(n, 0, -1)
        ]
        ss = realize_filter_bank(den2, numerators)
        bank = discretize(ss, record.u.T, holds.instrument_input)
        model_rows = bank_outputs(bank, record.u.values)
        blocks.append(-model_rows)
    in_rows = filter_derivatives(model.den, record.u, m, holds.instrument_input)
    blocks.append(in_rows[::-1])
    return np.concatenate(blocks, axis=0).T


def _solve_normal(Phi_hat, Phi, y_f, condition_limit: float):
    N, dim = Phi.shape
    if N < dim:
        raise SingularNormalMatrix(
            f"{N} samples cannot determine {dim} parameters"
        )
    R = Phi_hat.T @ Phi / N
    rhs = Phi_hat.T @ y_f / N
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > condition_limit:
        raise SingularNormalMatrix(
            f"normal matrix condition estimate {cond:.3e} exceeds limit {condition_limit:.3e}"
        )
    try:
        theta = scipy.linalg.solve(R, rhs)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularNormalMatrix(str(exc)) from exc
    if not np.all(np.isfinite(theta)):
        raise SingularNormalMatrix("normal solve produced non-finite parameters")
    return theta, cond


def srivc_step(record, model: TransferFunction, config: SrivcConfig):
    """One sweep: rebuild filters from ``model``, solve for the next iterate.

    Returns ``(theta_next, condition_estimate)``.  Raises
    :class:`SingularNormalMatrix` when the sample normal matrix is rank
    deficient or its condition estimate exceeds ``config.condition_limit``.
    """
    Phi, y_f = build_regressor(record, model, config.holds)
    Phi_hat = build_instrument(record, model, config.holds)
    return _solve_normal(Phi_hat, Phi, y_f, config.condition_limit)


def _relative_step(theta_next: np.ndarray, theta: np.ndarray) -> float:
    scale = float(np.linalg.norm(theta_next))
    step = float(np.linalg.norm(theta_next - theta))
    if scale == 0.0:
        return 0.0 if step == 0.0 else np.inf
    return step / scale


def srivc_estimate(record, config: SrivcConfig) -> EstimationResult:
    """Run the full iteration from initialisation to convergence.

    The starting point is ``config.theta0`` when given, otherwise the
    state-variable-filter least squares fit.  Either way an unstable
    starting model is mirrored stable before the first sweep, as is every
    unstable iterate (recorded in ``stabilized_flags``).
    """
    if config.theta0 is not None:
        theta = config.theta0.copy()
    else:
        theta = lssvf_initialize(record, config)
    model0 = tf_from_theta(theta, config.n, config.m)
    if not is_stable(model0):
        theta = theta_from_tf(reflect_unstable_poles(model0))

    history = [theta]
    conds: list[float] = []
    flags: list[bool] = []
    converged = False
    rel_step = np.inf
    for _ in range(config.max_iterations):
        model = tf_from_theta(theta, config.n, config.m)
        theta_next, cond = srivc_step(record, model, config)
        stabilized = False
        candidate = tf_from_theta(theta_next, config.n, config.m)
        if not is_stable(candidate):
            candidate = reflect_unstable_poles(candidate)
            theta_next = theta_from_tf(candidate)
            stabilized = True
        history.append(theta_next)
        conds.append(cond)
        flags.append(stabilized)
        rel_step = _relative_step(theta_next, theta)
        theta = theta_next
        if rel_step < config.epsilon:
            converged = True
            break
    return EstimationResult(
        theta_history=np.asarray(history),
        converged=converged,
        iterations=len(history) - 1,
        final_relative_step=rel_step,
        condition_estimates=np.asarray(conds),
        stabilized_flags=np.asarray(flags, dtype=bool),
    )


def lssvf_initialize(record, config: SrivcConfig) -> np.ndarray:
    """Least-squares fit with a fixed state-variable filter as prefilter.

    The prefilter denominator is (p/lambda + 1)^n with lambda from
    ``config.init_lambda`` (default 1/T).  The instrument equals the
    regressor here, so the solution is ordinary least squares; a rank
    deficient regressor raises :class:`SingularNormalMatrix`.
    """
    lam = config.init_lambda if config.init_lambda is not None else 1.0 / record.T
    n = config.n
    # (p/lambda + 1)^n expanded highest power first; constant term is 1 exactly.
    k = np.arange(n, -1, -1)
    svf_den = scipy.special.comb(n, k) * lam ** (-k.astype(float))
    # Numerator content is irrelevant here; only its length (the declared
    # order m) shapes the regressor.
    probe = TransferFunction(np.concatenate([np.zeros(config.m), [1.0]]), svf_den)
    Phi, y_f = build_regressor(record, probe, config.holds)
    if Phi.shape[0] < Phi.shape[1]:
        raise SingularNormalMatrix(
            f"{Phi.shape[0]} samples cannot determine {Phi.shape[1]} parameters"
        )
    theta, _, rank, _ = np.linalg.lstsq(Phi, y_f, rcond=None)
    if rank < Phi.shape[1]:
        raise SingularNormalMatrix(
            f"initialisation regressor has rank {rank} < {Phi.shape[1]}"
        )
    if not np.all(np.isfinite(theta)):
        raise SingularNormalMatrix("initialisation produced non-finite parameters")
    return theta


def gee(theta, n: int, m: int, record, prefilter_den, holds: HoldPolicy):
    """Prefiltered equation error A(p) y - B(p) u for a trial parameter vector.

    Both sides are filtered by 1/``prefilter_den`` (a stable polynomial of
    degree >= n) before the derivative combinations are taken, using
    ``holds.output`` on y and ``holds.regressor_input`` on u.  Returns the
    error as a sampled signal on the record's grid.
    """
    model = tf_from_theta(theta, n, m)
    pre = _stable_prefilter(prefilter_den, min_degree=n)
    out_rows = filter_derivatives(pre, record.y, n, holds.output)
    in_rows = filter_derivatives(pre, record.u, m, holds.regressor_input)
    # den[::-1][i] is the coefficient of p^i, matching row i of the bank.
    eps = model.den[::-1] @ out_rows - model.num[::-1] @ in_rows
    return SampledSignal(values=eps, T=record.T, t0=record.u.t0)


def _stable_prefilter(den, min_degree: int) -> np.ndarray:
    """Validate a prefilter denominator: degree bound, constant term, stability."""
    pre = as_poly(den)
    if pre.size - 1 < min_degree:
        raise ValueError(
            f"prefilter degree {pre.size - 1} is below the model order {min_degree}"
        )
    pre_tf = TransferFunction(np.ones(1), pre)
    if not is_stable(pre_tf):
        raise ValueError("prefilter denominator must be stable")
    return pre_tf.den


def write_result_csv(result: EstimationResult, n: int, m: int, path) -> None:
    """One row per iteration: parameters, relative step, condition, stabilized."""
    names = [f"a{i}" for i in range(1, n + 1)] + [f"b{i}" for i in range(0, m + 1)]
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", *names, "relative_step", "condition", "stabilized"])
        history = result.theta_history
        for it in range(history.shape[0]):
            if it == 0:
                step = ""
                cond = ""
                flag = ""
            else:
                prev = history[it - 1]
                step = repr(_relative_step(history[it], prev))
                cond = repr(float(result.condition_estimates[it - 1]))
                flag = "1" if result.stabilized_flags[it - 1] else "0"
            writer.writerow(
                [str(it), *[repr(float(v)) for v in history[it]], step, cond, flag]
            )
