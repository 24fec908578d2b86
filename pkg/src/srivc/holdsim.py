"""Sampled-data simulation of continuous-time filter banks.

A filter bank is a single denominator A(p) shared by several numerators
N_1(p) .. N_q(p).  All outputs are taken from one state trajectory, so
coefficient identities between the outputs (for instance that the
A-weighted combination of derivative outputs reconstructs the input)
hold to machine precision instead of merely to discretisation accuracy.

Discretisation is exact for the declared intersample behaviour of the
input: ZOH assumes the input is constant between samples, FOH assumes it
is piecewise linear (the ramp-invariant convention, using the next sample
as the segment endpoint).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from srivc import _kernels
from srivc.ctlti import as_poly


class Hold(enum.Enum):
    """Intersample assumption attached to one sampled signal."""

    ZOH = "zoh"
    FOH = "foh"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Hold":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown hold {text!r}, expected 'zoh' or 'foh'") from None


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled scalar signal: values plus sampling period and offset."""

    values: np.ndarray
    T: float
    t0: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("signal values must be 1-D")
        if not (np.isfinite(self.T) and self.T > 0.0):
            raise ValueError(f"sampling period must be positive, got {self.T}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def times(self) -> np.ndarray:
        return self.t0 + self.T * np.arange(self.values.size)


@dataclass(frozen=True)
class StateSpaceRealization:
    """Continuous-time realization with a possibly multi-row output map."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.asarray(self.D, dtype=float).reshape(-1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape != (n,) or C.shape[1:] != (n,) or D.shape != (C.shape[0],):
            raise ValueError("inconsistent state-space dimensions")
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def order(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class DiscreteFilterBank:
    """Discretised bank: shared (Ad, Bd[, Bd1]) recursion, one (C, D) row per output.

    ``Bd1`` is None for ZOH.  For FOH the recursion consumes u[k] through
    ``Bd`` and u[k+1] through ``Bd1``.
    """

    Ad: np.ndarray
    Bd: np.ndarray
    Cd: np.ndarray
    Dd: np.ndarray
    T: float
    hold: Hold
    Bd1: np.ndarray | None = field(default=None)

    @property
    def order(self) -> int:
        return self.Ad.shape[0]

    @property
    def width(self) -> int:
        return self.Cd.shape[0]


def realize_filter_bank(den, numerators) -> StateSpaceRealization:
    """Controllable canonical realization of N_i(p)/A(p) for shared A.

    ``den`` must have a nonzero constant term (it is rescaled to 1) and a
    nonzero leading coefficient.  Every numerator must satisfy
    deg(N_i) <= deg(A); biproper entries produce a direct feedthrough term.
    A degree-0 denominator yields an empty state and pure feedthrough rows.
    """
    den = as_poly(den)
    if den[-1] == 0.0:
        raise ValueError("denominator constant term must be nonzero")
    scale = den[-1]
    den = den / scale
    n = den.size - 1
    if n > 0 and den[0] == 0.0:
        raise ValueError("leading denominator coefficient must be nonzero")
    # Scaling both polynomials keeps every ratio N_i/A unchanged; for the
    # usual constant-1 denominators this is an exact no-op.
    numerators = [as_poly(num) / scale for num in numerators]
    if not numerators:
        raise ValueError("need at least one numerator")
    for num in numerators:
        if num.size > den.size:
            raise ValueError("numerator degree exceeds denominator degree")

    lead = den[0] if n > 0 else 1.0
    if n == 0:
        A = np.zeros((0, 0))
        B = np.zeros(0)
        C = np.zeros((len(numerators), 0))
        D = np.array([num[-1] for num in numerators])
        return StateSpaceRealization(A, B, C, D)

    # Companion form for the monic rescaling A(p)/a_1: state x_i carries the
    # i-th derivative chain tap, input enters the last row.
    monic_tail = den[1:] / lead  # c_1 .. c_n, coefficients of p^{n-1} .. p^0
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -monic_tail[::-1]
    B = np.zeros(n)
    B[-1] = 1.0
    C = np.zeros((len(numerators), n))
    D = np.zeros(len(numerators))
    for k, num in enumerate(numerators):
        padded = np.zeros(n + 1)
        padded[n + 1 - num.size:] = num
        D[k] = padded[0] / lead
        # Feedthrough absorbs the p^n part; the C row carries what is left
        # after deflating the numerator by its leading term times A(p)/a_1.
        C[k, :] = (padded[1:][::-1] - padded[0] * monic_tail[::-1]) / lead
    return StateSpaceRealization(A, B, C, D)


def matrix_exponential(M) -> np.ndarray:
    """exp(M) for a square matrix (scaling-and-squaring Pade)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix exponential needs a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix exponential needs finite entries")
    if M.size == 0:
        return np.zeros((0, 0))
    return scipy.linalg.expm(M)


def discretize(ss: StateSpaceRealization, T: float, hold: Hold) -> DiscreteFilterBank:
    """Exact sampled equivalent of a bank for the given input hold.

    Both holds come out of one augmented matrix exponential:

    * ZOH: exp([[A, B], [0, 0]] T) packs Ad and the step integral of e^{As}B.
    * FOH: exp([[A, B, 0], [0, 0, 1], [0, 0, 0]] T) additionally packs the
      ramp integral; splitting it gives the weights on u[k] and u[k+1].
    """
    if not (np.isfinite(T) and T > 0.0):
        raise ValueError(f"sampling period must be positive, got {T}")
    n = ss.order
    if n == 0:
        return DiscreteFilterBank(
            Ad=np.zeros((0, 0)), Bd=np.zeros(0), Cd=ss.C.copy(), Dd=ss.D.copy(),
            T=T, hold=hold,
        )
    if hold is Hold.ZOH:
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = ss.A
        M[:n, n] = ss.B
        E = matrix_exponential(M * T)
        Ad = E[:n, :n]
        Bd = E[:n, n]
        Bd1 = None
    elif hold is Hold.FOH:
        M = np.zeros((n + 2, n + 2))
        M[:n, :n] = ss.A
        M[:n, n] = ss.B
        M[n, n + 1] = 1.0
        E = matrix_exponential(M * T)
        Ad = E[:n, :n]
        G1 = E[:n, n]        # step integral of e^{As} B
        G2 = E[:n, n + 1]    # ramp integral of e^{As} B
        Bd1 = G2 / T
        Bd = G1 - Bd1
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown hold {hold!r}")
    if not (np.all(np.isfinite(Ad)) and np.all(np.isfinite(Bd))):
        raise ValueError("discretisation produced non-finite matrices")
    return DiscreteFilterBank(
        Ad=np.ascontiguousarray(Ad), Bd=np.ascontiguousarray(Bd),
        Cd=ss.C.copy(), Dd=ss.D.copy(), T=T, hold=hold, Bd1=Bd1,
    )


def _state_trajectory(bank: DiscreteFilterBank, u: np.ndarray, x0: np.ndarray) -> np.ndarray:
    if bank.hold is Hold.ZOH:
        return _kernels.state_trajectory_step(bank.Ad, bank.Bd, u, x0)
    return _kernels.state_trajectory_ramp(bank.Ad, bank.Bd, bank.Bd1, u, x0)


def bank_outputs(bank: DiscreteFilterBank, u: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
    """All bank outputs for one input array; shape (width, len(u)).

    The state trajectory is computed once and every output row is a linear
    function of it, which is what makes cross-row coefficient identities
    exact.
    """
    u = np.ascontiguousarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("input must be a nonempty 1-D array")
    if x0 is None:
        x0 = np.zeros(bank.order)
    else:
        x0 = np.ascontiguousarray(x0, dtype=float)
        if x0.shape != (bank.order,):
            raise ValueError(f"initial state must have shape ({bank.order},)")
    if bank.order == 0:
        return np.outer(bank.Dd, u)
    X = _state_trajectory(bank, u, x0)
    return bank.Cd @ X.T + np.outer(bank.Dd, u)


def run_filter_bank(
    bank: DiscreteFilterBank, u: SampledSignal, x0: np.ndarray | None = None
) -> list[SampledSignal]:
    """Run one input signal through the bank; one output signal per numerator."""
    if not np.isclose(u.T, bank.T, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"signal period {u.T} does not match bank period {bank.T}"
        )
    Y = bank_outputs(bank, u.values, x0)
    return [SampledSignal(values=row, T=u.T, t0=u.t0) for row in Y]


def filter_derivatives(den, sig: SampledSignal, max_order: int, hold: Hold) -> np.ndarray:
    """Sampled p^i / A(p) applied to ``sig`` for i = 0 .. max_order.

    Returns an array of shape (max_order + 1, len(sig)); row i is the
    order-i output.  ``max_order`` must not exceed deg(A) so every entry of
    the bank stays proper.  All rows share one state trajectory.
    """
    den = as_poly(den)
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if max_order > den.size - 1:
        raise ValueError(
            f"derivative order {max_order} exceeds denominator degree {den.size - 1}"
        )
    numerators = [np.concatenate([[1.0], np.zeros(i)]) for i in range(max_order + 1)]
    ss = realize_filter_bank(den, numerators)
    bank = discretize(ss, sig.T, hold)
    return bank_outputs(bank, sig.values)
