"""Polynomial algebra for continuous-time transfer functions.

Polynomials in the differential operator p are stored as 1-D float arrays,
highest power first, so ``[0.04, 0.2, 1.0]`` is ``0.04 p^2 + 0.2 p + 1``.
Transfer functions pin the denominator constant term at exactly 1.0; the
leading denominator coefficient stays free.  That convention makes the
stacked parameter vector ``[a_1 .. a_n, b_0 .. b_m]`` well defined without
forcing the denominator to be monic.

Array length is authoritative for model order: a numerator of length m+1
declares order m even when its leading entries are zero.  Callers that
trim coefficients change the declared order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Denominator constant terms smaller than this (relative to the largest
# coefficient) cannot be scaled to 1 without blowing up the model.
_DEGENERATE_TOL = 1e-12


class DegenerateModelError(ValueError):
    """Denominator constant term is (numerically) zero and cannot be pinned at 1."""


class ImaginaryAxisPoleError(ValueError):
    """A pole sits on the imaginary axis, so mirror stabilisation is undefined."""


def as_poly(coeffs) -> np.ndarray:
    """Validate and convert a coefficient sequence to a float64 array."""
    poly = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if poly.ndim != 1 or poly.size == 0:
        raise ValueError("polynomial must be a nonempty 1-D coefficient array")
    if not np.all(np.isfinite(poly)):
        raise ValueError("polynomial coefficients must be finite")
    return poly


def poly_degree(poly) -> int:
    """Declared degree, i.e. len - 1.  Leading zeros are not stripped."""
    return as_poly(poly).size - 1


def poly_roots(poly) -> np.ndarray:
    """Roots of a polynomial of declared degree >= 1.

    Computed as eigenvalues of the companion matrix.  The zero polynomial
    and degree-0 input are rejected.
    """
    p = as_poly(poly)
    if p.size < 2:
        raise ValueError("need declared degree >= 1 to take roots")
    if not np.any(p != 0.0):
        raise ValueError("zero polynomial has no well-defined roots")
    return np.roots(p)


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Proper rational function B(p)/A(p) with A's constant term pinned at 1.

    Construction rescales both polynomials by the raw denominator constant
    term, so any representation of the same rational function normalises
    to the same coefficient arrays.  Raises :class:`DegenerateModelError`
    when that constant term is numerically zero, and ``ValueError`` for an
    improper pair or a zero leading denominator coefficient.
    """

    num: np.ndarray
    den: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return np.array_equal(self.num, other.num) and np.array_equal(
            self.den, other.den
        )

    def __hash__(self):
        return hash((self.num.tobytes(), self.den.tobytes()))

    def __post_init__(self):
        num = as_poly(self.num)
        den = as_poly(self.den)
        if num.size > den.size:
            raise ValueError(
                f"improper transfer function: numerator order {num.size - 1} "
                f"exceeds denominator order {den.size - 1}"
            )
        scale = den[-1]
        if abs(scale) < _DEGENERATE_TOL * max(1.0, np.max(np.abs(den))):
            raise DegenerateModelError(
                "denominator constant term is numerically zero"
            )
        den = den / scale
        num = num / scale
        if den.size > 1 and den[0] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order_den(self) -> int:
        return self.den.size - 1

    @property
    def order_num(self) -> int:
        return self.num.size - 1


def tf_from_theta(theta, n: int, m: int) -> TransferFunction:
    """Build the transfer function encoded by ``[a_1 .. a_n, b_0 .. b_m]``.

    ``n`` and ``m`` are the declared denominator and numerator orders with
    ``m <= n``; the denominator constant term is implicit and equal to 1.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size != n + m + 1:
        raise ValueError(
            f"parameter vector has length {theta.size}, expected n+m+1 = {n + m + 1}"
        )
    if m > n:
        raise ValueError(f"numerator order {m} exceeds denominator order {n}")
    if n > 0 and theta[0] == 0.0:
        raise ValueError("leading denominator coefficient a_1 must be nonzero")
    den = np.concatenate([theta[:n], [1.0]])
    num = theta[n:].copy()
    return TransferFunction(num, den)


def theta_from_tf(tf: TransferFunction) -> np.ndarray:
    """Stack ``[a_1 .. a_n, b_0 .. b_m]`` back out of a transfer function."""
    return np.concatenate([tf.den[:-1], tf.num])


def is_stable(tf: TransferFunction) -> bool:
    """True when every pole has strictly negative real part.

    A static gain (denominator degree 0) has no poles and counts as stable.
    """
    if tf.order_den == 0:
        return True
    return bool(np.all(poly_roots(tf.den).real < 0.0))


def reflect_unstable_poles(tf: TransferFunction, axis_tol: float = 1e-12) -> TransferFunction:
    """Mirror right-half-plane poles into the left half plane.

    Each pole with positive real part is replaced by its reflection across
    the imaginary axis (real part negated, imaginary part kept), which
    preserves the pole magnitudes.  The numerator is left untouched; the
    rebuilt denominator is rescaled so its constant term is 1 again.  A
    stable input is returned unchanged.  Poles within ``axis_tol`` of the
    imaginary axis (relative to their magnitude) cannot be stabilised this
    way and raise :class:`ImaginaryAxisPoleError`.
    """
    if tf.order_den == 0:
        return tf
    roots = poly_roots(tf.den)
    near_axis = np.abs(roots.real) <= axis_tol * np.maximum(1.0, np.abs(roots))
    if np.any(near_axis):
        raise ImaginaryAxisPoleError(
            f"pole(s) on the imaginary axis: {roots[near_axis]}"
        )
    unstable = roots.real > 0.0
    if not np.any(unstable):
        return tf
    reflected = roots.copy()
    reflected[unstable] = -np.conj(roots[unstable])
    # np.poly returns a monic polynomial; scale the constant term back to 1.
    # Conjugate pairs reflect to conjugate pairs, so the tiny imaginary
    # residue is rounding noise.
    monic = np.poly(reflected)
    if np.iscomplexobj(monic):
        monic = monic.real
    return TransferFunction(tf.num, monic / monic[-1])


def tf_frequency_response(tf: TransferFunction, omega: float) -> complex:
    """Evaluate B(j omega) / A(j omega) at a single real frequency."""
    s = 1j * float(omega)
    denominator = np.polyval(tf.den, s)
    # Characteristic size of the denominator at this frequency; |A(s)| can
    # never exceed it, so a much smaller value means we sit on a pole.
    scale = np.polyval(np.abs(tf.den), abs(s))
    if abs(denominator) < 1e-12 * max(scale, _DEGENERATE_TOL):
        raise ZeroDivisionError(f"evaluation frequency {omega} lies on a pole")
    return complex(np.polyval(tf.num, s) / denominator)


def is_coprime(tf: TransferFunction, tol: float = 1e-8) -> bool:
    """Check that no numerator root coincides with a pole within ``tol``.

    Shared roots make the parameterisation locally unidentifiable; callers
    use this as a diagnostic, not as a validity gate, because intermediate
    iterates of the estimator can pass through near-degenerate models.
    """
    if tf.order_den == 0 or tf.order_num == 0:
        return True
    if not np.any(tf.num != 0.0):
        return True
    zeros = poly_roots(tf.num)
    poles = poly_roots(tf.den)
    dist = np.abs(zeros[:, None] - poles[None, :])
    return bool(np.min(dist) > tol)


def warn_if_not_coprime(tf: TransferFunction, tol: float = 1e-8) -> None:
    if not is_coprime(tf, tol):
        warnings.warn(
            "numerator and denominator share a root within tolerance; "
            "the model is close to a lower-order one",
            stacklevel=2,
        )


def format_tf(tf: TransferFunction) -> str:
    """Render as ``num:b0,..,bm;den:a1,..,an,1`` with full-precision floats."""
    num = ",".join(repr(float(c)) for c in tf.num)
    den = ",".join(repr(float(c)) for c in tf.den)
    return f"num:{num};den:{den}"


def parse_tf(text: str) -> TransferFunction:
    """Parse the ``num:...;den:...`` form produced by :func:`format_tf`."""
    parts = text.strip().split(";")
    if len(parts) != 2:
        raise ValueError(f"expected 'num:...;den:...', got {text!r}")
    coeffs = {}
    for part in parts:
        key, sep, body = part.strip().partition(":")
        key = key.strip().lower()
        if not sep or key not in ("num", "den"):
            raise ValueError(f"expected 'num:...' and 'den:...' sections, got {part!r}")
        try:
            coeffs[key] = [float(tok) for tok in body.split(",")]
        except ValueError as exc:
            raise ValueError(f"bad coefficient in {part!r}") from exc
    if set(coeffs) != {"num", "den"}:
        raise ValueError("both num and den sections are required")
    return TransferFunction(coeffs["num"], coeffs["den"])
