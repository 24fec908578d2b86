"""Compiled state-recursion loops.

Kept in a separate module so numba's on-disk cache has a stable file to
key on.  Only the per-sample recursion lives here; all matrix setup stays
in plain numpy where it runs once per filter bank.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def state_trajectory_step(Ad, Bd, u, x0):
    """States under a piecewise-constant input: x[k+1] = Ad x[k] + Bd u[k]."""
    N = u.shape[0]
    n = x0.shape[0]
    X = np.empty((N, n))
    x = x0.copy()
    for k in range(N):
        for i in range(n):
            X[k, i] = x[i]
        xn = Bd * u[k]
        for i in range(n):
            acc = xn[i]
            for j in range(n):
                acc += Ad[i, j] * x[j]
            xn[i] = acc
        x = xn
    return X


@njit(cache=True)
def state_trajectory_ramp(Ad, Bd0, Bd1, u, x0):
    """States under a piecewise-linear input.

    x[k+1] = Ad x[k] + Bd0 u[k] + Bd1 u[k+1]; the final state needs u[N],
    which is outside the record, so the recursion stops at k = N-2 and the
    trajectory still has one state per sample.
    """
    N = u.shape[0]
    n = x0.shape[0]
    X = np.empty((N, n))
    x = x0.copy()
    for i in range(n):
        X[0, i] = x[i]
    for k in range(N - 1):
        xn = Bd0 * u[k] + Bd1 * u[k + 1]
        for i in range(n):
            acc = xn[i]
            for j in range(n):
                acc += Ad[i, j] * x[j]
            xn[i] = acc
        x = xn
        for i in range(n):
            X[k + 1, i] = x[i]
    return X
