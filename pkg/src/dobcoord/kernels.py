"""Hot inner loops: fixed-step RK4 on a piecewise-linear vector field.

Two interchangeable implementations exist. The numba one is used when
numba imports and ``DOBCOORD_NUMBA`` is not ``0``; the numpy one is the
reference path and is always available. Both return identical results up
to floating-point summation order.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

DIVERGENCE_LIMIT = 1e9


def numba_enabled():
    return numba is not None and os.environ.get("DOBCOORD_NUMBA", "1") != "0"


def rk4_linear_numpy(M, z0, steps, out):
    """Integrate ``z' = M z`` over the step sizes ``steps``.

    ``out`` must have shape ``(len(steps) + 1, n)``; row 0 receives ``z0``.
    Returns the index of the first row whose max-norm exceeds the
    divergence limit (or is non-finite), or -1.
    """
    z = np.array(z0, dtype=float)
    out[0] = z
    for k in range(steps.shape[0]):
        h = steps[k]
        k1 = M @ z
        k2 = M @ (z + 0.5 * h * k1)
        k3 = M @ (z + 0.5 * h * k2)
        k4 = M @ (z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = z
        if not np.max(np.abs(z)) <= DIVERGENCE_LIMIT:
            return k + 1
    return -1


def _rk4_linear_loops(M, z0, steps, out):
    n = z0.shape[0]
    z = z0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for j in range(n):
        out[0, j] = z[j]
    for s in range(steps.shape[0]):
        h = steps[s]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * z[j]
            k1[i] = acc
        for j in range(n):
            tmp[j] = z[j] + 0.5 * h * k1[j]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * tmp[j]
            k2[i] = acc
        for j in range(n):
            tmp[j] = z[j] + 0.5 * h * k2[j]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * tmp[j]
            k3[i] = acc
        for j in range(n):
            tmp[j] = z[j] + h * k3[j]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * tmp[j]
            k4[i] = acc
        big = 0.0
        for j in range(n):
            z[j] = z[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            out[s + 1, j] = z[j]
            a = abs(z[j])
            # NaN fails every comparison, so test the negation
            if not a <= big:
                big = a if a == a else np.inf
        if not big <= DIVERGENCE_LIMIT:
            return s + 1
    return -1


if numba is not None:
    rk4_linear_numba = numba.njit(cache=True, fastmath=False)(_rk4_linear_loops)
else:  # pragma: no cover
    rk4_linear_numba = None


def rk4_linear(M, z0, steps, out, use_numba=None):
    """Dispatch to the numba or numpy kernel (see module docstring)."""
    if use_numba is None:
        use_numba = numba_enabled()
    M = np.ascontiguousarray(M, dtype=np.float64)
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    steps = np.ascontiguousarray(steps, dtype=np.float64)
    if use_numba:
        if rk4_linear_numba is None:
            raise RuntimeError("numba is not installed")
        return int(rk4_linear_numba(M, z0, steps, out))
    return rk4_linear_numpy(M, z0, steps, out)
