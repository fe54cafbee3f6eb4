"""Compiled inner loops for the conditional mean-shift iteration.

Rows enter as a weight ``w`` and a covariate exponent ``a = |x - X_i|^2 / (2 h1^2)``;
a row contributes ``w * exp(-(a + u^2/2))`` with ``u = (y - Y_i) / h2`` unless the
total exponent exceeds ``cutoff``, in which case it is dropped. If that drops
every row, the step is taken with all rows rescaled by the smallest exponent.
"""
import numpy as np
from numba import njit

CONVERGED = 0
MAX_ITER = 1
STALLED = 2


@njit(cache=True, nogil=True)
def _compact(w, a, Y, cutoff):
    keep = 0
    for i in range(w.shape[0]):
        if w[i] > 0.0 and a[i] <= cutoff:
            keep += 1
    wk = np.empty(keep)
    ak = np.empty(keep)
    yk = np.empty(keep)
    j = 0
    for i in range(w.shape[0]):
        if w[i] > 0.0 and a[i] <= cutoff:
            wk[j] = w[i]
            ak[j] = a[i]
            yk[j] = Y[i]
            j += 1
    return wk, ak, yk


@njit(cache=True, nogil=True)
def _shift(wk, ak, yk, y, inv_h2, cutoff):
    num = 0.0
    den = 0.0
    for i in range(wk.shape[0]):
        u = (y - yk[i]) * inv_h2
        e = ak[i] + 0.5 * u * u
        if e <= cutoff:
            t = wk[i] * np.exp(-e)
            num += t * yk[i]
            den += t
    if den == 0.0 and wk.shape[0] > 0:
        # every term truncated: far from the data the map is still defined,
        # so rescale by the smallest exponent instead of stalling
        emin = np.inf
        for i in range(wk.shape[0]):
            u = (y - yk[i]) * inv_h2
            emin = min(emin, ak[i] + 0.5 * u * u)
        for i in range(wk.shape[0]):
            u = (y - yk[i]) * inv_h2
            t = wk[i] * np.exp(emin - ak[i] - 0.5 * u * u)
            num += t * yk[i]
            den += t
    return num, den


@njit(cache=True, nogil=True)
def _ascend(wk, ak, yk, y0, h2, tol, max_iter, cutoff, path):
    """Iterate from ``y0``; returns (y, iterations, status, path_length).

    ``path`` receives y_0, y_1, ... when it has room (pass a length-0 array to
    skip recording).
    """
    inv_h2 = 1.0 / h2
    y = y0
    npath = 0
    if path.shape[0] > 0:
        path[0] = y
        npath = 1
    for it in range(1, max_iter + 1):
        num, den = _shift(wk, ak, yk, y, inv_h2, cutoff)
        if den <= 0.0:
            return y, it - 1, STALLED, npath
        y_new = num / den
        if npath < path.shape[0]:
            path[npath] = y_new
            npath += 1
        if abs(y_new - y) < tol:
            return y_new, it, CONVERGED, npath
        y = y_new
    return y, max_iter, MAX_ITER, npath


@njit(cache=True, nogil=True)
def ascend_grid(W, A, Y, starts, h2, tol, max_iter, cutoff):
    """Run every start at every mesh row of ``W``/``A`` (shape (m, n))."""
    m = W.shape[0]
    S = starts.shape[0]
    ends = np.empty((m, S))
    iters = np.empty((m, S), dtype=np.int64)
    status = np.empty((m, S), dtype=np.int64)
    nopath = np.empty(0)
    for j in range(m):
        wk, ak, yk = _compact(W[j], A[j], Y, cutoff)
        for s in range(S):
            y, it, st, _ = _ascend(wk, ak, yk, starts[s], h2, tol, max_iter, cutoff, nopath)
            ends[j, s] = y
            iters[j, s] = it
            status[j, s] = st
    return ends, iters, status


@njit(cache=True, nogil=True)
def ascend_one(w, a, Y, y0, h2, tol, max_iter, cutoff, path):
    wk, ak, yk = _compact(w, a, Y, cutoff)
    return _ascend(wk, ak, yk, y0, h2, tol, max_iter, cutoff, path)


@njit(cache=True, nogil=True)
def shift_one(w, a, Y, y, h2, cutoff):
    wk, ak, yk = _compact(w, a, Y, cutoff)
    return _shift(wk, ak, yk, y, 1.0 / h2, cutoff)
