"""Weighted Gaussian product-kernel estimate of the joint density of (X, Y).

With observation weights ``w_i`` the estimator is::

    f(x, y) = sum_i w_i K(|x - X_i| / h1) K((y - Y_i) / h2) / (h1**d * h2 * sum_i w_i)

Unit weights give the ordinary estimator, ``w_i = delta_i`` the complete-case
one and ``w_i = delta_i / p(X_i)`` the inverse-probability-weighted one.
Terms whose combined kernel exponent exceeds :data:`CUTOFF` are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

CUTOFF = 50.0
_SQRT_2PI = np.sqrt(2.0 * np.pi)


class DegenerateWeightsError(ValueError):
    pass


class IsolatedPointError(ValueError):
    pass


@dataclass(frozen=True)
class Bandwidths:
    h1: float
    h2: float

    def __post_init__(self):
        if not (np.isfinite(self.h1) and np.isfinite(self.h2) and self.h1 > 0 and self.h2 > 0):
            raise ValueError(f"bandwidths must be positive, got h1={self.h1}, h2={self.h2}")


def gaussian_kernel(u):
    u = np.asarray(u, dtype=float)
    out = np.exp(-0.5 * u * u) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def validate_weights(ds: Dataset, w) -> np.ndarray:
    """Check a weight vector against ``ds`` and rescale it so that ``max(w) == 1``.

    All estimators are invariant to a common positive factor in the weights;
    fixing the scale makes weight schemes that differ only by such a factor
    produce bit-identical arithmetic downstream.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != ds.n:
        raise ValueError(f"weight vector has length {w.shape[0]}, dataset has {ds.n} rows")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    if np.any(w[~ds.observed] != 0):
        raise ValueError("rows with a missing response must carry zero weight")
    top = w.max()
    if top <= 0:
        raise DegenerateWeightsError("all weights are zero")
    return w / top


def covariate_exponent(ds: Dataset, x, h1: float) -> np.ndarray:
    """``|x - X_i|^2 / (2 h1^2)`` for each row; ``x`` may be one point or a mesh."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if ds.d == 1 else x.reshape(1, -1)
    if x.shape[1] != ds.d:
        raise ValueError(f"covariate point has dimension {x.shape[1]}, expected {ds.d}")
    diff = x[:, None, :] - ds.X[None, :, :]
    return 0.5 * np.einsum("mnd,mnd->mn", diff, diff) / (h1 * h1)


def _terms(ds, w, bw, x, y, cutoff):
    """Per-row kernel products (rows with w == 0 removed), shape (len(y), n_active)."""
    w = validate_weights(ds, w)
    keep = w > 0
    a = covariate_exponent(ds, x, bw.h1)[0][keep]
    Y = ds.y[keep]
    y = np.atleast_1d(np.asarray(y, dtype=float))
    u = (y[:, None] - Y[None, :]) / bw.h2
    e = a[None, :] + 0.5 * u * u
    t = np.where(e <= cutoff, w[keep] * np.exp(-np.minimum(e, cutoff + 1.0)), 0.0)
    return t, Y, y, w.sum()


def _scalar_or_array(v, like):
    return float(v[0]) if np.ndim(like) == 0 else v


def joint_density(ds: Dataset, w, bw: Bandwidths, x, y, cutoff: float = CUTOFF):
    t, _, _, wsum = _terms(ds, w, bw, x, y, cutoff)
    dens = t.sum(axis=1) / (2.0 * np.pi * bw.h1 ** ds.d * bw.h2 * wsum)
    return _scalar_or_array(dens, y)


def marginal_density(ds: Dataset, w, bw: Bandwidths, x, cutoff: float = CUTOFF) -> float:
    """Weighted kernel estimate of the covariate density at ``x`` (same ``h1``)."""
    w = validate_weights(ds, w)
    a = covariate_exponent(ds, x, bw.h1)[0]
    k = np.where(a <= cutoff, w * np.exp(-np.minimum(a, cutoff + 1.0)), 0.0)
    return float(k.sum() / (_SQRT_2PI * bw.h1 ** ds.d * w.sum()))


def conditional_density(ds: Dataset, w, bw: Bandwidths, x, y, cutoff: float = CUTOFF):
    fx = marginal_density(ds, w, bw, x, cutoff)
    if fx <= 0.0:
        raise IsolatedPointError(f"no kernel mass at covariate point {x!r}")
    return joint_density(ds, w, bw, x, y, cutoff) / fx


def density_y_gradient(ds: Dataset, w, bw: Bandwidths, x, y, cutoff: float = CUTOFF):
    """Partial derivative of :func:`joint_density` in ``y``.

    Equals ``joint_density * (m(x, y) - y) / h2**2`` where ``m`` is the
    weighted mean-shift target.
    """
    t, Y, yq, wsum = _terms(ds, w, bw, x, y, cutoff)
    g = (t * (Y[None, :] - yq[:, None])).sum(axis=1) / bw.h2 ** 2
    g = g / (2.0 * np.pi * bw.h1 ** ds.d * bw.h2 * wsum)
    return _scalar_or_array(g, y)
