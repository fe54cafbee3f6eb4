"""Inverse-probability-weighted cross-validation for the bandwidth pair (h1, h2).

For every observed row ``i`` the complete-case modal set is re-estimated at
``X_i`` with row ``i`` left out; the criterion averages

    delta_i * d(M_{-i}(X_i), Y_i)**2 * N_{-i}(X_i)**2 * w(X_i) / p(X_i)

over all ``n`` rows, where ``d`` is the point-to-set distance and ``N`` the
number of modes. The ``N**2`` factor penalises fragmented modal sets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dataset import Dataset
from .kernel_density import Bandwidths, covariate_exponent
from .meanshift import MeanShiftConfig, modal_sets_from_matrices, starting_points
from .missing import PropensityModel

MAX_SKIP_FRACTION = 0.2
H1_FACTORS = np.round(np.arange(0.05, 0.3001, 0.025), 4)
H2_FACTORS = np.round(np.arange(0.10, 0.6001, 0.05), 4)


class UnreliableScoreError(RuntimeError):
    def __init__(self, message: str, skipped: int = 0):
        super().__init__(message)
        self.skipped = skipped


class SelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BandwidthGrid:
    h1_values: tuple[float, ...]
    h2_values: tuple[float, ...]

    def __post_init__(self):
        for name in ("h1_values", "h2_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals or any(not v > 0 for v in vals):
                raise ValueError(f"{name} must be a non-empty list of positive values")
            object.__setattr__(self, name, tuple(sorted(vals)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.h1_values), len(self.h2_values)


def default_grid(ds: Dataset) -> BandwidthGrid:
    """11 x 11 grid scaled by the covariate range and the observed response sd."""
    xr = float(np.mean(ds.X.max(axis=0) - ds.X.min(axis=0)))
    ysd = float(np.std(ds.y[ds.observed], ddof=1)) if ds.observed.sum() > 1 else 1.0
    return BandwidthGrid(tuple(H1_FACTORS * xr), tuple(H2_FACTORS * ysd))


def central_region(ds: Dataset, lower: float = 5.0, upper: float = 95.0) -> Callable:
    """Indicator of covariates inside the ``[lower, upper]`` empirical percentile box."""
    lo = np.percentile(ds.X, lower, axis=0)
    hi = np.percentile(ds.X, upper, axis=0)

    def w(X):
        X = np.asarray(X, dtype=float).reshape(-1, ds.d)
        return np.all((X >= lo) & (X <= hi), axis=1).astype(float)

    return w


class CVDetail(NamedTuple):
    score: float
    skipped: int
    terms: int


class ScoreRow(NamedTuple):
    h1: float
    h2: float
    cv: float
    skipped_terms: int


def cv_detail(ds: Dataset, model: PropensityModel | None, bw: Bandwidths,
              w_fn: Callable | None = None, cfg: MeanShiftConfig | None = None,
              threads: int = 1) -> CVDetail:
    idx = np.flatnonzero(ds.observed)
    if idx.size < 2:
        raise ValueError("cross-validation needs at least two observed responses")
    cfg = (cfg or MeanShiftConfig()).resolve(ds, bw)
    Xi = ds.X[idx]
    p = np.ones(idx.size) if model is None else model(Xi)
    wx = np.ones(idx.size) if w_fn is None else np.asarray(w_fn(Xi), dtype=float)
    active = wx > 0
    # rows with w(X_i) = 0 contribute nothing; skip their leave-one-out fits
    rows = idx[active]
    W = np.tile(ds.delta.astype(float), (rows.size, 1))
    W[np.arange(rows.size), rows] = 0.0
    A = covariate_exponent(ds, ds.X[rows], bw.h1)
    sets = modal_sets_from_matrices(W, A, ds.y, ds.X[rows], starting_points(ds, cfg),
                                    bw, cfg, ds.d, threads)
    total, skipped = 0.0, 0
    for s, r, weight, prob in zip(sets, rows, wx[active], p[active]):
        if s.flagged:
            skipped += 1
            continue
        d2 = float(np.min((s.modes - ds.y[r]) ** 2))
        total += d2 * len(s.modes) ** 2 * weight / prob
    if rows.size and skipped > MAX_SKIP_FRACTION * rows.size:
        raise UnreliableScoreError(f"{skipped} of {rows.size} leave-one-out modal sets were empty",
                                   skipped)
    return CVDetail(total / ds.n, skipped, int(rows.size))


def cv_score(ds: Dataset, model: PropensityModel | None, bw: Bandwidths,
             w_fn: Callable | None = None, cfg: MeanShiftConfig | None = None,
             threads: int = 1) -> float:
    """IPW leave-one-out criterion; ``model=None`` means ``p = 1``, ``w_fn=None`` means ``w = 1``."""
    return cv_detail(ds, model, bw, w_fn, cfg, threads).score


def select_bandwidths(ds: Dataset, model: PropensityModel | None, grid: BandwidthGrid | None = None,
                      w_fn: Callable | None = None, cfg: MeanShiftConfig | None = None,
                      threads: int = 1) -> tuple[Bandwidths, list[ScoreRow]]:
    """Minimise the criterion over the grid.

    Ties go to the smaller ``h2``, then the smaller ``h1``. Cells whose score
    is unreliable appear in the table with ``cv = nan``.
    """
    grid = grid or default_grid(ds)
    table = []
    for h1 in grid.h1_values:
        for h2 in grid.h2_values:
            try:
                det = cv_detail(ds, model, Bandwidths(h1, h2), w_fn, cfg, threads)
                table.append(ScoreRow(h1, h2, det.score, det.skipped))
            except UnreliableScoreError as exc:
                table.append(ScoreRow(h1, h2, float("nan"), exc.skipped))
    valid = [r for r in table if np.isfinite(r.cv)]
    if not valid:
        raise SelectionError("every grid cell produced an unreliable score")
    best = min(valid, key=lambda r: (r.cv, r.h2, r.h1))
    return Bandwidths(best.h1, best.h2), table
