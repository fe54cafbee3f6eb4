"""Single and multiple imputation of missing responses from conditional modes.

Both procedures first estimate the complete-case modal set at each covariate
row whose response is missing. Single imputation fills the row with the mode
of highest conditional density; multiple imputation draws a mode at random
with probability proportional to that density, repeats ``B`` times, fits the
complete-data estimator to every filled sample and pools the resulting modal
sets point by point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine
from ._rng import generator
from .dataset import Dataset
from .kernel_density import Bandwidths, IsolatedPointError, conditional_density
from .meanshift import MeanShiftConfig, ModalCurve, ModalSet, _merge, as_mesh, modal_curve
from .missing import silverman_bandwidth, weights_for

N_IMPUTATIONS = 20
PRUNE_FRACTION = 0.1


class ImputationError(RuntimeError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class ImputedDataset:
    base: Dataset
    filled_y: np.ndarray
    provenance: tuple[str, ...]

    @property
    def completed(self) -> Dataset:
        return Dataset(self.base.X, self.filled_y, self.base.covariate_names, self.base.response_name)

    @property
    def imputed_rows(self) -> np.ndarray:
        return np.flatnonzero(np.array(self.provenance) == "imputed")


@dataclass
class PooledModes:
    x: np.ndarray
    values: np.ndarray


@dataclass
class _CandidateModes:
    rows: np.ndarray
    modes: list[np.ndarray]
    cond_density: list[np.ndarray]


def candidate_modes(ds: Dataset, bw: Bandwidths, cfg: MeanShiftConfig | None = None,
                    threads: int = 1) -> _CandidateModes:
    """Complete-case modal set and conditional densities at each row with a missing response."""
    rows = np.flatnonzero(~ds.observed)
    if rows.size == 0:
        return _CandidateModes(rows, [], [])
    w = weights_for("S", ds)
    curve_cutoff = (cfg or MeanShiftConfig()).cutoff
    curve = modal_curve(ds, w, bw, ds.X[rows], cfg, threads=threads)
    modes, conds = [], []
    for r, s in zip(rows, curve.sets):
        if s.flagged:
            raise ImputationError(f"empty modal set at row {r}; cannot impute", int(r))
        try:
            c = conditional_density(ds, w, bw, ds.X[r], s.modes, cutoff=curve_cutoff)
        except IsolatedPointError:
            raise ImputationError(f"no kernel mass at row {r}", int(r)) from None
        modes.append(s.modes)
        conds.append(np.atleast_1d(c))
    return _CandidateModes(rows, modes, conds)


def _fill(ds: Dataset, rows, values) -> ImputedDataset:
    y = np.array(ds.y, copy=True)
    y[rows] = values
    prov = np.where(ds.observed, "observed", "imputed")
    return ImputedDataset(ds, y, tuple(prov.tolist()))


def impute_single(ds: Dataset, bw: Bandwidths, cfg: MeanShiftConfig | None = None,
                  threads: int = 1) -> ImputedDataset:
    cand = candidate_modes(ds, bw, cfg, threads)
    vals = [m[int(np.argmax(c))] for m, c in zip(cand.modes, cand.cond_density)]
    return _fill(ds, cand.rows, np.array(vals))


def _draw(cand: _CandidateModes, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(cand.rows))
    out = np.empty(len(cand.rows))
    for i, (m, c) in enumerate(zip(cand.modes, cand.cond_density)):
        cdf = np.cumsum(c)
        k = int(np.searchsorted(cdf, u[i] * cdf[-1], side="right"))
        out[i] = m[min(k, len(m) - 1)]
    return out


def impute_random_draw(ds: Dataset, bw: Bandwidths, cfg: MeanShiftConfig | None = None,
                       rng_stream=0, threads: int = 1) -> ImputedDataset:
    """Fill each missing row with one of its candidate modes drawn at random.

    ``rng_stream`` is a seed, ``SeedSequence`` or ``Generator``.
    """
    cand = candidate_modes(ds, bw, cfg, threads)
    return _fill(ds, cand.rows, _draw(cand, generator(rng_stream)))


def combine_modal_sets(pool: PooledModes, pool_bandwidth: float | None = None,
                       prune_fraction: float = PRUNE_FRACTION, merge_tol: float | None = None,
                       max_bandwidth: float | None = None) -> ModalSet:
    """Modes of a one-dimensional Gaussian KDE over the pooled values.

    The bandwidth is Silverman's rule on the pool unless ``pool_bandwidth`` is
    given, optionally capped at ``max_bandwidth``. Local maxima are found by
    mean-shift from every pooled value, merged within ``merge_tol`` (default:
    half the bandwidth), and modes with density below ``prune_fraction`` times
    the largest mode density are dropped.
    """
    v = np.sort(np.asarray(pool.values, dtype=float).reshape(-1))
    if v.size == 0:
        raise ValueError("pool is empty")
    h = pool_bandwidth if pool_bandwidth is not None else silverman_bandwidth(v)
    if max_bandwidth is not None:
        h = min(h, max_bandwidth)
    span = v[-1] - v[0]
    if span == 0 or h <= 0:
        return ModalSet(np.atleast_1d(pool.x), v[:1], np.ones(1))
    merge_tol = merge_tol if merge_tol is not None else h / 2
    W = np.ones((1, v.size))
    A = np.zeros((1, v.size))
    ends, _, status = _engine.ascend_grid(W, A, v, v, h, 1e-8 * span, 500, np.inf)
    ok = status[0] == _engine.CONVERGED
    e = ends[0, ok] if ok.any() else v
    dens = _pooled_density(v, e, h)
    modes, mdens = _merge(e, dens, merge_tol)
    keep = mdens >= prune_fraction * mdens.max()
    return ModalSet(np.atleast_1d(pool.x), modes[keep], mdens[keep])


def _pooled_density(v, at, h):
    u = (at[:, None] - v[None, :]) / h
    return np.exp(-0.5 * u * u).sum(axis=1) / (np.sqrt(2 * np.pi) * h * v.size)


def multiple_imputation_curve(ds: Dataset, bw: Bandwidths, cfg: MeanShiftConfig | None = None,
                              B: int = N_IMPUTATIONS, mesh=None, rng_stream=0,
                              prune_fraction: float = PRUNE_FRACTION,
                              pool_bandwidth: float | None = None, threads: int = 1) -> ModalCurve:
    """Pooled modal curve over ``B`` randomly imputed samples.

    Imputation ``b`` draws from the sub-stream ``(rng_stream, b)``. The pooled
    KDE bandwidth is capped at half the merge tolerance of the analysis, so
    modes that the complete-data estimator keeps apart stay apart after pooling.
    """
    if B < 2:
        raise ValueError("multiple imputation needs B >= 2")
    if mesh is None:
        raise ValueError("mesh is required")
    cfg = cfg or MeanShiftConfig()
    mesh = as_mesh(ds, mesh)
    cand = candidate_modes(ds, bw, cfg, threads)
    if cand.rows.size == 0:
        curves = [modal_curve(ds, np.ones(ds.n), bw, mesh, cfg, threads)] * B
        resolved = cfg.resolve(ds, bw)
    else:
        curves = []
        for b in range(B):
            filled = _fill(ds, cand.rows, _draw(cand, generator(rng_stream, b))).completed
            curves.append(modal_curve(filled, np.ones(ds.n), bw, mesh, cfg, threads))
        resolved = cfg.resolve(filled, bw)
    cap = resolved.merge_tol / 2
    sets = []
    for j in range(len(mesh)):
        vals = np.concatenate([c.sets[j].modes for c in curves])
        if vals.size == 0:
            sets.append(ModalSet(mesh[j].copy(), np.empty(0), np.empty(0), flagged=True))
            continue
        sets.append(combine_modal_sets(PooledModes(mesh[j].copy(), vals), pool_bandwidth,
                                       prune_fraction, resolved.merge_tol, max_bandwidth=cap))
    return ModalCurve(mesh, sets)
