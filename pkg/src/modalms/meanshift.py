"""Conditional mean-shift: local modes of ``y -> f(x, y)`` at fixed covariates.

One engine serves the complete-data, complete-case and inverse-probability
weighted estimators; they differ only in the weight vector passed in (see
:func:`modalms.missing.weights_for`).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine
from .dataset import Dataset
from .kernel_density import CUTOFF, Bandwidths, covariate_exponent, validate_weights

TOL_FACTOR = 1e-8
MAX_ITER = 500
N_STARTS = 30


class StallError(RuntimeError):
    """Every kernel term underflowed at the current iterate."""


class EmptyModalSetError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeanShiftConfig:
    """Iteration settings; ``None`` fields are resolved from the data.

    tol
        Stop when ``|y_{t+1} - y_t| < tol``. Default ``1e-8 * response range``.
    merge_tol
        Converged endpoints closer than this are one mode. Default ``h2 / 2``.
    start_range
        ``(low, high)`` for the equispaced starts; default is the observed
        response range.
    prune_fraction
        Drop modes whose joint density is below this fraction of the densest
        mode at the same covariate point. ``0`` keeps every local maximum.
    """

    tol: float | None = None
    max_iter: int = MAX_ITER
    merge_tol: float | None = None
    n_starts: int = N_STARTS
    start_range: tuple[float, float] | None = None
    cutoff: float = CUTOFF
    prune_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.prune_fraction < 1.0:
            raise ValueError("prune_fraction must lie in [0, 1)")
        if self.n_starts < 2:
            raise ValueError("n_starts must be at least 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.merge_tol is not None and self.merge_tol <= 0:
            raise ValueError("merge_tol must be positive")
        if self.tol is not None and self.merge_tol is not None and not self.tol < self.merge_tol:
            raise ValueError("tol must be smaller than merge_tol")

    def resolve(self, ds: Dataset, bw: Bandwidths) -> "MeanShiftConfig":
        lo, hi = ds.response_range
        span = hi - lo
        tol = self.tol
        if tol is None:
            tol = TOL_FACTOR * (span if span > 0 else bw.h2)
        merge_tol = self.merge_tol if self.merge_tol is not None else bw.h2 / 2
        start_range = self.start_range if self.start_range is not None else (lo, hi)
        return replace(self, tol=tol, merge_tol=merge_tol, start_range=tuple(map(float, start_range)))


@dataclass
class ModalSet:
    x: np.ndarray
    modes: np.ndarray
    densities: np.ndarray
    flagged: bool = False

    @property
    def size(self) -> int:
        return len(self.modes)

    def __len__(self):
        return len(self.modes)


@dataclass
class ModalCurve:
    mesh: np.ndarray
    sets: list[ModalSet] = field(default_factory=list)

    def __post_init__(self):
        if len(self.mesh) != len(self.sets):
            raise ValueError("mesh and modal sets are not aligned")

    @property
    def n_flagged(self) -> int:
        return sum(s.flagged for s in self.sets)

    def to_rows(self):
        """Long format ``(x..., mode, density)`` rows, one per mode."""
        for s in self.sets:
            for m, f in zip(s.modes, s.densities):
                yield (*np.atleast_1d(s.x).tolist(), float(m), float(f))


def as_mesh(ds_or_d, mesh) -> np.ndarray:
    d = ds_or_d if isinstance(ds_or_d, int) else ds_or_d.d
    mesh = np.asarray(mesh, dtype=float)
    if mesh.ndim == 0:
        mesh = mesh.reshape(1, 1)
    elif mesh.ndim == 1:
        mesh = mesh.reshape(-1, 1) if d == 1 else mesh.reshape(1, -1)
    if mesh.shape[1] != d:
        raise ValueError(f"mesh points have dimension {mesh.shape[1]}, expected {d}")
    return mesh


def _point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).copy()


def mean_shift_step(ds: Dataset, w, bw: Bandwidths, x, y: float, cutoff: float = CUTOFF) -> float:
    w = validate_weights(ds, w)
    a = covariate_exponent(ds, x, bw.h1)[0]
    num, den = _engine.shift_one(w, a, np.nan_to_num(ds.y), float(y), bw.h2, cutoff)
    if den <= 0.0:
        raise StallError(f"kernel weights vanish at (x={x!r}, y={y!r})")
    return num / den


@dataclass
class AscentResult:
    y: float
    iterations: int
    converged: bool
    path: np.ndarray | None = None

    def __iter__(self):
        return iter((self.y, self.iterations, self.converged))


def ascend(ds: Dataset, w, bw: Bandwidths, x, y0: float, cfg: MeanShiftConfig | None = None,
           record_path: bool = False) -> AscentResult:
    """Iterate the mean-shift map from ``y0`` until the step falls below ``tol``.

    Unpacks as ``(y_star, iterations, converged)``. With ``record_path`` the
    iterates ``y_0, y_1, ...`` are returned in ``path``.
    """
    cfg = (cfg or MeanShiftConfig()).resolve(ds, bw)
    w = validate_weights(ds, w)
    a = covariate_exponent(ds, x, bw.h1)[0]
    path = np.empty(cfg.max_iter + 1 if record_path else 0)
    y, it, status, npath = _engine.ascend_one(
        w, a, np.nan_to_num(ds.y), float(y0), bw.h2, cfg.tol, cfg.max_iter, cfg.cutoff, path)
    if status == _engine.STALLED:
        raise StallError(f"kernel weights vanish at (x={x!r}, y={y!r})")
    return AscentResult(float(y), int(it), status == _engine.CONVERGED,
                        path[:npath].copy() if record_path else None)


def starting_points(ds: Dataset, cfg: MeanShiftConfig | None = None) -> np.ndarray:
    cfg = cfg or MeanShiftConfig()
    lo, hi = cfg.start_range if cfg.start_range is not None else ds.response_range
    return np.linspace(lo, hi, cfg.n_starts)


def _merge(ends: np.ndarray, dens: np.ndarray, merge_tol: float):
    """Single-linkage merge of sorted endpoints; each cluster keeps its densest member."""
    order = np.argsort(ends, kind="stable")
    ends, dens = ends[order], dens[order]
    modes, mdens = [], []
    start = 0
    for i in range(1, len(ends) + 1):
        if i == len(ends) or ends[i] - ends[i - 1] > merge_tol:
            k = start + int(np.argmax(dens[start:i]))
            modes.append(ends[k])
            mdens.append(dens[k])
            start = i
    return np.array(modes), np.array(mdens)


def _density_at(W_row, A_row, Y, ys, h2, h1d, cutoff):
    keep = (W_row > 0) & (A_row <= cutoff)
    u = (ys[:, None] - Y[keep][None, :]) / h2
    e = A_row[keep][None, :] + 0.5 * u * u
    t = np.where(e <= cutoff, W_row[keep] * np.exp(-np.minimum(e, cutoff + 1.0)), 0.0)
    return t.sum(axis=1) / (2.0 * np.pi * h1d * h2 * W_row.sum())


def modal_sets_from_matrices(W: np.ndarray, A: np.ndarray, Y: np.ndarray, mesh: np.ndarray,
                             starts: np.ndarray, bw: Bandwidths, cfg: MeanShiftConfig,
                             d: int, threads: int = 1) -> list[ModalSet]:
    """Modal sets for mesh rows given per-row weights ``W`` and covariate exponents ``A``.

    ``cfg`` must already be resolved. Used directly by leave-one-out code, which
    needs a different weight vector at every mesh point.
    """
    m = W.shape[0]
    Y = np.nan_to_num(Y)
    args = (Y, starts, bw.h2, cfg.tol, cfg.max_iter, cfg.cutoff)
    if threads > 1 and m > 1:
        bounds = np.linspace(0, m, min(threads, m) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda b: _engine.ascend_grid(W[b[0]:b[1]], A[b[0]:b[1]], *args),
                                zip(bounds[:-1], bounds[1:])))
        ends = np.concatenate([p[0] for p in parts])
        status = np.concatenate([p[2] for p in parts])
    else:
        ends, _, status = _engine.ascend_grid(W, A, *args)
    h1d = bw.h1 ** d
    sets = []
    for j in range(m):
        ok = status[j] == _engine.CONVERGED
        if not ok.any():
            sets.append(ModalSet(mesh[j].copy(), np.empty(0), np.empty(0), flagged=True))
            continue
        e = ends[j, ok]
        dens = _density_at(W[j], A[j], Y, e, bw.h2, h1d, cfg.cutoff)
        modes, mdens = _merge(e, dens, cfg.merge_tol)
        if cfg.prune_fraction > 0:
            keep = mdens >= cfg.prune_fraction * mdens.max()
            modes, mdens = modes[keep], mdens[keep]
        sets.append(ModalSet(mesh[j].copy(), modes, mdens))
    return sets


def modal_curve(ds: Dataset, w, bw: Bandwidths, mesh, cfg: MeanShiftConfig | None = None,
                threads: int = 1) -> ModalCurve:
    """Modal set at every mesh point; points without a converged start are flagged empty."""
    cfg = (cfg or MeanShiftConfig()).resolve(ds, bw)
    w = validate_weights(ds, w)
    mesh = as_mesh(ds, mesh)
    if len(mesh) == 0:
        raise ValueError("mesh is empty")
    A = covariate_exponent(ds, mesh, bw.h1)
    W = np.broadcast_to(w, A.shape)
    W = np.ascontiguousarray(W)
    sets = modal_sets_from_matrices(W, A, ds.y, mesh, starting_points(ds, cfg), bw, cfg,
                                    ds.d, threads)
    return ModalCurve(mesh, sets)


def modal_set(ds: Dataset, w, bw: Bandwidths, x, cfg: MeanShiftConfig | None = None) -> ModalSet:
    curve = modal_curve(ds, w, bw, as_mesh(ds, _point(x)), cfg)
    s = curve.sets[0]
    if s.flagged:
        raise EmptyModalSetError(f"no start converged at x={x!r}")
    return s
