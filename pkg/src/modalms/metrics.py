"""Distances between finite sets of modes and the averaged squared error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .meanshift import ModalCurve


class EmptySetError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


def _finite_set(A) -> np.ndarray:
    A = np.atleast_1d(np.asarray(A, dtype=float)).reshape(-1)
    if A.size == 0:
        raise EmptySetError("distance to an empty set is undefined")
    return A


def dist_point_set(b: float, A) -> float:
    return float(np.min(np.abs(_finite_set(A) - float(b))))


def hausdorff(A, B) -> float:
    A, B = _finite_set(A), _finite_set(B)
    D = np.abs(A[:, None] - B[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


@dataclass
class ASEResult:
    value: float
    n_empty: int


def ase_detail(estimated: ModalCurve, truth: ModalCurve, delta: float | None = None,
               penalty_range: float | None = None) -> ASEResult:
    """Sum of squared Hausdorff distances times ``delta`` over the mesh.

    An empty estimated set contributes ``penalty_range**2 * delta`` and is
    counted in ``n_empty``. ``delta`` defaults to ``1/m``; ``penalty_range``
    to the spread of the true modes over the mesh.
    """
    m = len(truth.mesh)
    if len(estimated.mesh) != m or not np.allclose(estimated.mesh, truth.mesh, rtol=0, atol=1e-12):
        raise AlignmentError("estimated and true curves use different meshes")
    if delta is None:
        delta = 1.0 / m
    if not delta > 0:
        raise ValueError("delta must be positive")
    if penalty_range is None:
        allv = np.concatenate([s.modes for s in truth.sets])
        penalty_range = float(allv.max() - allv.min())
    total, n_empty = 0.0, 0
    for est, tru in zip(estimated.sets, truth.sets):
        if len(est.modes) == 0:
            total += penalty_range ** 2
            n_empty += 1
        else:
            total += hausdorff(est.modes, tru.modes) ** 2
    return ASEResult(total * delta, n_empty)


def ase(estimated: ModalCurve, truth: ModalCurve, delta: float | None = None,
        penalty_range: float | None = None) -> float:
    return ase_detail(estimated, truth, delta, penalty_range).value
