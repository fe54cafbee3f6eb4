"""Regression samples whose response may be missing.

A :class:`Dataset` stores the covariates as an ``(n, d)`` array, the response
as an ``(n,)`` array with ``NaN`` in the missing cells, and the observation
indicator ``delta`` (1 = observed). All arrays are read-only once built.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MISSING_TOKENS = frozenset({"", "NA"})


class DatasetError(ValueError):
    """Base class for ingestion and validation failures."""


class SchemaError(DatasetError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ValidityError(DatasetError):
    pass


@dataclass(frozen=True)
class Sample:
    x: tuple[float, ...]
    y: float | None
    delta: int

    def __post_init__(self):
        if (self.y is None) != (self.delta == 0):
            raise ValidityError("delta must be 0 exactly when y is absent")
        if not all(math.isfinite(v) for v in self.x):
            raise ValidityError("covariates must be finite")
        if self.y is not None and not math.isfinite(self.y):
            raise ValidityError("observed response must be finite")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable sample ``{(X_i, Y_i, delta_i)}``.

    Parameters
    ----------
    X : array_like, shape (n, d) or (n,)
        Fully observed covariates.
    y : array_like, shape (n,)
        Responses; ``NaN`` marks a missing value.
    covariate_names, response_name : optional column labels used on export.
    hidden_y : array_like, optional
        Pre-masking responses kept by the simulator so that the complete-data
        estimator can be evaluated on the same draw. Never written to disk.
    """

    X: np.ndarray
    y: np.ndarray
    covariate_names: tuple[str, ...] | None = None
    response_name: str = "y"
    hidden_y: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValidityError("covariates must be a 2-D array with d >= 1")
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ValidityError(f"{X.shape[0]} covariate rows but {y.shape[0]} responses")
        if not np.all(np.isfinite(X)):
            bad = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise ValidityError(f"non-finite covariate in row {bad}")
        if np.any(np.isinf(y)):
            raise ValidityError("responses must be finite or missing")
        if not np.any(~np.isnan(y)):
            raise ValidityError("dataset has no observed responses")
        names = self.covariate_names
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidityError("covariate_names does not match covariate dimension")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "covariate_names", tuple(names))
        if self.hidden_y is not None:
            hy = np.asarray(self.hidden_y, dtype=float).reshape(-1)
            if hy.shape != y.shape or np.any(np.isnan(hy)):
                raise ValidityError("hidden_y must be a complete response vector")
            object.__setattr__(self, "hidden_y", _frozen(hy))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_samples(cls, samples: Iterable[Sample], **kwargs) -> "Dataset":
        samples = list(samples)
        if not samples:
            raise ValidityError("empty sample list")
        d = len(samples[0].x)
        if any(len(s.x) != d for s in samples):
            raise ValidityError("samples have inconsistent covariate dimension")
        X = np.array([s.x for s in samples], dtype=float).reshape(len(samples), d)
        y = np.array([np.nan if s.y is None else s.y for s in samples])
        return cls(X, y, **kwargs)

    # -- views ------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def delta(self) -> np.ndarray:
        return (~np.isnan(self.y)).astype(np.int8)

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.y)

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.y).sum())

    @property
    def is_complete(self) -> bool:
        return self.n_missing == 0

    @property
    def response_range(self) -> tuple[float, float]:
        yo = self.y[self.observed]
        return float(yo.min()), float(yo.max())

    @property
    def samples(self) -> list[Sample]:
        return [
            Sample(tuple(float(v) for v in xi), None if np.isnan(yi) else float(yi),
                   int(not np.isnan(yi)))
            for xi, yi in zip(self.X, self.y)
        ]

    def with_response(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.X, y, self.covariate_names, self.response_name)

    def unmasked(self) -> "Dataset":
        """Return the pre-masking complete sample (simulation only)."""
        if self.hidden_y is None:
            if self.is_complete:
                return self
            raise ValidityError("no pre-masking responses retained for this dataset")
        return Dataset(self.X, self.hidden_y, self.covariate_names, self.response_name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y, equal_nan=True)
        )

    __hash__ = None

    def __len__(self):
        return self.n


def observed_fraction(ds: Dataset) -> float:
    return float(ds.delta.mean())


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: column {column!r} is not numeric: {cell!r}", row) from None
    if not math.isfinite(v):
        raise ParseError(f"row {row}: column {column!r} is not finite: {cell!r}", row)
    return v


def load_dataset(path: str | Path, covariates: Sequence[str], response: str) -> Dataset:
    """Read a CSV file with a header row.

    Empty response cells and the literal ``NA`` are treated as missing.
    Covariates may not be missing. ``row`` indices in errors are 1-based data
    rows (the header is row 0).
    """
    covariates = list(covariates)
    if not covariates:
        raise SchemaError("at least one covariate column is required")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        missing_cols = [c for c in [*covariates, response] if c not in header]
        if missing_cols:
            raise SchemaError(f"{path}: missing column(s) {missing_cols}")
        ci = [header.index(c) for c in covariates]
        ri = header.index(response)
        X, y = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"row {row_no}: expected {len(header)} cells, got {len(row)}", row_no)
            X.append([_parse_float(row[j].strip(), row_no, header[j]) for j in ci])
            cell = row[ri].strip()
            y.append(np.nan if cell in MISSING_TOKENS else _parse_float(cell, row_no, response))
    if not X:
        raise ValidityError(f"{path}: no data rows")
    return Dataset(np.array(X), np.array(y), tuple(covariates), response)


def write_dataset(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` as CSV; missing responses become empty cells.

    ``repr`` of floats is used so a reload reproduces the exact values.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.covariate_names, ds.response_name])
        for xi, yi in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in xi] + ["" if np.isnan(yi) else repr(float(yi))])
