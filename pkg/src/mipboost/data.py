"""Datasets, standardization, fold assignment and polynomial feature expansion."""

from __future__ import annotations

import csv
import enum
import itertools
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data or violated dataset preconditions."""


class Provenance(str, enum.Enum):
    RAW = "raw"
    STANDARDIZED = "standardized"
    WHITENED = "whitened"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalingRecord:
    """Column means/stds (and response centering) used to standardize a dataset."""

    column_means: np.ndarray
    column_stds: np.ndarray
    y_mean: float
    y_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "column_means", _frozen(self.column_means))
        object.__setattr__(self, "column_stds", _frozen(self.column_stds))
        if np.any(self.column_stds <= 0):
            raise DataError("column_stds must be strictly positive")
        if self.y_scale <= 0:
            raise DataError("y_scale must be positive")


@dataclass(frozen=True)
class Dataset:
    """Response vector plus design matrix with column labels.

    Arrays are copied and made read-only on construction, so instances can be
    shared freely between workers.
    """

    y: np.ndarray
    X: np.ndarray
    feature_names: tuple
    provenance: Provenance = Provenance.RAW
    scaling: Optional[ScalingRecord] = None

    def __post_init__(self):
        X = _frozen(self.X)
        y = _frozen(self.y).ravel()
        if X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite entries")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(f"expected {X.shape[1]} feature names, got {len(names)}")
        if len(set(names)) != len(names):
            raise DataError("feature names must be distinct")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset_rows(self, rows) -> "Dataset":
        return replace(self, X=self.X[rows], y=self.y[rows])


def load_csv(path, response_column=0) -> Dataset:
    """Read a comma-delimited numeric table with a header row.

    ``response_column`` is a column name or a 0-based position. Every other
    column becomes a feature, in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for i, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(f"{path}: row {i} has {len(raw)} cells, header has {len(header)}")
            vals = []
            for name, cell in zip(header, raw):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {i}, column {name!r}"
                    ) from None
            rows.append(vals)
    if isinstance(response_column, int):
        if not 0 <= response_column < len(header):
            raise DataError("response column not found")
        ry = response_column
    else:
        if response_column not in header:
            raise DataError("response column not found")
        ry = header.index(response_column)
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    keep = [j for j in range(len(header)) if j != ry]
    X = table[:, keep]
    names = [header[j] for j in keep]
    if X.shape[0] > 1:
        for j in np.flatnonzero(np.ptp(X, axis=0) == 0):
            warnings.warn(f"feature {names[j]!r} has zero variance", stacklevel=2)
    return Dataset(y=table[:, ry], X=X, feature_names=names)


def write_csv(d: Dataset, path, response_name: str = "y") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([response_name, *d.feature_names])
        for yi, row in zip(d.y, d.X):
            w.writerow([repr(float(yi)), *(repr(float(v)) for v in row)])
    return path


def standardize(d: Dataset, scale_response: bool = False):
    """Center and scale every feature to mean 0, sample sd 1 (divisor n-1).

    The response is only centered unless ``scale_response`` is set.
    Returns ``(standardized_dataset, ScalingRecord)``.
    """
    if d.provenance is not Provenance.RAW:
        raise DataError(f"standardize expects raw data, got {d.provenance.value}")
    if d.n < 2:
        raise DataError("need at least 2 observations to standardize")
    means = d.X.mean(axis=0)
    stds = d.X.std(axis=0, ddof=1)
    bad = np.flatnonzero(stds <= 1e-12 * np.maximum(1.0, np.abs(means)))
    if bad.size:
        raise DataError(f"zero-variance feature: {d.feature_names[bad[0]]!r}")
    y_mean = float(d.y.mean())
    y_scale = float(d.y.std(ddof=1)) if scale_response else 1.0
    if y_scale <= 0:
        raise DataError("response has zero variance")
    rec = ScalingRecord(means, stds, y_mean, y_scale)
    return apply_scaling(d, rec), rec


def apply_scaling(d: Dataset, rec: ScalingRecord) -> Dataset:
    """Transform raw data with an existing record (e.g. validation data with training stats)."""
    if d.provenance is not Provenance.RAW:
        raise DataError(f"apply_scaling expects raw data, got {d.provenance.value}")
    if rec.column_means.shape[0] != d.p:
        raise DataError("scaling record does not match feature count")
    X = (d.X - rec.column_means) / rec.column_stds
    y = (d.y - rec.y_mean) / rec.y_scale
    return Dataset(y=y, X=X, feature_names=d.feature_names,
                   provenance=Provenance.STANDARDIZED, scaling=rec)


def unstandardize(d: Dataset, rec: Optional[ScalingRecord] = None) -> Dataset:
    rec = rec or d.scaling
    if rec is None or d.provenance is not Provenance.STANDARDIZED:
        raise DataError("unstandardize needs standardized data and its scaling record")
    X = d.X * rec.column_stds + rec.column_means
    y = d.y * rec.y_scale + rec.y_mean
    return Dataset(y=y, X=X, feature_names=d.feature_names)


def coefficients_to_raw(beta: np.ndarray, rec: ScalingRecord):
    """Map standardized-scale coefficients to raw-scale ``(intercept, slopes)``."""
    slopes = rec.y_scale * np.asarray(beta) / rec.column_stds
    intercept = rec.y_mean - float(slopes @ rec.column_means)
    return intercept, slopes


@dataclass(frozen=True)
class FoldAssignment:
    v: int
    assignment: np.ndarray  # fold labels in 1..v
    seed: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def withheld(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def training(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(n: int, v: int, seed: int) -> FoldAssignment:
    """Seeded shuffle, then deal observations round-robin into ``v`` folds."""
    if v < 2 or v > n:
        raise DataError(f"need 2 <= v <= n, got v={v}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[perm] = np.arange(n) % v + 1
    return FoldAssignment(v=v, assignment=assignment, seed=seed)


def expand_features(d: Dataset, squares_exclude: Sequence[str] = (),
                    center: bool = False) -> Dataset:
    """Append all pairwise products ``a*b`` and squares ``a^2`` of raw columns.

    Products of uncentered columns carry the main effects with them (``a*b``
    is nearly a linear combination of ``a`` and ``b`` when the means are large).
    ``center=True`` forms products and squares from columns centered at the
    means of ``d``; the base columns are kept as they are.
    """
    if d.provenance is not Provenance.RAW:
        raise DataError("expand_features expects raw data")
    unknown = set(squares_exclude) - set(d.feature_names)
    if unknown:
        raise DataError(f"unknown column(s) in square exclusions: {sorted(unknown)}")
    names = list(d.feature_names)
    cols = [d.X]
    B = d.X - d.X.mean(axis=0) if center else d.X
    for i, j in itertools.combinations(range(d.p), 2):
        names.append(f"{d.feature_names[i]}*{d.feature_names[j]}")
        cols.append((B[:, i] * B[:, j])[:, None])
    for j, name in enumerate(d.feature_names):
        if name in squares_exclude:
            continue
        names.append(f"{name}^2")
        cols.append((B[:, j] ** 2)[:, None])
    return Dataset(y=d.y, X=np.hstack(cols), feature_names=names)
