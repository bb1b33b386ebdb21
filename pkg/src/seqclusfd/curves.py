"""Sampled functional data and grid-level utilities."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, ParameterError, ParseError, ShapeError
from .io import atomic_write_text

__all__ = [
    "SampledCurveSet",
    "FeatureStack",
    "pointwise_rescale",
    "reflect_boundaries",
    "feature_column",
    "read_curves_csv",
    "write_curves_csv",
    "curves_to_csv_text",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SampledCurveSet:
    """``n`` curves evaluated on a shared, strictly increasing grid.

    ``values[i, j]`` is curve ``i`` at ``grid[j]``. Arrays are stored
    read-only so instances can be shared freely.
    """

    grid: np.ndarray
    values: np.ndarray
    ids: tuple
    labels: tuple | None = None

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(self.values)
        if grid.ndim != 1 or grid.size < 1:
            raise ShapeError("grid must be a non-empty 1-D sequence")
        if values.ndim == 1:
            values = _frozen(values[None, :])
        if values.ndim != 2 or values.shape[1] != grid.size:
            raise ShapeError(
                f"values must have shape (n, {grid.size}), got {values.shape}")
        if values.shape[0] < 1:
            raise ShapeError("at least one curve is required")
        if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
            raise DataError("grid must be finite and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DataError("curve values must be finite")
        ids = tuple(self.ids)
        if len(ids) != values.shape[0]:
            raise ShapeError(f"{len(ids)} ids for {values.shape[0]} curves")
        if len(set(ids)) != len(ids):
            raise DataError("curve ids must be unique")
        labels = self.labels
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(ids):
                raise ShapeError(f"{len(labels)} labels for {len(ids)} curves")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.grid.size

    def subset(self, rows) -> "SampledCurveSet":
        """Curves at the given row positions, in the given order."""
        rows = np.asarray(rows, dtype=int)
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[r] for r in rows)
        return SampledCurveSet(self.grid, self.values[rows],
                               tuple(self.ids[r] for r in rows), labels)

    def select_ids(self, ids) -> "SampledCurveSet":
        pos = {cid: r for r, cid in enumerate(self.ids)}
        try:
            rows = [pos[cid] for cid in ids]
        except KeyError as exc:
            raise DataError(f"unknown curve id {exc.args[0]!r}") from None
        return self.subset(rows)

    def restrict_grid(self, columns) -> "SampledCurveSet":
        columns = np.asarray(columns)
        return SampledCurveSet(self.grid[columns], self.values[:, columns],
                               self.ids, self.labels)

    def equals(self, other: "SampledCurveSet") -> bool:
        return (np.array_equal(self.grid, other.grid)
                and np.array_equal(self.values, other.values)
                and self.ids == other.ids and self.labels == other.labels)


@dataclass(frozen=True, eq=False)
class FeatureStack:
    """Trajectories and their first two derivatives for the same curves.

    ``features[l]`` holds derivative order ``l`` on the first ``N + 1 - l``
    points of the trajectory grid.
    """

    features: tuple = field()

    def __post_init__(self):
        feats = tuple(self.features)
        if len(feats) != 3:
            raise ShapeError("a feature stack holds exactly three curve sets")
        base = feats[0]
        for l, cs in enumerate(feats):
            if cs.ids != base.ids:
                raise ShapeError(f"feature {l} curve ids differ from trajectories")
            if cs.n_points != base.n_points - l:
                raise ShapeError(
                    f"feature {l} has {cs.n_points} points, "
                    f"expected {base.n_points - l}")
            if not np.array_equal(cs.grid, base.grid[:base.n_points - l]):
                raise ShapeError(f"feature {l} grid is not a prefix of the base grid")
        object.__setattr__(self, "features", feats)

    def __getitem__(self, l) -> SampledCurveSet:
        return self.features[l]

    @property
    def ids(self) -> tuple:
        return self.features[0].ids

    @property
    def n(self) -> int:
        return self.features[0].n

    @property
    def labels(self):
        return self.features[0].labels

    def subset(self, rows) -> "FeatureStack":
        return FeatureStack(tuple(cs.subset(rows) for cs in self.features))


def pointwise_rescale(column, atol=0.0):
    """Affinely map a column of values onto ``[0, 1]``.

    A column whose range does not exceed ``atol`` is degenerate and maps to
    0.5 everywhere.

    >>> pointwise_rescale([2, 4, 6]).tolist()
    [0.0, 0.5, 1.0]
    """
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise DataError("cannot rescale an empty column")
    if not np.all(np.isfinite(x)):
        raise DataError("cannot rescale a column with non-finite values")
    lo, hi = x.min(), x.max()
    span = hi - lo
    if span <= atol:
        return np.full(x.shape, 0.5)
    out = (x - lo) / span
    # exact endpoints regardless of rounding
    out[x == lo] = 0.0
    out[x == hi] = 1.0
    return out


def reflect_boundaries(cs: SampledCurveSet, fraction: float) -> SampledCurveSet:
    """Pad each curve with mirror images of its first and last samples.

    ``m = floor(fraction * (N + 1))`` samples next to each endpoint (the
    endpoint itself excluded) are mirrored in value about the endpoint, and
    the grid is extended with the mirrored spacings.
    """
    if not (0.0 < fraction <= 0.5):
        raise ParameterError(f"reflection fraction must lie in (0, 0.5], got {fraction}")
    npts = cs.n_points
    m = int(math.floor(fraction * npts))
    if npts < 3 or m < 1:
        raise ParameterError(
            f"reflecting {fraction} of {npts} points leaves nothing to mirror")
    m = min(m, npts - 2)
    t, v = cs.grid, cs.values
    left = slice(m, 0, -1)
    right = slice(npts - 2, npts - 2 - m, -1)
    grid = np.concatenate([2 * t[0] - t[left], t, 2 * t[-1] - t[right]])
    values = np.concatenate([v[:, left], v, v[:, right]], axis=1)
    return SampledCurveSet(grid, values, cs.ids, cs.labels)


def feature_column(stack: FeatureStack, l: int, j: int) -> np.ndarray:
    """Values of derivative order ``l`` at grid index ``j``, in id order."""
    if l not in (0, 1, 2):
        raise ParameterError(f"derivative order must be 0, 1 or 2, got {l}")
    cs = stack[l]
    if not 0 <= j < cs.n_points:
        raise IndexError(f"grid index {j} out of range for order {l} "
                         f"(0..{cs.n_points - 1})")
    return cs.values[:, j].copy()


def _fmt(x) -> str:
    return repr(float(x))


def curves_to_csv_text(cs: SampledCurveSet) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["id"] + [_fmt(t) for t in cs.grid]
    if cs.labels is not None:
        header.append("label")
    w.writerow(header)
    for r in range(cs.n):
        row = [cs.ids[r]] + [_fmt(x) for x in cs.values[r]]
        if cs.labels is not None:
            row.append(cs.labels[r])
        w.writerow(row)
    return buf.getvalue()


def write_curves_csv(cs: SampledCurveSet, path) -> Path:
    return atomic_write_text(path, curves_to_csv_text(cs))


def read_curves_csv(path) -> SampledCurveSet:
    """Parse the ``id,t_0,...,t_N[,label]`` curve format.

    Row numbers in errors are 1-based file lines.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return _parse_rows(rows)


def _parse_rows(rows: Sequence[Sequence[str]]) -> SampledCurveSet:
    if not rows:
        raise ParseError("empty curve file", row=1)
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "id":
        raise ParseError("header must start with 'id'", row=1)
    has_label = header[-1] == "label"
    tcells = header[1:-1] if has_label else header[1:]
    if not tcells:
        raise ParseError("header lists no grid points", row=1)
    try:
        grid = [float(c) for c in tcells]
    except ValueError as exc:
        raise ParseError(f"non-numeric grid value ({exc})", row=1) from None
    width = len(header)
    ids, labels, values = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}", row=lineno)
        ids.append(row[0].strip())
        cells = row[1:-1] if has_label else row[1:]
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"non-numeric cell ({exc})", row=lineno) from None
        if not all(math.isfinite(x) for x in vals):
            raise ParseError("non-finite cell", row=lineno)
        values.append(vals)
        if has_label:
            labels.append(row[-1].strip())
    if not ids:
        raise ParseError("no curves in file", row=2)
    return SampledCurveSet(np.array(grid), np.array(values), tuple(ids),
                           tuple(labels) if has_label else None)
