"""Band depth, functional boxplots and whisker-based reallocation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .curves import SampledCurveSet
from .errors import ParameterError, ShapeError, SizeError
from .io import atomic_write_text

__all__ = [
    "FunctionalBoxplot",
    "Reallocation",
    "band_depth",
    "build_fboxplot",
    "time_inside_fraction",
    "grid_weights",
    "reallocate_outliers",
    "boxplot_bands_csv",
    "MIN_BOXPLOT_SIZE",
]

MIN_BOXPLOT_SIZE = 10


def _as_matrix(curves):
    if isinstance(curves, SampledCurveSet):
        return curves.values
    return np.atleast_2d(np.asarray(curves, dtype=float))


def band_depth(curves) -> np.ndarray:
    """Band depth with bands formed by pairs of curves.

    Depth of curve ``i`` is the fraction of unordered pairs ``{a, b}`` whose
    pointwise envelope contains curve ``i`` at every grid point, boundary
    included. Pairs containing ``i`` itself always count.
    """
    X = _as_matrix(curves)
    n = X.shape[0]
    if n < 3:
        raise SizeError(f"band depth needs at least 3 curves, got {n}")
    n_pairs = n * (n - 1) // 2
    iu = np.triu_indices(n, k=1)
    depth = np.empty(n)
    for i in range(n):
        diff = X - X[i]
        above = (diff > 0).astype(np.float32)
        below = (diff < 0).astype(np.float32)
        # a pair fails iff both curves lie strictly on one side somewhere
        same_side = above @ above.T + below @ below.T
        depth[i] = np.count_nonzero(same_side[iu] == 0) / n_pairs
    return depth


@dataclass(frozen=True, eq=False)
class FunctionalBoxplot:
    """Depth-based boxplot of one set of curves on a common grid."""

    grid: np.ndarray
    depth: np.ndarray
    median_index: int
    central_lower: np.ndarray
    central_upper: np.ndarray
    whisker_lower: np.ndarray
    whisker_upper: np.ndarray
    whisker_factor: float
    outlier_flags: np.ndarray
    median: np.ndarray
    tol: float = 0.0

    def inside(self, curve) -> np.ndarray:
        """Pointwise membership of ``curve`` in the whisker band."""
        c = np.asarray(curve, dtype=float)
        if c.shape != self.grid.shape:
            raise ShapeError(f"curve has {c.size} points, boxplot grid has {self.grid.size}")
        return (c >= self.whisker_lower - self.tol) & (c <= self.whisker_upper + self.tol)


def build_fboxplot(cs: SampledCurveSet, whisker_factor=3.0, min_size=MIN_BOXPLOT_SIZE,
                   tol=0.0) -> FunctionalBoxplot:
    """Functional boxplot with whiskers inflated by ``whisker_factor``.

    The central region is the envelope of the ``ceil(n/2)`` deepest curves;
    whiskers extend each edge by ``whisker_factor`` times the pointwise
    width of that region. A curve outside the whiskers (by more than ``tol``)
    at any grid point is flagged.
    """
    if whisker_factor < 0:
        raise ParameterError(f"whisker factor must be non-negative, got {whisker_factor}")
    X = cs.values
    n = X.shape[0]
    if n < min_size:
        raise SizeError(f"a functional boxplot needs at least {min_size} curves, got {n}")
    depth = band_depth(X)
    order = np.argsort(-depth, kind="stable")
    central = X[order[:math.ceil(n / 2)]]
    lo = central.min(axis=0)
    hi = central.max(axis=0)
    iqr = hi - lo
    wlo = lo - whisker_factor * iqr
    whi = hi + whisker_factor * iqr
    flags = np.any((X < wlo - tol) | (X > whi + tol), axis=1)
    med = int(order[0])
    frozen = [np.array(a) for a in (depth, lo, hi, wlo, whi, flags, X[med])]
    for a in frozen:
        a.setflags(write=False)
    depth, lo, hi, wlo, whi, flags, median = frozen
    return FunctionalBoxplot(cs.grid, depth, med, lo, hi, wlo, whi,
                             float(whisker_factor), flags, median, float(tol))


def grid_weights(grid) -> np.ndarray:
    """Normalized time weights of grid points.

    Each point owns the half-intervals on both sides; an endpoint owns its
    whole adjacent interval, so a uniform grid weighs all points equally.
    """
    t = np.asarray(grid, dtype=float)
    if t.size == 1:
        return np.ones(1)
    h = np.diff(t)
    w = np.empty(t.size)
    w[0] = h[0]
    w[-1] = h[-1]
    w[1:-1] = 0.5 * (h[:-1] + h[1:])
    return w / w.sum()


def time_inside_fraction(curve, fb: FunctionalBoxplot) -> float:
    """Time-weighted fraction of the grid where ``curve`` is inside the whiskers."""
    inside = fb.inside(curve)
    return float(np.dot(grid_weights(fb.grid), inside))


@dataclass(frozen=True)
class Reallocation:
    """Result of one whisker-based revision pass.

    ``members[r]`` lists curve ids of cluster ``r`` after the pass;
    ``moves`` are ``(id, from_cluster, to_cluster)`` triples.
    """

    members: tuple
    moves: tuple
    boxplots: tuple


def reallocate_outliers(clusters, whisker_factor=3.0, min_size=MIN_BOXPLOT_SIZE,
                        tol=0.0) -> Reallocation:
    """Move each potential outlier to the cluster whose whiskers hold it longest.

    Flags are computed once from the clusters as given and all moves are
    applied together. Ties go to the current cluster, then to the lowest
    cluster index.
    """
    clusters = list(clusters)
    if len(clusters) < 2:
        raise SizeError("reallocation needs at least two clusters")
    for r, cs in enumerate(clusters):
        if cs.n < min_size:
            raise SizeError(f"cluster {r} has {cs.n} curves, fewer than {min_size}")
    boxplots = [build_fboxplot(cs, whisker_factor, min_size, tol) for cs in clusters]
    members = [list(cs.ids) for cs in clusters]
    moves = []
    for r, (cs, fb) in enumerate(zip(clusters, boxplots)):
        for i in np.flatnonzero(fb.outlier_flags):
            curve = cs.values[i]
            fractions = [time_inside_fraction(curve, other) for other in boxplots]
            best = max(fractions)
            target = r if fractions[r] == best else fractions.index(best)
            if target != r:
                moves.append((cs.ids[i], r, target))
    for cid, src, dst in moves:
        members[src].remove(cid)
        members[dst].append(cid)
    return Reallocation(tuple(tuple(m) for m in members), tuple(moves), tuple(boxplots))


def boxplot_bands_csv(fb: FunctionalBoxplot, path=None) -> str:
    """Bands as CSV text (``grid,LB,central_lower,median,central_upper,UB``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "LB", "central_lower", "median", "central_upper", "UB"])
    for row in zip(fb.grid, fb.whisker_lower, fb.central_lower, fb.median,
                   fb.central_upper, fb.whisker_upper):
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        atomic_write_text(path, text)
    return text
