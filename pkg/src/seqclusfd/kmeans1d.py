"""Exact univariate k-means by dynamic programming.

Optimal 1-D k-means clusters are contiguous runs of the sorted values, so
the minimum within-cluster sum of squares over ``k`` clusters follows from
a DP over segment costs. Cost tables are built with numpy for a whole batch
of samples at once; the bootstrap and the per-instant columns of the
clustering engine both go through :func:`optimal_segmentations`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError, ParameterError

__all__ = ["Partition1D", "cluster_1d", "optimal_segmentations"]

# elements per (batch, start, end) cost block
_BLOCK_ELEMENTS = 4_000_000
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Partition1D:
    """Assignment of values to ``k`` clusters.

    ``assignment`` is in input order; cluster 0 holds the smallest values.
    """

    assignment: np.ndarray
    centers: np.ndarray
    within_ss: float

    @property
    def k(self) -> int:
        return self.centers.size


def _segment_costs(xs):
    """SSE of every segment ``xs[:, i:j]``; shape (m, n, n + 1), inf if j <= i."""
    m, n = xs.shape
    xc = xs - xs.mean(axis=1, keepdims=True)
    s1 = np.zeros((m, n + 1))
    s2 = np.zeros((m, n + 1))
    np.cumsum(xc, axis=1, out=s1[:, 1:])
    np.cumsum(xc * xc, axis=1, out=s2[:, 1:])
    idx = np.arange(n + 1)
    length = idx[None, :] - idx[:n, None]
    valid = length > 0
    safe = np.where(valid, length, 1)
    d1 = s1[:, None, :] - s1[:, :n, None]
    d2 = s2[:, None, :] - s2[:, :n, None]
    cost = d2 - d1 * d1 / safe
    np.maximum(cost, 0.0, out=cost)
    cost[:, ~valid] = np.inf
    return cost


def _segment_block(xs, kmax):
    m, n = xs.shape
    cost = _segment_costs(xs)
    scale = cost[:, 0, n]
    tol = (_TIE_RTOL * scale)[:, None]
    # E[k][:, i]: best cost of xs[:, i:] in k clusters; F[k][:, i]: first boundary
    E = {1: cost[:, :, n].copy()}
    F = {}
    inner = cost[:, :, :n]
    starts = np.arange(n)
    for k in range(2, kmax + 1):
        prev = E[k - 1].copy()
        prev[:, starts > n - (k - 1)] = np.inf
        M = inner + prev[:, None, :]
        best = M.min(axis=2)
        first = np.argmax(M <= best[:, :, None] + tol[:, :, None], axis=2)
        E[k] = best
        F[k] = first
    out = {}
    rows = np.arange(m)
    for k in range(1, kmax + 1):
        b = np.empty((m, k + 1), dtype=np.intp)
        b[:, 0] = 0
        b[:, k] = n
        cur = np.zeros(m, dtype=np.intp)
        for step in range(1, k):
            cur = F[k - step + 1][rows, cur]
            b[:, step] = cur
        out[k] = (b, E[k][:, 0])
    return out


def optimal_segmentations(sorted_values, kmax):
    """Optimal boundaries for every ``k <= kmax`` for each row of a batch.

    Parameters
    ----------
    sorted_values : ndarray, shape (m, n)
        Rows sorted ascending.
    kmax : int
        Largest cluster count; capped at ``n``.

    Returns
    -------
    dict
        ``k -> (boundaries, within_ss)`` with ``boundaries`` of shape
        ``(m, k + 1)`` (``0 = b_0 < ... < b_k = n``, cluster ``r`` is
        ``[b_r, b_{r+1})``) and ``within_ss`` of shape ``(m,)``. Among equal
        cost optima the one with the leftmost first boundary wins.
    """
    xs = np.atleast_2d(np.asarray(sorted_values, dtype=float))
    m, n = xs.shape
    kmax = min(int(kmax), n)
    if kmax < 1:
        raise ParameterError("kmax must be at least 1")
    step = max(1, _BLOCK_ELEMENTS // max(1, n * n))
    parts = [_segment_block(xs[i:i + step], kmax) for i in range(0, m, step)]
    return {
        k: (np.concatenate([p[k][0] for p in parts]),
            np.concatenate([p[k][1] for p in parts]))
        for k in range(1, kmax + 1)
    }


def cluster_1d(values, k) -> Partition1D:
    """Globally optimal k-means partition of univariate data.

    Deterministic: no random initialization is involved.

    >>> p = cluster_1d([0, 1, 10, 11], 2)
    >>> p.assignment.tolist(), p.centers.tolist()
    ([0, 0, 1, 1], [0.5, 10.5])
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise DataError("cannot cluster an empty sample")
    if not np.all(np.isfinite(x)):
        raise DataError("values must be finite")
    k = int(k)
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    distinct = np.unique(x).size
    if k > distinct:
        raise DegenerateInputError(
            f"{k} clusters requested but only {distinct} distinct values",
            distinct_count=distinct)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    bounds, sse = optimal_segmentations(xs[None, :], k)[k]
    bounds = bounds[0]
    sorted_labels = np.repeat(np.arange(k), np.diff(bounds))
    assignment = np.empty(x.size, dtype=int)
    assignment[order] = sorted_labels
    centers = np.array([xs[bounds[r]:bounds[r + 1]].mean() for r in range(k)])
    within = float(sum(((xs[bounds[r]:bounds[r + 1]] - centers[r]) ** 2).sum()
                       for r in range(k)))
    return Partition1D(assignment, centers, within)
