"""Gap-statistic choice of the number of clusters in a univariate sample.

Within-cluster dispersion is measured with plain absolute differences,
``W_k = sum_r D_r / (2 n_r)`` with ``D_r`` the sum of ``|x_i - x_i'|`` over
ordered pairs in cluster ``r``; partitions come from exact 1-D k-means.
The gain ``L(k, k+1) = ln W_k - ln W_{k+1}`` is compared with its
distribution under a uniform reference sample of the same size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .kmeans1d import Partition1D, optimal_segmentations

__all__ = [
    "GapDecision",
    "ReferenceDispersion",
    "within_dispersion",
    "log_dispersions",
    "reference_dispersion",
    "gap_select_k",
    "gap_decisions",
    "DEFAULT_MAX_K",
    "DEFAULT_B",
    "DEFAULT_NSD",
]

DEFAULT_MAX_K = 5
DEFAULT_B = 500
DEFAULT_NSD = 3.0
# dispersions below this fraction of W_1 are rounding noise
ZERO_DISPERSION_RTOL = 1e-10


@dataclass(frozen=True)
class GapDecision:
    """Outcome of the gap rule for one sample.

    ``per_k[k - 1] = (L(k, k+1), L*(k, k+1), s*(k+1))`` for
    ``k = 1 .. max_k - 1``. ``evidence`` is the observed gain of reaching
    ``k_hat`` clusters, ``L(k_hat - 1, k_hat)`` (0 when ``k_hat == 1``).
    """

    k_hat: int
    evidence: float
    per_k: tuple
    B_used: int

    @property
    def gain_next(self) -> float:
        """``L(k_hat, k_hat + 1)``, or nan if ``k_hat == max_k``."""
        if self.k_hat - 1 < len(self.per_k):
            return self.per_k[self.k_hat - 1][0]
        return math.nan


@dataclass(frozen=True, eq=False)
class ReferenceDispersion:
    """Bootstrap ``ln W_{k,b}`` of uniform samples, shape (B, max_k)."""

    log_w: np.ndarray
    n: int

    @property
    def B(self) -> int:
        return self.log_w.shape[0]

    @property
    def max_k(self) -> int:
        return self.log_w.shape[1]

    def expected_gain(self):
        """``L*(k, k+1)`` for ``k = 1 .. max_k - 1``."""
        mean = self.log_w.mean(axis=0)
        return mean[:-1] - mean[1:]

    def spread(self):
        """``s*(k)`` for ``k = 1 .. max_k`` (population standard deviation)."""
        return self.log_w.std(axis=0)


def _pair_sums(xs, bounds):
    """Sum over unordered pairs of ``|x_i - x_i'|`` per segment, sorted rows."""
    m, n = xs.shape
    pos = np.arange(n)
    s1 = np.zeros((m, n + 1))
    sp = np.zeros((m, n + 1))
    np.cumsum(xs, axis=1, out=s1[:, 1:])
    np.cumsum(xs * pos, axis=1, out=sp[:, 1:])
    lo, hi = bounds[:, :-1], bounds[:, 1:]
    rows = np.arange(m)[:, None]
    seg1 = s1[rows, hi] - s1[rows, lo]
    segp = sp[rows, hi] - sp[rows, lo]
    size = hi - lo
    # sum_p x_p * (2 (p - lo) - (size - 1)) over the segment
    pairs = 2.0 * (segp - lo * seg1) - (size - 1) * seg1
    return np.maximum(pairs, 0.0), size


def _dispersion(xs, bounds):
    pairs, size = _pair_sums(xs, bounds)
    # D_r counts ordered pairs (twice the unordered sum), W = sum D_r / (2 n_r)
    return np.sum(pairs / size, axis=1)


def within_dispersion(values, partition: Partition1D) -> float:
    """``W_k`` of ``values`` under ``partition``."""
    x = np.asarray(values, dtype=float).ravel()
    a = np.asarray(partition.assignment)
    if a.shape != x.shape:
        raise DataError("partition does not match the values")
    total = 0.0
    for r in np.unique(a):
        c = np.sort(x[a == r])
        pos = np.arange(c.size)
        total += float(np.sum(c * (2 * pos - (c.size - 1)))) / c.size
    return max(total, 0.0)


def log_dispersions(sorted_values, max_k):
    """``ln W_k`` for ``k = 1 .. max_k`` for each sorted row.

    Returns an array of shape (m, max_k). Dispersions that are zero to
    rounding error give ``-inf``; ``k`` beyond the sample size repeats the
    zero dispersion of ``k = n``.
    """
    xs = np.atleast_2d(np.asarray(sorted_values, dtype=float))
    m, n = xs.shape
    segs = optimal_segmentations(xs, max_k)
    W = np.zeros((m, max_k))
    for k, (bounds, _) in segs.items():
        W[:, k - 1] = _dispersion(xs, bounds)
    floor = ZERO_DISPERSION_RTOL * W[:, :1]
    W[W <= floor] = 0.0
    with np.errstate(divide="ignore"):
        return np.log(W)


def _gains(log_w):
    """``L(k, k+1)`` per row with the zero-dispersion conventions."""
    a, b = log_w[:, :-1], log_w[:, 1:]
    with np.errstate(invalid="ignore"):
        out = a - b
    out[np.isneginf(a)] = 0.0
    out[np.isfinite(a) & np.isneginf(b)] = np.inf
    return out


def reference_dispersion(n, max_k=DEFAULT_MAX_K, B=DEFAULT_B, rng=None) -> ReferenceDispersion:
    """Draw ``B`` uniform samples of size ``n`` on [0, 1] and record ``ln W_k``."""
    if n < 2:
        raise ParameterError(f"reference samples need n >= 2, got {n}")
    if B < 1:
        raise ParameterError(f"B must be at least 1, got {B}")
    rng = np.random.default_rng(rng)
    samples = np.sort(rng.random((B, n)), axis=1)
    log_w = log_dispersions(samples, max_k)
    log_w.setflags(write=False)
    return ReferenceDispersion(log_w, n)


def _decide(gains, ref: ReferenceDispersion, n_sd):
    """Apply the decision inequality to rows of observed gains."""
    m, kk = gains.shape
    max_k = kk + 1
    lstar = ref.expected_gain()
    sstar = ref.spread()
    bound = lstar + n_sd * math.sqrt(1.0 + 1.0 / ref.B) * sstar[1:]
    ok = bound[None, :] >= gains
    k_hat = np.where(ok.any(axis=1), ok.argmax(axis=1) + 1, max_k)
    out = []
    for i in range(m):
        kh = int(k_hat[i])
        ev = float(gains[i, kh - 2]) if kh >= 2 else 0.0
        per_k = tuple((float(gains[i, k]), float(lstar[k]), float(sstar[k + 1]))
                      for k in range(kk))
        out.append(GapDecision(kh, ev, per_k, ref.B))
    return out


def gap_decisions(columns, reference: ReferenceDispersion, n_sd=DEFAULT_NSD):
    """Gap decisions for many columns sharing one reference.

    Each row of ``columns`` is one sample; rows should already be rescaled
    to [0, 1] when the reference was drawn on [0, 1]. The number of
    clusters considered is ``reference.max_k``.
    """
    cols = np.atleast_2d(np.asarray(columns, dtype=float))
    if cols.shape[1] != reference.n:
        raise DataError(f"columns have {cols.shape[1]} values, "
                        f"reference was drawn for {reference.n}")
    max_k = reference.max_k
    if max_k < 2:
        return [GapDecision(1, 0.0, (), reference.B) for _ in range(cols.shape[0])]
    log_w = log_dispersions(np.sort(cols, axis=1), max_k)
    return _decide(_gains(log_w), reference, n_sd)


def gap_select_k(values, max_k=DEFAULT_MAX_K, B=DEFAULT_B, n_sd=DEFAULT_NSD,
                 rng=None, reference: ReferenceDispersion | None = None) -> GapDecision:
    """Estimated number of clusters of a univariate sample.

    The smallest ``k`` with ``L*(k,k+1) + n_sd * sqrt(1 + 1/B) * s*(k+1)
    >= L(k,k+1)`` is returned, or ``max_k`` if no ``k < max_k`` qualifies.
    Reference samples are uniform on ``[min(values), max(values)]``;
    a precomputed ``reference`` (e.g. one shared across many rescaled
    columns) may be supplied instead of ``B`` and ``rng``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise ParameterError("the gap statistic needs at least two values")
    if not np.all(np.isfinite(x)):
        raise DataError("values must be finite")
    if max_k < 1:
        raise ParameterError(f"max_k must be at least 1, got {max_k}")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return GapDecision(1, 0.0, (), 0 if reference is None else reference.B)
    if reference is None:
        if B < 1:
            raise ParameterError(f"B must be at least 1, got {B}")
        rng = np.random.default_rng(rng)
        samples = lo + (hi - lo) * rng.random((B, x.size))
        log_w = log_dispersions(np.sort(samples, axis=1), max_k)
        reference = ReferenceDispersion(log_w, x.size)
    elif reference.max_k != max_k or reference.n != x.size:
        raise ParameterError("reference does not match max_k and sample size")
    if max_k == 1:
        return GapDecision(1, 0.0, (), reference.B)
    log_w = log_dispersions(np.sort(x)[None, :], max_k)
    return _decide(_gains(log_w), reference, n_sd)[0]
