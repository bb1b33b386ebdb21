"""Divisive sequential clustering of functional data.

Each node of the tree looks for the (derivative order, instant) column of
its curves with the strongest gap-statistic evidence of clustering, splits
the curves by exact 1-D k-means on that column, revises the split with
functional boxplots of the whole split-feature curves, and recurses into
every child large enough to be split again.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .curves import FeatureStack
from .depth import MIN_BOXPLOT_SIZE, build_fboxplot, reallocate_outliers
from .errors import DegenerateInputError, ParameterError
from .gap import (DEFAULT_B, DEFAULT_MAX_K, DEFAULT_NSD, gap_decisions,
                  reference_dispersion)
from .io import atomic_write_text
from .kmeans1d import cluster_1d

__all__ = [
    "EngineParams",
    "SplitNode",
    "ClusterTree",
    "LocalSplit",
    "local_split",
    "global_revision",
    "run_seqclusfd",
    "node_rng",
    "feature_tolerances",
]

LEAF_NO_EVIDENCE = "no-evidence"
LEAF_TOO_SMALL = "too-small"
LEAF_COLLAPSED = "collapsed"
EVIDENCE_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class EngineParams:
    max_k: int = DEFAULT_MAX_K
    B: int = DEFAULT_B
    n_sd: float = DEFAULT_NSD
    whisker_factor: float = 3.0
    min_cluster_size: int = 10
    min_boxplot_size: int = MIN_BOXPLOT_SIZE
    features: tuple = (0, 1, 2)
    master_seed: int = 0
    n_jobs: int = 1
    # column ranges below this (relative to the data scale) count as constant
    degenerate_rtol: float = 1e-8

    def __post_init__(self):
        feats = tuple(sorted(set(int(l) for l in self.features)))
        object.__setattr__(self, "features", feats)
        if not feats or any(l not in (0, 1, 2) for l in feats):
            raise ParameterError(f"features must be a non-empty subset of {{0,1,2}}, got {feats}")
        if self.max_k < 1 or self.B < 1 or self.n_jobs < 1:
            raise ParameterError("max_k, B and n_jobs must be positive")
        if self.n_sd <= 0 or self.whisker_factor <= 0:
            raise ParameterError("n_sd and whisker_factor must be positive")
        if self.min_cluster_size < 3 or self.min_boxplot_size < 3:
            raise ParameterError("minimum cluster and boxplot sizes must be at least 3")
        if self.degenerate_rtol < 0:
            raise ParameterError("degenerate_rtol must be non-negative")


@dataclass(frozen=True, eq=False)
class SplitNode:
    """One node of the clustering tree.

    Leaves carry ``reason`` and ``label``; split nodes carry the winning
    column (``feature``, ``instant_index``, ``instant``), the number of
    groups ``k``, the gap ``evidence`` and the revision ``moves``
    (``(id, from, to)`` indexed by the local k-means clusters, which match
    the children unless a cluster was emptied by the revision).
    """

    path: tuple
    member_ids: tuple
    reason: str | None = None
    label: int | None = None
    feature: int | None = None
    instant_index: int | None = None
    instant: float | None = None
    k: int | None = None
    evidence: float | None = None
    children: tuple = ()
    moves: tuple = ()
    boxplots: tuple = field(default=(), repr=False)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def splits(self):
        if not self.is_leaf:
            yield self
            for c in self.children:
                yield from c.splits()

    def to_dict(self):
        d = {"path": list(self.path), "n": len(self.member_ids)}
        if self.is_leaf:
            d.update(kind="leaf", reason=self.reason, label=self.label)
        else:
            d.update(kind="split", feature=self.feature, instant_index=self.instant_index,
                     instant=self.instant, k=self.k, evidence=_json_float(self.evidence),
                     moves=[list(m) for m in self.moves])
        d["members"] = list(self.member_ids)
        if not self.is_leaf:
            d["children"] = [c.to_dict() for c in self.children]
        return d


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass(frozen=True, eq=False)
class ClusterTree:
    root: SplitNode
    final_labels: dict
    trace: tuple
    params: EngineParams

    @property
    def n_clusters(self) -> int:
        return len(set(self.final_labels.values()))

    def labels_for(self, ids):
        return [self.final_labels[i] for i in ids]

    def to_document(self) -> dict:
        return {
            "params": asdict(self.params),
            "n_clusters": self.n_clusters,
            "root": self.root.to_dict(),
            "trace": list(self.trace),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=False)

    def labels_csv(self, ids=None) -> str:
        ids = list(self.final_labels) if ids is None else list(ids)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "label"])
        for i in ids:
            w.writerow([i, self.final_labels[i]])
        return buf.getvalue()

    def write(self, tree_path=None, labels_path=None):
        if tree_path is not None:
            atomic_write_text(tree_path, self.to_json() + "\n")
        if labels_path is not None:
            atomic_write_text(labels_path, self.labels_csv())


@dataclass(frozen=True, eq=False)
class LocalSplit:
    feature: int
    instant_index: int
    k: int
    evidence: float
    assignment: np.ndarray
    decision: object


def node_rng(master_seed, path=()):
    """Random generator of the tree node at ``path`` (child indices from the root)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(seq)


def feature_tolerances(stack: FeatureStack, rtol):
    """Absolute range below which a column of each feature is treated as constant.

    The scale of derivative order ``l`` is the trajectory range divided by
    the time span to the power ``l``.
    """
    traj = stack[0]
    value_range = float(traj.values.max() - traj.values.min())
    span = float(traj.grid[-1] - traj.grid[0])
    return tuple(rtol * value_range / span ** l for l in range(3))


def _rescaled_columns(stack, rows, params, tols):
    blocks, keys = [], []
    for l in params.features:
        V = stack[l].values[rows]
        lo = V.min(axis=0)
        hi = V.max(axis=0)
        span = hi - lo
        degenerate = span <= tols[l]
        safe = np.where(degenerate, 1.0, span)
        Y = (V - lo) / safe
        Y[:, degenerate] = 0.5
        blocks.append(Y.T)
        keys.extend((l, j) for j in range(V.shape[1]))
    return np.vstack(blocks), keys


def _evaluate_columns(columns, reference, params):
    if params.n_jobs == 1 or columns.shape[0] < 2 * params.n_jobs:
        return gap_decisions(columns, reference, params.n_sd)
    chunks = np.array_split(np.arange(columns.shape[0]), params.n_jobs)
    with ThreadPoolExecutor(params.n_jobs) as pool:
        parts = pool.map(lambda idx: gap_decisions(columns[idx], reference, params.n_sd), chunks)
        return [d for part in parts for d in part]


def local_split(stack: FeatureStack, rows, params: EngineParams, rng, tols=None):
    """Strongest local split of the curves at ``rows``.

    Returns a leaf reason string (``"too-small"`` or ``"no-evidence"``) or a
    :class:`LocalSplit`. Among columns reaching the largest cluster count,
    the one with the largest gain into that count wins (gains within a
    relative ``1e-9`` are tied); remaining ties go to the lower derivative
    order, then the earlier instant.
    """
    rows = np.asarray(rows, dtype=int)
    n = rows.size
    if n < params.min_cluster_size:
        return LEAF_TOO_SMALL
    if tols is None:
        tols = feature_tolerances(stack, params.degenerate_rtol)
    columns, keys = _rescaled_columns(stack, rows, params, tols)
    max_k = min(params.max_k, n)
    reference = reference_dispersion(n, max_k, params.B, rng)
    decisions = _evaluate_columns(columns, reference, params)
    k_hats = np.array([d.k_hat for d in decisions])
    k_best = int(k_hats.max())
    if k_best < 2:
        return LEAF_NO_EVIDENCE
    cand = np.flatnonzero(k_hats == k_best)
    evidence = np.array([decisions[c].evidence for c in cand])
    top = evidence.max()
    # evidence differing only by rounding counts as a tie
    if np.isfinite(top):
        tied = cand[evidence >= top - EVIDENCE_TIE_RTOL * abs(top)]
    else:
        tied = cand[evidence == top]
    win = min(tied, key=lambda c: keys[c])
    l, j = keys[win]
    col = columns[win]
    try:
        part = cluster_1d(col, k_best)
    except DegenerateInputError as exc:
        k_best = exc.distinct_count
        if k_best < 2:
            return LEAF_NO_EVIDENCE
        part = cluster_1d(col, k_best)
    return LocalSplit(l, j, k_best, decisions[win].evidence, part.assignment, decisions[win])


def global_revision(stack: FeatureStack, feature, clusters, params: EngineParams, tols=None):
    """Whisker-based revision of a local split.

    ``clusters`` is a list of row-index arrays into ``stack``. Clusters
    smaller than the minimum boxplot size keep their curves and receive
    none. Returns ``(clusters, moves, boxplots)`` where ``moves`` holds
    ``(id, from, to)`` and ``boxplots[r]`` is ``None`` for skipped clusters.
    """
    if tols is None:
        tols = feature_tolerances(stack, params.degenerate_rtol)
    cs = stack[feature]
    tol = tols[feature]
    clusters = [np.asarray(c, dtype=int) for c in clusters]
    eligible = [r for r, c in enumerate(clusters) if c.size >= params.min_boxplot_size]
    boxplots = [None] * len(clusters)
    if len(eligible) < 2:
        for r in eligible:
            boxplots[r] = build_fboxplot(cs.subset(clusters[r]), params.whisker_factor,
                                         params.min_boxplot_size, tol)
        return clusters, (), tuple(boxplots)
    realloc = reallocate_outliers([cs.subset(clusters[r]) for r in eligible],
                                  params.whisker_factor, params.min_boxplot_size, tol)
    for r, fb in zip(eligible, realloc.boxplots):
        boxplots[r] = fb
    moves = tuple((cid, eligible[a], eligible[b]) for cid, a, b in realloc.moves)
    if moves:
        row_of = {cid: r for r, cid in enumerate(cs.ids)}
        member_sets = [list(c) for c in clusters]
        for cid, a, b in moves:
            member_sets[a].remove(row_of[cid])
            member_sets[b].append(row_of[cid])
        clusters = [np.array(sorted(m), dtype=int) for m in member_sets]
    return clusters, moves, tuple(boxplots)


def run_seqclusfd(stack: FeatureStack, params: EngineParams = EngineParams()) -> ClusterTree:
    """Cluster the curves of ``stack`` into a tree of divisive splits."""
    tols = feature_tolerances(stack, params.degenerate_rtol)
    ids = stack.ids
    trace = []
    labels = {}
    n_leaves = [0]

    def visit(path, rows):
        member_ids = tuple(ids[r] for r in rows)
        result = local_split(stack, rows, params, node_rng(params.master_seed, path), tols)
        if isinstance(result, str):
            return leaf(path, member_ids, result)
        assign = result.assignment
        local = [rows[assign == r] for r in range(result.k)]
        clusters, moves, boxplots = global_revision(stack, result.feature, local, params, tols)
        kept = [(c, fb) for c, fb in zip(clusters, boxplots) if c.size]
        grid = stack[result.feature].grid
        entry = {
            "path": list(path), "n": len(rows), "decision": "split",
            "feature": result.feature, "instant_index": result.instant_index,
            "instant": float(grid[result.instant_index]), "k": result.k,
            "evidence": _json_float(result.evidence),
            "local_sizes": [int(c.size) for c in local],
            "revised_sizes": [int(c.size) for c in clusters],
            "moves": len(moves),
        }
        if len(kept) < 2:
            entry["decision"] = LEAF_COLLAPSED
            trace.append(entry)
            return leaf(path, member_ids, LEAF_COLLAPSED, log=False)
        trace.append(entry)
        children = []
        for r, (c, _) in enumerate(kept):
            children.append(visit(path + (r,), c))
        return SplitNode(path, member_ids, feature=result.feature,
                         instant_index=result.instant_index,
                         instant=float(grid[result.instant_index]), k=len(kept),
                         evidence=result.evidence, children=tuple(children),
                         moves=moves, boxplots=tuple(fb for _, fb in kept))

    def leaf(path, member_ids, reason, log=True):
        label = n_leaves[0]
        n_leaves[0] += 1
        for cid in member_ids:
            labels[cid] = label
        if log:
            trace.append({"path": list(path), "n": len(member_ids), "decision": reason})
        return SplitNode(path, member_ids, reason=reason, label=label)

    root = visit((), np.arange(stack.n))
    final = {cid: labels[cid] for cid in ids}
    return ClusterTree(root, final, tuple(trace), params)
