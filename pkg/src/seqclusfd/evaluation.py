"""Scoring against ground truth and Monte Carlo benchmark reports."""

from __future__ import annotations

import csv
import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .engine import EngineParams, run_seqclusfd
from .errors import DataError, MappingError, ParameterError, ParseError, ShapeError
from .generators import MODEL_GROUPS, GeneratorSpec, generate
from .smoothing import SmoothingConfig, prepare_features

__all__ = [
    "ccr",
    "confusion_matrix",
    "merge_labels",
    "majority_map",
    "read_labels_csv",
    "BenchmarkRecord",
    "BenchmarkReport",
    "run_benchmark",
]


def confusion_matrix(truth, predicted):
    """Counts of (truth, predicted) label pairs.

    Returns ``(truth_labels, predicted_labels, counts)`` with labels sorted
    by their string form and ``counts[a, b]`` the number of items with truth
    ``truth_labels[a]`` and prediction ``predicted_labels[b]``.
    """
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise ShapeError(f"{len(truth)} true labels but {len(predicted)} predictions")
    if not truth:
        raise DataError("cannot score an empty labeling")
    tl = sorted(set(truth), key=str)
    pl = sorted(set(predicted), key=str)
    ti = {lab: a for a, lab in enumerate(tl)}
    pi = {lab: b for b, lab in enumerate(pl)}
    counts = np.zeros((len(tl), len(pl)), dtype=int)
    for t, p in zip(truth, predicted):
        counts[ti[t], pi[p]] += 1
    return tl, pl, counts


def ccr(truth, predicted) -> float:
    """Correct classification rate in percent under the best label matching.

    Predicted labels are matched one-to-one with true labels so that the
    number of agreeing items is maximal. When there are more predicted than
    true labels, items carrying an unmatched predicted label count as errors.

    >>> ccr([0, 0, 1, 1], ["b", "b", "a", "a"])
    100.0
    """
    _, _, counts = confusion_matrix(truth, predicted)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return 100.0 * float(counts[rows, cols].sum()) / float(counts.sum())


def merge_labels(predicted, merge_map):
    """Relabel ``predicted`` through ``merge_map``; every label must be covered."""
    predicted = list(predicted)
    missing = sorted({p for p in predicted if p not in merge_map}, key=str)
    if missing:
        raise MappingError(f"merge map does not cover labels {missing}")
    return [merge_map[p] for p in predicted]


def majority_map(truth, predicted):
    """Map each predicted label to the true label most of its items carry.

    Ties go to the true label that sorts first.
    """
    tl, pl, counts = confusion_matrix(truth, predicted)
    return {p: tl[int(np.argmax(counts[:, b]))] for b, p in enumerate(pl)}


def read_labels_csv(path):
    """Read an ``id,label`` file (or a curve CSV with a label column) into a dict."""
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0].strip() != "id" or rows[0][-1].strip() != "label":
        raise ParseError("header must start with 'id' and end with 'label'", row=1)
    width = len(rows[0])
    out = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}", row=lineno)
        cid = row[0].strip()
        if cid in out:
            raise ParseError(f"duplicate id {cid!r}", row=lineno)
        out[cid] = row[-1].strip()
    return out


@dataclass(frozen=True)
class BenchmarkRecord:
    """One replicate: the seed, clusters found, CCR and wall time."""

    seed: int
    k_found: int
    ccr: float
    runtime: float
    splits: tuple = ()


@dataclass(frozen=True)
class BenchmarkReport:
    """Replicates of one generator configuration.

    Records are kept sorted by seed. The mean CCR only averages replicates
    where the number of clusters found equals the true number.
    """

    model: str
    n: int
    true_k: int
    records: tuple
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(sorted(self.records, key=lambda r: r.seed)))

    @property
    def replicates(self) -> int:
        return len(self.records)

    def k_counts(self):
        return Counter(r.k_found for r in self.records)

    def k_distribution(self):
        """Percentage of replicates per number of clusters found."""
        counts = self.k_counts()
        return {k: 100.0 * c / self.replicates for k, c in sorted(counts.items())}

    def correct_rate(self) -> float:
        return self.k_distribution().get(self.true_k, 0.0)

    def mean_ccr(self) -> float:
        hits = [r.ccr for r in self.records if r.k_found == self.true_k]
        return float(np.mean(hits)) if hits else math.nan

    def total_runtime(self) -> float:
        return float(sum(r.runtime for r in self.records))

    def to_text(self) -> str:
        """Aligned table: percentage of runs per cluster count, then mean CCR."""
        dist = self.k_distribution()
        ks = list(range(1, max(max(dist), self.true_k) + 1))
        head = ["model", "n", "reps"] + [str(k) for k in ks] + ["mean CCR"]
        mc = self.mean_ccr()
        row = [self.model, str(self.n), str(self.replicates)]
        row += [f"{dist.get(k, 0.0):.1f}" for k in ks]
        row.append("-" if math.isnan(mc) else f"{mc:.2f}")
        widths = [max(len(a), len(b)) for a, b in zip(head, row)]
        lines = [
            "Number of groups found (% of replicates) and mean CCR over runs "
            f"finding {self.true_k}",
            "  ".join(h.rjust(w) for h, w in zip(head, widths)),
            "  ".join(c.rjust(w) for c, w in zip(row, widths)),
        ]
        if self.settings:
            lines.append("settings: " + json.dumps(self.settings, sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_document(self) -> dict:
        mc = self.mean_ccr()
        return {
            "model": self.model,
            "n": self.n,
            "true_k": self.true_k,
            "replicates": self.replicates,
            "k_distribution": {str(k): v for k, v in self.k_distribution().items()},
            "correct_rate": self.correct_rate(),
            "mean_ccr": None if math.isnan(mc) else mc,
            "total_runtime": self.total_runtime(),
            "settings": self.settings,
            "records": [asdict(r) | {"splits": [list(s) for s in r.splits]}
                        for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2)


def _one_replicate(spec, params, smoothing, exclude_ids):
    t0 = time.perf_counter()
    cs = generate(spec)
    stack = prepare_features(cs, smoothing)
    tree = run_seqclusfd(stack, replace(params, master_seed=spec.seed))
    keep = [i for i, cid in enumerate(cs.ids) if cid not in exclude_ids]
    if not keep:
        raise DataError("every curve was excluded")
    pred = tree.labels_for(cs.ids)
    score = ccr([cs.labels[i] for i in keep], [pred[i] for i in keep])
    splits = tuple((s.feature, s.instant, s.k) for s in tree.root.splits())
    return BenchmarkRecord(spec.seed, tree.n_clusters, score,
                           time.perf_counter() - t0, splits)


def run_benchmark(spec: GeneratorSpec, replicates: int, params: EngineParams = EngineParams(),
                  smoothing: SmoothingConfig = SmoothingConfig(), exclude_ids=(),
                  n_jobs: int = 1) -> BenchmarkReport:
    """Generate, smooth, cluster and score ``replicates`` data sets.

    Replicate ``r`` uses seed ``spec.seed + r`` for both the generator and
    the clustering bootstrap, so reports are reproducible and independent
    of ``n_jobs``.
    """
    if replicates < 1:
        raise ParameterError(f"replicates must be at least 1, got {replicates}")
    if n_jobs < 1:
        raise ParameterError(f"n_jobs must be at least 1, got {n_jobs}")
    exclude_ids = frozenset(exclude_ids)
    specs = [spec.with_seed(spec.seed + r) for r in range(replicates)]

    def job(s):
        return _one_replicate(s, params, smoothing, exclude_ids)

    if n_jobs == 1:
        records = [job(s) for s in specs]
    else:
        with ThreadPoolExecutor(n_jobs) as pool:
            records = list(pool.map(job, specs))
    settings = {
        "first_seed": spec.seed,
        "engine": {k: v for k, v in asdict(params).items() if k not in ("master_seed", "n_jobs")},
        "smoothing": {k: v for k, v in asdict(smoothing).items() if k != "n_jobs"},
    }
    return BenchmarkReport(spec.model, spec.n, MODEL_GROUPS[spec.model], tuple(records),
                           _jsonable(settings))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
