import math

import numpy as np
import pytest

from oracles import dispersion_pairs
from seqclusfd.curves import pointwise_rescale
from seqclusfd.errors import DataError, ParameterError
from seqclusfd.gap import (gap_decisions, gap_select_k, log_dispersions,
                           reference_dispersion, within_dispersion)
from seqclusfd.kmeans1d import Partition1D, cluster_1d


def _partition(labels, values):
    labels = np.asarray(labels)
    values = np.asarray(values, dtype=float)
    centers = np.array([values[labels == g].mean() for g in np.unique(labels)])
    return Partition1D(labels, centers, 0.0)


def test_within_dispersion_hand_values():
    x = [0, 1, 10, 11]
    assert within_dispersion(x, _partition([0, 0, 0, 0], x)) == 10.5
    assert within_dispersion(x, _partition([0, 0, 1, 1], x)) == 1.0


def test_within_dispersion_identical_values():
    x = [2.0] * 6
    assert within_dispersion(x, _partition([0, 0, 1, 1, 2, 2], x)) == 0.0


def test_within_dispersion_against_pair_oracle():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(2, 20))
        x = rng.normal(size=n)
        lab = rng.integers(0, 3, size=n)
        assert within_dispersion(x, _partition(lab, x)) == pytest.approx(
            dispersion_pairs(x, lab), rel=1e-12, abs=1e-12)


def test_log_dispersions_match_optimal_partitions():
    rng = np.random.default_rng(3)
    x = np.sort(rng.normal(size=30))
    lw = log_dispersions(x[None, :], 4)[0]
    for k in range(1, 5):
        part = cluster_1d(x, k)
        assert lw[k - 1] == pytest.approx(math.log(within_dispersion(x, part)), rel=1e-12)


def test_all_equal_values():
    d = gap_select_k([3.0] * 12, rng=0)
    assert d.k_hat == 1 and d.evidence == 0.0


def test_two_point_masses_give_infinite_gain():
    x = [0.0] * 10 + [1.0] * 10
    d = gap_select_k(x, B=50, rng=0)
    assert d.k_hat == 2
    assert d.per_k[0][0] == math.inf
    assert d.evidence == math.inf


def test_separated_gaussians():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = np.concatenate([rng.normal(0, 0.05, 25), rng.normal(10, 0.05, 25)])
        d = gap_select_k(x, rng=seed)
        assert d.k_hat == 2, seed


def test_uniform_null_mostly_one_cluster():
    ks = [gap_select_k(np.random.default_rng(s).random(50), rng=s + 1000).k_hat
          for s in range(20)]
    assert sum(k == 1 for k in ks) >= 18


def test_decision_rule_from_reported_terms():
    rng = np.random.default_rng(7)
    x = np.concatenate([rng.normal(0, 1, 30), rng.normal(4, 1, 30), rng.normal(9, 1, 20)])
    d = gap_select_k(x, B=100, rng=1)
    factor = 3.0 * math.sqrt(1 + 1 / 100)
    ok = [lstar + factor * s >= obs for obs, lstar, s in d.per_k]
    expected = ok.index(True) + 1 if any(ok) else 5
    assert d.k_hat == expected
    assert d.B_used == 100


def test_gains_non_negative():
    rng = np.random.default_rng(5)
    for _ in range(20):
        d = gap_select_k(rng.gamma(2.0, size=40), B=20, rng=rng)
        assert all(obs >= -1e-12 for obs, _, _ in d.per_k)


def test_reproducible_for_fixed_seed():
    x = np.random.default_rng(9).normal(size=40)
    a = gap_select_k(x, B=80, rng=123)
    b = gap_select_k(x, B=80, rng=123)
    assert a == b


def test_shared_reference_matches_single_calls():
    ref = reference_dispersion(30, 5, 60, rng=4)
    rng = np.random.default_rng(2)
    cols = np.vstack([pointwise_rescale(rng.normal(size=30)) for _ in range(6)])
    batch = gap_decisions(cols, ref)
    for c, d in zip(cols, batch):
        assert gap_select_k(c, reference=ref) == d


def test_affine_invariance_after_rescaling():
    ref = reference_dispersion(40, 5, 60, rng=8)
    x = np.random.default_rng(1).normal(size=40) ** 3
    a = gap_decisions(pointwise_rescale(x)[None, :], ref)[0]
    b = gap_decisions(pointwise_rescale(4.0 * x + 11.0)[None, :], ref)[0]
    assert a.k_hat == b.k_hat
    assert np.array_equal(cluster_1d(x, 3).assignment, cluster_1d(4.0 * x + 11.0, 3).assignment)


def test_reference_spread_is_population_sd():
    ref = reference_dispersion(20, 3, 15, rng=0)
    np.testing.assert_allclose(ref.spread(), np.std(ref.log_w, axis=0, ddof=0))
    lw = ref.log_w.mean(axis=0)
    np.testing.assert_allclose(ref.expected_gain(), lw[:-1] - lw[1:])


def test_argument_errors():
    with pytest.raises(ParameterError):
        gap_select_k([1.0])
    with pytest.raises(ParameterError):
        gap_select_k([1.0, 2.0], B=0)
    with pytest.raises(DataError):
        gap_select_k([1.0, np.nan])
    ref = reference_dispersion(10, 5, 5, rng=0)
    with pytest.raises(DataError):
        gap_decisions(np.zeros((2, 11)), ref)
