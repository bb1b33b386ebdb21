import numpy as np
import pytest

from oracles import band_depth_pairs
from seqclusfd.curves import SampledCurveSet
from seqclusfd.depth import (band_depth, boxplot_bands_csv, build_fboxplot, grid_weights,
                             reallocate_outliers, time_inside_fraction)
from seqclusfd.errors import ShapeError, SizeError


def curves(values, grid=None, prefix="c"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    grid = np.arange(values.shape[1], dtype=float) if grid is None else grid
    return SampledCurveSet(grid, values, tuple(f"{prefix}{i}" for i in range(values.shape[0])))


def constants(levels, npts=5):
    return curves(np.repeat(np.asarray(levels, dtype=float)[:, None], npts, axis=1))


class TestBandDepth:
    def test_three_parallel_curves(self):
        np.testing.assert_allclose(band_depth(constants([0, 1, 2])), [2 / 3, 1, 2 / 3])

    def test_four_parallel_curves(self):
        np.testing.assert_allclose(band_depth(constants([0, 1, 2, 3])),
                                   [3 / 6, 5 / 6, 5 / 6, 3 / 6])

    def test_identical_curves(self):
        np.testing.assert_array_equal(band_depth(constants([1.0] * 6)), 1.0)

    def test_too_few(self):
        with pytest.raises(SizeError):
            band_depth(constants([0, 1]))

    def test_pair_enumeration_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(3, 16))
            npts = int(rng.integers(1, 8))
            X = rng.normal(size=(n, npts))
            if rng.random() < 0.3:
                X = np.round(X)
            np.testing.assert_array_equal(band_depth(X), band_depth_pairs(X))

    def test_duplicate_of_deepest_keeps_rank(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(12, 6))
        d = band_depth(X)
        top = int(np.argmax(d))
        d2 = band_depth(np.vstack([X, X[top]]))
        assert d2[top] >= d2[:12].max() - 1e-15


class TestBoxplot:
    def test_identical_then_outlier(self):
        fb = build_fboxplot(constants([2.0] * 10))
        assert not fb.outlier_flags.any()
        np.testing.assert_array_equal(fb.whisker_lower, fb.whisker_upper)
        fb2 = build_fboxplot(constants([2.0] * 10 + [2.5]))
        assert fb2.outlier_flags.tolist() == [False] * 10 + [True]

    def test_ten_levels(self):
        fb = build_fboxplot(constants(np.arange(1, 11)), whisker_factor=3)
        # pair counts 29, 29, 27, 27, then 23 for both 3 and 8; the tie goes to
        # the lower index, so the deepest five are levels 3..7
        assert fb.central_lower[0] == 3 and fb.central_upper[0] == 7
        assert fb.whisker_lower[0] == 3 - 12 and fb.whisker_upper[0] == 7 + 12
        assert not fb.outlier_flags.any()
        assert fb.median_index == 4

    def test_factor_zero(self):
        fb = build_fboxplot(constants(np.arange(1, 11)), whisker_factor=0)
        outside = (np.arange(1, 11) < 3) | (np.arange(1, 11) > 7)
        assert fb.outlier_flags.tolist() == outside.tolist()

    def test_ordering_invariants(self):
        rng = np.random.default_rng(1)
        fb = build_fboxplot(curves(rng.normal(size=(25, 9))))
        assert np.all(fb.whisker_lower <= fb.central_lower)
        assert np.all(fb.central_lower <= fb.central_upper)
        assert np.all(fb.central_upper <= fb.whisker_upper)
        assert np.all((fb.median >= fb.central_lower) & (fb.median <= fb.central_upper))
        X = curves(rng.normal(size=(25, 9))).values
        fb = build_fboxplot(curves(X))
        for i in np.flatnonzero(~fb.outlier_flags):
            assert np.all((X[i] >= fb.whisker_lower) & (X[i] <= fb.whisker_upper))

    def test_size_rule(self):
        with pytest.raises(SizeError):
            build_fboxplot(constants(np.arange(9)))

    def test_bands_csv(self, tmp_path):
        fb = build_fboxplot(constants(np.arange(1, 11), npts=3))
        text = boxplot_bands_csv(fb, tmp_path / "b.csv")
        lines = text.splitlines()
        assert lines[0] == "grid,LB,central_lower,median,central_upper,UB"
        assert lines[1] == "0.0,-9.0,3.0,5.0,7.0,19.0"
        assert (tmp_path / "b.csv").read_text() == text


class TestTimeInside:
    def _fb(self):
        return build_fboxplot(constants(np.linspace(0, 1, 10), npts=4), whisker_factor=0)

    def test_inside_and_outside(self):
        fb = self._fb()
        assert time_inside_fraction(np.full(4, 0.5), fb) == 1.0
        assert time_inside_fraction(np.full(4, 9.0), fb) == 0.0

    def test_half_on_uniform_grid(self):
        fb = self._fb()
        assert time_inside_fraction(np.array([0.5, 0.5, 9.0, 9.0]), fb) == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            time_inside_fraction(np.zeros(3), self._fb())

    def test_uneven_weights(self):
        w = grid_weights([0.0, 1.0, 3.0])
        np.testing.assert_allclose(w, np.array([1.0, 1.5, 2.0]) / 4.5)
        np.testing.assert_allclose(grid_weights(np.linspace(0, 1, 6)), 1 / 6)


class TestReallocation:
    def _two_groups(self, rng, n=15, npts=20):
        t = np.linspace(0, 1, npts)
        a = 0.0 + 0.05 * rng.normal(size=(n, npts))
        b = 1.0 + 0.05 * rng.normal(size=(n, npts))
        return t, a, b

    def test_no_flags_no_moves(self):
        rng = np.random.default_rng(0)
        t, a, b = self._two_groups(rng)
        r = reallocate_outliers([curves(a, t, "a"), curves(b, t, "b")])
        assert r.moves == ()
        assert r.members[0] == tuple(f"a{i}" for i in range(15))

    def test_curve_tracking_other_cluster_moves(self):
        rng = np.random.default_rng(1)
        t, a, b = self._two_groups(rng)
        stray = 1.0 + 0.05 * rng.normal(size=t.size)
        stray[:2] = 0.0  # agrees with cluster 0 only at the first 10% of the grid
        A = curves(np.vstack([a, stray]), t, "a")
        r = reallocate_outliers([A, curves(b, t, "b")])
        assert r.moves == (("a15", 0, 1),)
        assert "a15" in r.members[1] and "a15" not in r.members[0]
        fa = time_inside_fraction(stray, r.boxplots[0])
        fb = time_inside_fraction(stray, r.boxplots[1])
        assert fa == pytest.approx(0.1) and fb == pytest.approx(0.9)

    def test_nowhere_inside_stays(self):
        rng = np.random.default_rng(2)
        t, a, b = self._two_groups(rng)
        A = curves(np.vstack([a, np.full(t.size, 50.0)]), t, "a")
        r = reallocate_outliers([A, curves(b, t, "b")])
        assert r.moves == ()

    def test_single_pass(self):
        rng = np.random.default_rng(1)
        t, a, b = self._two_groups(rng)
        stray = 1.0 + 0.05 * rng.normal(size=t.size)
        stray[:2] = 0.0
        A = curves(np.vstack([a, stray]), t, "a")
        B = curves(b, t, "b")
        first = reallocate_outliers([A, B])
        # rerunning on the original clusters reproduces the same moves
        assert reallocate_outliers([A, B]).moves == first.moves

    def test_size_rules(self):
        rng = np.random.default_rng(0)
        t, a, b = self._two_groups(rng)
        with pytest.raises(SizeError):
            reallocate_outliers([curves(a, t, "a")])
        with pytest.raises(SizeError):
            reallocate_outliers([curves(a[:9], t, "a"), curves(b, t, "b")])
