import numpy as np
import pytest

from crosspec.metrics import (
    EvalReport,
    err_metric,
    evaluate,
    pair_distance,
    sparsity_table,
    supra_threshold,
)
from crosspec.simulate import GroundTruth, coarsen_leadfield, synthetic_leadfield
from crosspec.spectral import CrossSpectrum


class TestSupraThreshold:
    def test_zero_matrix(self):
        out = supra_threshold(np.zeros((4, 4)))
        assert out.pairs == ()
        assert out.threshold == 0.0

    def test_single_entry(self):
        part = np.zeros((3, 3))
        part[0, 2] = -0.7
        out = supra_threshold(part)
        assert out.pairs == ((0, 2, 0.7),)

    def test_half_max_threshold(self):
        part = np.zeros((4, 4))
        part[0, 1] = 1.0
        part[0, 2] = 0.6
        part[1, 3] = 0.4
        out = supra_threshold(part, 0.5)
        kept = {(i, j) for i, j, _ in out.pairs}
        assert kept == {(0, 1), (0, 2)}
        assert out.threshold == pytest.approx(0.5)

    def test_diagonal_ignored(self):
        part = np.diag([5.0, 5.0, 5.0])
        assert supra_threshold(part).pairs == ()

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValueError):
            supra_threshold(np.zeros((2, 2)), 0.0)


class TestPairDistance:
    def test_identical_pairs(self):
        a = (np.array([1.0, 2, 3]), np.array([4.0, 5, 6]))
        assert pair_distance(a, a) == 0.0

    def test_swapped_pairs(self):
        p = np.array([1.0, 0, 0])
        q = np.array([0.0, 1, 0])
        assert pair_distance((p, q), (q, p)) == 0.0

    def test_hand_evaluation(self):
        w = (np.zeros(3), np.array([1.0, 0, 0]))
        v = (np.zeros(3), np.zeros(3))
        assert pair_distance(w, v) == pytest.approx(np.sqrt(0.5))

    def test_argument_symmetry_and_order_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            w = (rng.standard_normal(3), rng.standard_normal(3))
            v = (rng.standard_normal(3), rng.standard_normal(3))
            d = pair_distance(w, v)
            assert pair_distance(v, w) == d
            assert pair_distance((w[1], w[0]), v) == d
            assert pair_distance(w, (v[1], v[0])) == d


class TestErrMetric:
    def setup_method(self):
        self.positions = np.array(
            [[0.0, 0, 0], [0.1, 0, 0], [0.0, 0.1, 0], [0.1, 0.1, 0]]
        )

    def test_exact_reconstruction(self):
        part = np.zeros((4, 4))
        part[0, 1] = 1.0
        true_pairs = [(self.positions[0], self.positions[1])]
        assert err_metric(part, self.positions, true_pairs) == 0.0

    def test_empty_reconstruction(self):
        true_pairs = [(self.positions[0], self.positions[1])]
        assert err_metric(np.zeros((4, 4)), self.positions, true_pairs) == 0.0

    def test_single_offset_pair(self):
        part = np.zeros((4, 4))
        part[0, 1] = 1.0
        # true pair displaced by 0.03 m on one endpoint: weight is 1, so the
        # metric equals the pair distance itself
        shifted = self.positions[1] + np.array([0.0, 0.03, 0.0])
        true_pairs = [(self.positions[0], shifted)]
        expected = pair_distance(
            (self.positions[0], self.positions[1]), (self.positions[0], shifted)
        )
        assert err_metric(part, self.positions, true_pairs) == pytest.approx(expected)
        assert expected == pytest.approx(np.sqrt(0.5 * 0.03**2))

    def test_requires_true_pairs(self):
        with pytest.raises(ValueError):
            err_metric(np.zeros((4, 4)), self.positions, [])

    def test_scale_invariance_exact_for_binary_scales(self):
        # powers of two rescale floats exactly, so Err must be bit-identical
        rng = np.random.default_rng(1)
        for _ in range(1000):
            part = rng.standard_normal((5, 5))
            positions = rng.standard_normal((5, 3))
            true_pairs = [(rng.standard_normal(3), rng.standard_normal(3))]
            alpha = 2.0 ** rng.integers(-30, 31)
            base = err_metric(part, positions, true_pairs)
            scaled = err_metric(alpha * part, positions, true_pairs)
            assert scaled == base

    def test_scale_invariance_general(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            part = rng.standard_normal((5, 5))
            positions = rng.standard_normal((5, 3))
            true_pairs = [(rng.standard_normal(3), rng.standard_normal(3))]
            alpha = float(rng.uniform(1e-6, 1e6))
            base = err_metric(part, positions, true_pairs)
            scaled = err_metric(alpha * part, positions, true_pairs)
            assert scaled == pytest.approx(base, rel=1e-12, abs=1e-15)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        part = rng.standard_normal((6, 6))
        part = (part + part.T) / 2
        positions = rng.standard_normal((6, 3))
        true_pairs = [(rng.standard_normal(3), rng.standard_normal(3))]
        base = err_metric(part, positions, true_pairs)
        perm = rng.permutation(6)
        permuted = err_metric(part[np.ix_(perm, perm)], positions[perm], true_pairs)
        assert permuted == pytest.approx(base, rel=1e-12)

    def test_nonincreasing_in_fraction(self):
        rng = np.random.default_rng(4)
        part = rng.standard_normal((8, 8))
        positions = rng.standard_normal((8, 3))
        true_pairs = [(rng.standard_normal(3), rng.standard_normal(3))]
        values = [
            err_metric(part, positions, true_pairs, fraction)
            for fraction in (0.1, 0.3, 0.5, 0.8, 1.0)
        ]
        assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))


class TestEvaluate:
    def test_perfect_estimate_scores_snapping_distance(self):
        fine = synthetic_leadfield(6, 40, seed=0)
        coarse, mapping = coarsen_leadfield(fine, 4)
        p, q = 7, 22
        truth = GroundTruth(
            source_indices=(p, q, 33), true_pairs=((p, q),), source_series=None
        )
        matrix = np.zeros((coarse.n, coarse.n), dtype=complex)
        ci, cj = int(mapping[p]), int(mapping[q])
        matrix[ci, cj] = matrix[cj, ci] = 1.0
        matrix += 2.0 * np.eye(coarse.n)
        estimate = CrossSpectrum(10.0, matrix)
        report = evaluate(
            estimate, truth, fine.source_positions, coarse.source_positions
        )
        expected = pair_distance(
            (coarse.source_positions[ci], coarse.source_positions[cj]),
            (fine.source_positions[p], fine.source_positions[q]),
        )
        assert report.err_re == pytest.approx(expected)
        assert report.count_re == 1
        assert report.count_im == 0 and not report.has_nonnull_im

    def test_zero_estimate(self):
        fine = synthetic_leadfield(4, 20, seed=1)
        coarse, _ = coarsen_leadfield(fine, 2)
        truth = GroundTruth(source_indices=(0, 5, 9), true_pairs=((0, 5),), source_series=None)
        estimate = CrossSpectrum(10.0, np.zeros((coarse.n, coarse.n), dtype=complex))
        report = evaluate(estimate, truth, fine.source_positions, coarse.source_positions)
        assert report == EvalReport(0.0, 0.0, 0, 0, False, False)


class TestSparsityTable:
    def test_all_null(self):
        reports = [EvalReport(0, 0, 0, 0, False, False) for _ in range(4)]
        rows = sparsity_table({(0.5, 1): reports})
        for row in rows:
            assert row.pct_nonnull == 0.0
            assert row.count_min is None and row.count_max is None
            assert row.count_mean is None
            assert row.count_mean_all == 0.0

    def test_single_run(self):
        reports = [EvalReport(0.1, 0.2, 4, 4, True, True)]
        rows = sparsity_table({(0.5, 1): reports})
        for row in rows:
            assert row.pct_nonnull == 100.0
            assert (row.count_min, row.count_max) == (4, 4)
            assert row.count_mean == 4.0

    def test_partial_nulls(self):
        reports = [
            EvalReport(0, 0, 1, 0, True, False),
            EvalReport(0, 0, 3, 0, True, False),
            EvalReport(0, 0, 5, 0, True, False),
            EvalReport(0, 0, 0, 0, False, False),
        ]
        rows = sparsity_table({(0.25, 2): reports})
        re_row = next(r for r in rows if r.part == "re")
        assert re_row.pct_nonnull == 75.0
        assert (re_row.count_min, re_row.count_max) == (1, 5)
        assert re_row.count_mean == pytest.approx(3.0)
        assert re_row.count_mean_all == pytest.approx(9 / 4)

    def test_empty_input(self):
        assert sparsity_table({}) == []
