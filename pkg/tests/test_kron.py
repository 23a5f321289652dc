import numpy as np
import pytest

from crosspec.kron import (
    KronOperator,
    LeadField,
    PowerIterationError,
    build_permutations,
    lipschitz_constant,
    vec,
)


def dense_kron(g):
    return np.kron(g, g)


class TestLeadField:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LeadField(np.array([[1.0, np.nan]]))

    def test_rejects_position_mismatch(self):
        with pytest.raises(ValueError):
            LeadField(np.ones((2, 3)), source_positions=np.zeros((2, 3)))

    def test_shape_properties(self):
        lead = LeadField(np.ones((4, 7)))
        assert (lead.m, lead.n) == (4, 7)


class TestBuildPermutations:
    def test_two_by_two_row_permutation(self):
        xi_r, _ = build_permutations(2, 2)
        # hand evaluation of mod(i-1,m)*m + floor((i-1)/m) + 1 for i=1..4
        assert (xi_r + 1).tolist() == [1, 3, 2, 4]

    def test_single_row_is_identity(self):
        xi_r, _ = build_permutations(1, 5)
        assert (xi_r + 1).tolist() == [1]

    def test_column_permutation_2x3(self):
        _, xi_c = build_permutations(2, 3)
        # hand evaluation of mod(j-1,n)*m + floor((j-1)/n) + 1 for j=1..6
        assert (xi_c + 1).tolist() == [1, 3, 5, 2, 4, 6]

    @pytest.mark.parametrize("m,n", [(1, 1), (2, 3), (5, 2), (7, 7), (3, 8)])
    def test_bijectivity(self, m, n):
        xi_r, xi_c = build_permutations(m, n)
        assert np.array_equal(np.sort(xi_r), np.arange(m * m))
        assert np.array_equal(np.sort(xi_c), np.arange(n * m))

    def test_closed_form(self):
        m, n = 4, 6
        xi_r, xi_c = build_permutations(m, n)
        for i in range(1, m * m + 1):
            assert xi_r[i - 1] + 1 == ((i - 1) % m) * m + (i - 1) // m + 1
        for j in range(1, n * m + 1):
            assert xi_c[j - 1] + 1 == ((j - 1) % n) * m + (j - 1) // n + 1

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            build_permutations(0, 3)


class TestApply:
    def test_identity_operator(self):
        op = KronOperator(LeadField(np.eye(2)))
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.array_equal(op.apply(x), x)

    def test_scalar_operator(self):
        op = KronOperator(LeadField(np.array([[2.0]])))
        assert op.apply(np.array([5.0])) == pytest.approx([20.0])

    def test_random_matches_dense(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((3, 4))
        op = KronOperator(LeadField(g))
        x = rng.standard_normal(16)
        expected = dense_kron(g) @ x
        np.testing.assert_allclose(op.apply(x), expected, rtol=1e-12)

    def test_shape_error(self):
        op = KronOperator(LeadField(np.ones((2, 3))))
        with pytest.raises(ValueError):
            op.apply(np.zeros(5))

    def test_workspace_is_bit_identical(self):
        rng = np.random.default_rng(11)
        g = rng.standard_normal((4, 6))
        op = KronOperator(LeadField(g))
        ws = op.workspace()
        x = rng.standard_normal(36)
        assert np.array_equal(op.apply(x), op.apply(x, ws))
        y = rng.standard_normal(16)
        assert np.array_equal(op.apply_transpose(y), op.apply_transpose(y, ws))


class TestApplyTranspose:
    def test_identity(self):
        op = KronOperator(LeadField(np.eye(2)))
        y = np.array([1.0, 0.0, 0.0, 1.0])
        assert np.array_equal(op.apply_transpose(y), y)

    def test_random_matches_dense(self):
        rng = np.random.default_rng(4)
        g = rng.standard_normal((2, 5))
        op = KronOperator(LeadField(g))
        y = rng.standard_normal(4)
        expected = dense_kron(g).T @ y
        np.testing.assert_allclose(op.apply_transpose(y), expected, rtol=1e-12)

    def test_zero_maps_to_zero(self):
        op = KronOperator(LeadField(np.random.default_rng(5).standard_normal((3, 2))))
        assert np.array_equal(op.apply_transpose(np.zeros(9)), np.zeros(4))


class TestApplyBlock:
    def test_block_diagonal_structure(self):
        rng = np.random.default_rng(6)
        g = rng.standard_normal((3, 3))
        op = KronOperator(LeadField(g))
        x = rng.standard_normal(9)
        zero = np.zeros(9)
        out1, out2 = op.apply_block(x, zero)
        np.testing.assert_array_equal(out1, op.apply(x))
        np.testing.assert_array_equal(out2, np.zeros(9))
        out1, out2 = op.apply_block(zero, x)
        np.testing.assert_array_equal(out1, np.zeros(9))
        np.testing.assert_array_equal(out2, op.apply(x))

    def test_matches_dense_block_oracle(self):
        rng = np.random.default_rng(7)
        g = rng.standard_normal((2, 4))
        op = KronOperator(LeadField(g))
        s1 = rng.standard_normal(16)
        s2 = rng.standard_normal(16)
        kk = dense_kron(g)
        block = np.block([[kk, np.zeros_like(kk)], [np.zeros_like(kk), kk]])
        expected = block @ np.concatenate([s1, s2])
        got = np.concatenate(op.apply_block(s1, s2))
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-14)


class TestOracleEquivalence:
    def test_many_random_instances(self):
        rng = np.random.default_rng(8)
        for _ in range(60):
            m = int(rng.integers(1, 9))
            n = int(rng.integers(1, 9))
            g = rng.standard_normal((m, n))
            op = KronOperator(LeadField(g))
            x = rng.standard_normal(n * n)
            y = rng.standard_normal(m * m)
            dense = dense_kron(g)
            np.testing.assert_allclose(
                op.apply(x), dense @ x, rtol=1e-12, atol=1e-12 * max(1, np.abs(dense @ x).max())
            )
            np.testing.assert_allclose(
                op.apply_transpose(y), dense.T @ y,
                rtol=1e-12, atol=1e-12 * max(1, np.abs(dense.T @ y).max()),
            )

    def test_adjointness(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            m = int(rng.integers(1, 8))
            n = int(rng.integers(1, 8))
            g = rng.standard_normal((m, n))
            op = KronOperator(LeadField(g))
            x = rng.standard_normal(n * n)
            y = rng.standard_normal(m * m)
            lhs = float(op.apply(x) @ y)
            rhs = float(x @ op.apply_transpose(y))
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_vec_convention_consistency(self):
        # apply agrees with the matrix form G X G^T under column stacking
        rng = np.random.default_rng(10)
        g = rng.standard_normal((3, 5))
        x_mat = rng.standard_normal((5, 5))
        op = KronOperator(LeadField(g))
        np.testing.assert_allclose(
            op.apply(vec(x_mat)), vec(g @ x_mat @ g.T), rtol=1e-12
        )


class TestLipschitzConstant:
    def test_identity(self):
        assert lipschitz_constant(LeadField(np.eye(2))) == pytest.approx(2.0)

    def test_diagonal(self):
        lead = LeadField(np.diag([3.0, 1.0]))
        # lambda_max(G^T G) = 9 by hand
        assert lipschitz_constant(lead) == pytest.approx(162.0)

    def test_random_matches_svd_oracle(self):
        rng = np.random.default_rng(12)
        g = rng.standard_normal((4, 6))
        expected = 2.0 * np.linalg.svd(g, compute_uv=False)[0] ** 4
        assert lipschitz_constant(LeadField(g)) == pytest.approx(expected, rel=1e-8)

    def test_transposition_invariance_square(self):
        rng = np.random.default_rng(13)
        g = rng.standard_normal((5, 5))
        a = lipschitz_constant(LeadField(g))
        b = lipschitz_constant(LeadField(g.T.copy()))
        assert a == pytest.approx(b, rel=1e-8)

    def test_lower_bound_from_test_vectors(self):
        rng = np.random.default_rng(14)
        g = rng.standard_normal((3, 7))
        lead = LeadField(g)
        constant = lipschitz_constant(lead)
        for _ in range(20):
            v = rng.standard_normal(7)
            rayleigh = np.linalg.norm(g @ v) ** 2 / np.linalg.norm(v) ** 2
            assert constant >= 2.0 * rayleigh**2 - 1e-9 * constant

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            lipschitz_constant(LeadField(np.zeros((3, 3))))

    def test_nonconvergence_reports_last_estimate(self):
        g = np.diag([2.0, 1.0])
        with pytest.raises(PowerIterationError) as excinfo:
            lipschitz_constant(LeadField(g), max_iterations=1)
        assert excinfo.value.last_estimate > 0

    def test_null_space_start_recovers(self):
        # all-ones start vector is annihilated, iteration must restart
        g = np.array([[1.0, -1.0]])
        assert lipschitz_constant(LeadField(g)) == pytest.approx(8.0)
