import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lphfda.errors import DimensionError, NumericError, SingularMatrixError, SymmetryError
from lphfda.linalg import block_bidiagonal, kron, mat_exp, solve, sym_eigen


def taylor_expm(A, terms=200):
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def random_subgenerator(rng, m):
    T = rng.uniform(0, 1, (m, m))
    np.fill_diagonal(T, 0)
    np.fill_diagonal(T, -(T.sum(axis=1) + rng.uniform(0.1, 1, m)))
    return T


class TestMatExp:
    def test_scalar(self):
        assert mat_exp([[-1.0]])[0, 0] == pytest.approx(np.exp(-1), rel=1e-15)

    def test_zero_matrix_gives_identity(self):
        np.testing.assert_array_equal(mat_exp(np.zeros((2, 2)), 3.7), np.eye(2))

    def test_against_taylor_oracle(self):
        A = np.array([[-2.0, 2.0], [0.0, -3.0]])
        np.testing.assert_allclose(mat_exp(A, 0.5), taylor_expm(0.5 * A), rtol=0, atol=1e-12)

    def test_closed_form_upper_triangular(self):
        # exp([[a, c], [0, d]]) has off-diagonal c (e^a - e^d) / (a - d)
        A = np.array([[-2.0, 2.0], [0.0, -3.0]]) * 0.5
        expected = 2 * 0.5 * (np.exp(-1.0) - np.exp(-1.5)) / (-1.0 + 1.5)
        assert mat_exp(A)[0, 1] == pytest.approx(expected, rel=1e-12)

    def test_stacked_scales(self):
        A = np.array([[-1.0, 1.0], [0.5, -2.0]])
        stack = mat_exp(A, [0.1, 1.0, 2.0])
        for E, s in zip(stack, [0.1, 1.0, 2.0]):
            np.testing.assert_allclose(E, mat_exp(A, s), rtol=1e-14)

    def test_semigroup(self):
        rng = np.random.default_rng(0)
        A = random_subgenerator(rng, 4)
        np.testing.assert_allclose(mat_exp(A, 0.3) @ mat_exp(A, 0.9), mat_exp(A, 1.2), atol=1e-10)

    def test_subgenerator_exponential_is_substochastic(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            E = mat_exp(random_subgenerator(rng, 5), rng.uniform(0, 5))
            assert E.min() >= 0 and E.max() <= 1 + 1e-12
            assert E.sum(axis=1).max() <= 1 + 1e-12

    def test_non_square(self):
        with pytest.raises(DimensionError):
            mat_exp(np.ones((2, 3)))

    def test_overflow(self):
        with pytest.raises(NumericError):
            mat_exp([[1.0]], 1000.0)


class TestKron:
    def test_identity_factor(self):
        np.testing.assert_array_equal(kron(np.eye(2), [[5.0]]), np.diag([5.0, 5.0]))

    def test_rank_one(self):
        np.testing.assert_array_equal(kron([[1.0], [2.0]], [[3.0, 4.0]]), [[3, 4], [6, 8]])

    def test_matches_numpy(self):
        rng = np.random.default_rng(2)
        A, B = rng.normal(size=(2, 3)), rng.normal(size=(4, 2))
        np.testing.assert_array_equal(kron(A, B), np.kron(A, B))

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(float, (2, 2), elements=st.floats(-10, 10)),
        arrays(float, (3, 3), elements=st.floats(-10, 10)),
        arrays(float, 2, elements=st.floats(-10, 10)),
        arrays(float, 3, elements=st.floats(-10, 10)),
    )
    def test_mixed_product(self, A, B, x, y):
        lhs = kron(A, B) @ np.kron(x, y)
        rhs = np.kron(A @ x, B @ y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))
        assert kron(A, B).shape == (6, 6)


class TestSolve:
    def test_identity(self):
        B = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(solve(np.eye(3), B), B)

    def test_diagonal(self):
        np.testing.assert_allclose(solve([[2.0, 0.0], [0.0, 4.0]], np.ones(2)), [0.5, 0.25])

    def test_residual(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
        B = rng.normal(size=(5, 2))
        X = solve(A, B)
        assert np.linalg.norm(A @ X - B) < 1e-10 * np.linalg.norm(B)

    def test_singular_carries_pivot(self):
        with pytest.raises(SingularMatrixError) as info:
            solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
        assert info.value.pivot < 1e-14


class TestSymEigen:
    def test_diagonal(self):
        vals, _ = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(vals, [3, 2, 1])

    def test_identity(self):
        vals, _ = sym_eigen(np.eye(4))
        np.testing.assert_allclose(vals, np.ones(4))

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(4)
        M = rng.normal(size=(6, 6))
        A = M + M.T
        vals, V = sym_eigen(A)
        assert np.all(np.diff(vals) <= 0)
        assert np.abs(V.T @ V - np.eye(6)).max() < 1e-10
        assert np.abs(A @ V - V * vals).max() < 1e-9
        assert np.abs(V @ np.diag(vals) @ V.T - A).max() < 1e-9
        assert vals.sum() == pytest.approx(np.trace(A), abs=1e-9)

    def test_asymmetric(self):
        with pytest.raises(SymmetryError):
            sym_eigen([[1.0, 2.0], [0.0, 1.0]])


def test_block_bidiagonal_layout():
    L = block_bidiagonal([np.full((1, 1), -1.0), np.full((2, 2), -2.0)], [np.ones((1, 2))])
    expected = np.array([[-1, 1, 1], [0, -2, -2], [0, -2, -2]], dtype=float)
    np.testing.assert_array_equal(L, expected)
