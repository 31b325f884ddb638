import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shifted_sgmres.counters import CostCounters
from shifted_sgmres.exceptions import InputError, MatrixMarketError
from shifted_sgmres.sparse_core import (
    ProblemInstance, SparseMatrix, from_dense, gen_bidiag, gen_random_sparse, gen_rhs,
    generate, identity, read_matrix_market, shifted_spmv, spmv, write_matrix_market)

from conftest import crandn


def mm(text):
    return read_matrix_market(io.StringIO(text))


class TestSparseMatrix:
    def test_invariants_enforced(self):
        with pytest.raises(InputError):
            SparseMatrix(2, [0, 1], [0], [1.0])  # short row_offsets
        with pytest.raises(InputError):
            SparseMatrix(2, [0, 2, 1], [0, 1], [1.0, 1.0])  # decreasing
        with pytest.raises(InputError):
            SparseMatrix(2, [0, 2, 2], [1, 0], [1.0, 1.0])  # unsorted row
        with pytest.raises(InputError):
            SparseMatrix(2, [0, 1, 2], [0, 2], [1.0, 1.0])  # column out of range

    def test_immutable(self):
        A = identity(3)
        with pytest.raises(ValueError):
            A.values[0] = 2.0

    def test_empty_rows_allowed(self):
        A = SparseMatrix(3, [0, 0, 2, 2], [0, 2], [1.0, 2.0])
        assert np.allclose(A.to_dense(), [[0, 0, 0], [1, 0, 2], [0, 0, 0]])


class TestSpmv:
    def test_identity(self):
        x = np.array([1, 2j, -1])
        assert np.array_equal(spmv(identity(3), x), x)

    def test_bidiag2_stencil(self):
        # row i: d_i * 1 + 1 (superdiagonal) except the last row
        assert np.array_equal(spmv(gen_bidiag(4, "bidiag2"), np.ones(4)), [2, 3, 4, 4])

    def test_zero_pattern(self):
        Z = SparseMatrix(3, [0, 0, 0, 0], [], [])
        assert np.array_equal(spmv(Z, np.array([1.0, 2.0, 3.0])), np.zeros(3))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            spmv(identity(3), np.ones(4))

    def test_shifted(self):
        Z = SparseMatrix(2, [0, 0, 0], [], [])
        assert np.array_equal(shifted_spmv(Z, 2, np.array([1, 1j])), [2, 2j])
        B = gen_bidiag(3, "bidiag1")
        assert np.allclose(shifted_spmv(B, 0.4, np.array([1.0, 0, 0])), [0.5, 0, 0])
        x = np.array([1.0, -2.0, 3j])
        assert np.array_equal(shifted_spmv(B, 0, x), spmv(B, x))

    def test_counter_increments_once_per_call(self):
        c = CostCounters()
        A = gen_bidiag(5, "bidiag2")
        spmv(A, np.ones(5), c)
        shifted_spmv(A, 3.0, np.ones(5), c)
        shifted_spmv(A, 3.0, np.ones(5), c, "inner_mv")
        assert (c.outer_mv, c.inner_mv) == (2, 1)

    def test_linearity(self, rng):
        A = gen_random_sparse(60, seed=4)
        x, y = crandn(rng, 60), crandn(rng, 60)
        lhs = spmv(A, x) + spmv(A, y)
        rhs = spmv(A, x + y)
        assert np.linalg.norm(lhs - rhs) <= 1e-13 * np.linalg.norm(rhs)

    @given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
    @settings(max_examples=50, deadline=None)
    def test_shift_term(self, alpha):
        A = gen_bidiag(20, "bidiag1")
        x = np.linspace(-1, 1, 20) + 0.5j
        ref = spmv(A, x)
        diff = shifted_spmv(A, alpha, x) - alpha * x - ref
        scale = np.linalg.norm(ref) + abs(alpha) * np.linalg.norm(x)
        assert np.linalg.norm(diff) <= 1e-15 * scale * 4


class TestMatrixMarket:
    def test_real_general(self):
        A = mm("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 5\n2 2 7\n")
        assert np.array_equal(A.to_dense(), np.diag([5, 7]))

    def test_complex_hermitian(self):
        A = mm("%%MatrixMarket matrix coordinate complex hermitian\n2 2 1\n2 1 1 1\n")
        D = A.to_dense()
        assert D[1, 0] == 1 + 1j and D[0, 1] == 1 - 1j

    def test_pattern_symmetric(self):
        A = mm("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n1 1\n3 1\n")
        D = A.to_dense()
        assert D[0, 0] == 1 and D[2, 0] == 1 and D[0, 2] == 1
        assert A.nnz == 3

    def test_skew_symmetric_no_conjugation(self):
        A = mm("%%MatrixMarket matrix coordinate complex skew-symmetric\n2 2 1\n2 1 1 2\n")
        D = A.to_dense()
        assert D[1, 0] == 1 + 2j and D[0, 1] == -1 - 2j

    def test_integer_and_duplicates_summed(self):
        A = mm("%%MatrixMarket matrix coordinate integer general\n2 2 3\n1 2 3\n1 2 4\n2 1 -1\n")
        assert A.to_dense()[0, 1] == 7 and A.nnz == 2

    @pytest.mark.parametrize("text, line", [
        ("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n", 1),
        ("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1\n", 2),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n", 3),
        ("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n2 2 1\n", 5),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
        ("garbage\n", 1),
    ])
    def test_errors_name_line(self, text, line):
        with pytest.raises(MatrixMarketError) as info:
            mm(text)
        assert info.value.lineno == line
        assert f"line {line}" in str(info.value)

    def test_roundtrip(self):
        A = gen_random_sparse(30, seed=7)
        B = mm(write_matrix_market(A))
        assert np.array_equal(A.row_offsets, B.row_offsets)
        assert np.array_equal(A.col_indices, B.col_indices)
        assert np.array_equal(A.values, B.values)

    @given(st.integers(1, 8), st.data())
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, n, data):
        entries = data.draw(st.dictionaries(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
            st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False)
            .filter(lambda z: z != 0), max_size=n * n))
        M = np.zeros((n, n), dtype=complex)
        for (i, j), v in entries.items():
            M[i, j] = v
        A = from_dense(M)
        B = mm(write_matrix_market(A))
        assert np.array_equal(B.to_dense(), M)


class TestGenerators:
    def test_bidiag1_reference_values(self):
        A = gen_bidiag(1000, "bidiag1")
        d = A.diagonal()
        assert d[0] == 0.1 and d[-1] == 999 and np.array_equal(d[1:], np.arange(1, 1000))
        D = gen_bidiag(6, "bidiag1").to_dense()
        assert np.all(np.diag(D, 1) == 1)
        assert A.nnz == 1999

    def test_bidiag2_diagonal(self):
        assert np.array_equal(gen_bidiag(1000, "bidiag2").diagonal(), np.arange(1, 1001))

    def test_bidiag1_small(self):
        assert np.array_equal(gen_bidiag(3, "bidiag1").to_dense(),
                              [[0.1, 1, 0], [0, 1, 1], [0, 0, 2]])

    def test_bidiag_errors(self):
        with pytest.raises(InputError):
            gen_bidiag(1, "bidiag1")
        with pytest.raises(InputError):
            gen_bidiag(5, "bidiag3")

    def test_rhs(self):
        assert np.array_equal(gen_rhs(3, "ones"), [1, 1, 1])
        assert np.array_equal(gen_rhs(50, "seeded_random", 9), gen_rhs(50, "seeded_random", 9))
        assert not np.array_equal(gen_rhs(50, "seeded_random", 9), gen_rhs(50, "seeded_random", 10))
        big = gen_rhs(10 ** 5, "seeded_random", 3)
        assert np.all(big.imag == 0)
        assert -0.02 < big.real.mean() < 0.02

    def test_generate_tokens(self):
        assert generate("bidiag2:10").n == 10
        assert generate("identity:4").nnz == 4
        with pytest.raises(InputError):
            generate("nope:3")

    def test_random_sparse_nonsingular(self):
        A = gen_random_sparse(100, seed=1)
        s = np.linalg.svd(A.to_dense(), compute_uv=False)
        assert s[-1] > 1e-3 * s[0]


class TestProblemInstance:
    def test_validation(self):
        A = identity(3)
        with pytest.raises(InputError):
            ProblemInstance(A, np.ones(2), [0])
        with pytest.raises(InputError):
            ProblemInstance(A, np.zeros(3), [0])
        with pytest.raises(InputError):
            ProblemInstance(A, np.ones(3), [])
        p = ProblemInstance(A, np.ones(3), [0, 1])
        assert p.shifts == [0j, 1 + 0j]
