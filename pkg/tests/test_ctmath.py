import math

import numpy as np
import pytest

from ctcp import ctmath as ct
from ctcp.errors import NumericError, ShapeError


def rand_cmatrix(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def triple_loop_matmul(a, b):
    """Independent oracle: naive O(n^3) complex product."""
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.complex128)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0j
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        rng = np.random.default_rng(0)
        x = rand_cmatrix(rng, 3, 3)
        assert np.array_equal(ct.cmatmul(ct.ceye(3), x), x)

    def test_i_squared(self):
        i = np.array([[1j]])
        assert ct.cmatmul(i, i) == np.array([[-1.0 + 0j]])

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(1)
        a = rand_cmatrix(rng, 4, 5)
        b = rand_cmatrix(rng, 5, 3)
        assert np.abs(ct.cmatmul(a, b) - triple_loop_matmul(a, b)).max() < 1e-12

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            ct.cmatmul(np.zeros((2, 3), complex), np.zeros((2, 3), complex))

    def test_associativity(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rand_cmatrix(rng, 4, 6)
            b = rand_cmatrix(rng, 6, 5)
            c = rand_cmatrix(rng, 5, 3)
            left = ct.cmatmul(ct.cmatmul(a, b), c)
            right = ct.cmatmul(a, ct.cmatmul(b, c))
            rel = np.sqrt(ct.fro_norm_sq(left - right) / ct.fro_norm_sq(left))
            assert rel < 1e-10


class TestHadamardAndElementwise:
    def test_hadamard_ones_zeros(self):
        rng = np.random.default_rng(3)
        a = rand_cmatrix(rng, 3, 4)
        assert np.array_equal(ct.hadamard(a, ct.cones(3, 4)), a)
        assert np.array_equal(ct.hadamard(a, ct.czeros(3, 4)), ct.czeros(3, 4))

    def test_hadamard_scalar_by_hand(self):
        # (1+i)(1-i) = 1 - i + i - i^2 = 2
        out = ct.hadamard(np.array([[1 + 1j]]), np.array([[1 - 1j]]))
        assert out[0, 0] == 2 + 0j

    def test_hadamard_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ct.hadamard(ct.cones(2, 2), ct.cones(2, 3))

    def test_add_sub_scale(self):
        rng = np.random.default_rng(4)
        a = rand_cmatrix(rng, 3, 3)
        assert np.array_equal(ct.add(a, ct.czeros(3, 3)), a)
        assert np.array_equal(ct.sub(a, a), ct.czeros(3, 3))
        assert np.array_equal(ct.scale(ct.ceye(2), 2 + 0j), 2 * ct.ceye(2))
        with pytest.raises(ShapeError):
            ct.add(a, ct.cones(2, 2))


class TestConjTranspose:
    def test_involution(self):
        rng = np.random.default_rng(5)
        a = rand_cmatrix(rng, 3, 5)
        assert np.array_equal(ct.conj_transpose(ct.conj_transpose(a)), a)

    def test_scalar_i(self):
        assert ct.conj_transpose(np.array([[1j]]))[0, 0] == -1j

    def test_unitary_from_dft_columns(self):
        n = 8
        k = np.arange(n)
        q = np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
        gap = np.abs(ct.cmatmul(ct.conj_transpose(q), q) - ct.ceye(n)).max()
        assert gap < 1e-12

    def test_reverses_products(self):
        rng = np.random.default_rng(6)
        a = rand_cmatrix(rng, 3, 4)
        b = rand_cmatrix(rng, 4, 2)
        lhs = ct.conj_transpose(ct.cmatmul(a, b))
        rhs = ct.cmatmul(ct.conj_transpose(b), ct.conj_transpose(a))
        assert np.abs(lhs - rhs).max() < 1e-12


class TestSplitActivations:
    def test_sigmoid_at_zero(self):
        out = ct.split_sigmoid(ct.czeros(2, 2))
        assert np.array_equal(out, (0.5 + 0.5j) * ct.cones(2, 2))

    def test_sigmoid_saturation(self):
        out = ct.split_sigmoid(np.array([[1e4 + 0j]]))
        assert out[0, 0].real == pytest.approx(1.0, abs=1e-12)

    def test_sigmoid_value(self):
        # oracle: 1/(1+exp(-x)) evaluated by hand
        out = ct.split_sigmoid(np.array([[1 + 2j]]))
        assert out[0, 0].real == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-12)
        assert out[0, 0].imag == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-12)
        assert abs(out[0, 0] - (0.73106 + 0.88080j)) < 1e-5

    def test_tanh_zero_and_value(self):
        assert ct.split_tanh(ct.czeros(1, 1))[0, 0] == 0j
        out = ct.split_tanh(np.array([[1 + 0j]]))
        assert out[0, 0] == pytest.approx(math.tanh(1.0))
        assert abs(out[0, 0].real - 0.76159) < 1e-5

    def test_tanh_odd_symmetry(self):
        rng = np.random.default_rng(7)
        a = rand_cmatrix(rng, 3, 3)
        assert np.abs(ct.split_tanh(-a) + ct.split_tanh(a)).max() < 1e-15

    def test_entrywise_commutes_with_permutation(self):
        rng = np.random.default_rng(8)
        a = rand_cmatrix(rng, 4, 5)
        perm = rng.permutation(5)
        assert np.array_equal(ct.split_sigmoid(a)[:, perm], ct.split_sigmoid(a[:, perm]))
        assert np.array_equal(ct.split_tanh(a)[:, perm], ct.split_tanh(a[:, perm]))

    def test_works_on_noncontiguous_input(self):
        rng = np.random.default_rng(9)
        a = rand_cmatrix(rng, 4, 4)
        at = ct.conj_transpose(a)
        assert np.abs(ct.split_tanh(at) - (np.tanh(at.real) + 1j * np.tanh(at.imag))).max() == 0


class TestFroNormSq:
    def test_values(self):
        assert ct.fro_norm_sq(ct.czeros(3, 2)) == 0.0
        assert ct.fro_norm_sq(ct.ceye(3)) == 3.0
        assert ct.fro_norm_sq(np.array([[3 + 4j]])) == pytest.approx(25.0)

    def test_equals_vec_norm(self):
        rng = np.random.default_rng(10)
        a = rand_cmatrix(rng, 3, 4)
        assert ct.fro_norm_sq(a) == pytest.approx(ct.fro_norm_sq(ct.vec(a)), rel=1e-15)


class TestSolveHermitian:
    def test_identity_and_scaled_identity(self):
        rng = np.random.default_rng(11)
        b = rand_cmatrix(rng, 4, 2)
        assert np.abs(ct.solve_hermitian(ct.ceye(4), b) - b).max() < 1e-14
        assert np.abs(ct.solve_hermitian(2 * ct.ceye(4), b) - b / 2).max() < 1e-14

    def test_random_spd_residual(self):
        rng = np.random.default_rng(12)
        m = rand_cmatrix(rng, 6, 6)
        a = ct.cmatmul(m, ct.conj_transpose(m)) + 0.1 * ct.ceye(6)
        b = rand_cmatrix(rng, 6, 3)
        x = ct.solve_hermitian(a, b)
        residual = np.sqrt(ct.fro_norm_sq(a @ x - b) / ct.fro_norm_sq(b))
        assert residual < 1e-9

    def test_condition_1e6(self):
        rng = np.random.default_rng(13)
        m = rand_cmatrix(rng, 6, 6)
        q, _ = np.linalg.qr(m)
        eig = np.logspace(0, -6, 6)
        a = (q * eig) @ q.conj().T
        a = (a + a.conj().T) / 2
        b = rand_cmatrix(rng, 6, 2)
        x = ct.solve_hermitian(a, b)
        residual = np.sqrt(ct.fro_norm_sq(a @ x - b) / ct.fro_norm_sq(b))
        assert residual < 1e-9

    def test_cond_cap_raises(self):
        a = np.diag([1.0, 1e-13]).astype(complex)
        with pytest.raises(NumericError, match="ill-conditioned"):
            ct.solve_hermitian(a, ct.ceye(2), cond_cap=1e6)

    def test_non_square_and_non_hermitian(self):
        with pytest.raises(ShapeError):
            ct.solve_hermitian(ct.cones(2, 3), ct.cones(3, 1))
        bad = np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(NumericError, match="Hermitian"):
            ct.solve_hermitian(bad, ct.ceye(2))

    def test_jitter_regularizes(self):
        a = np.diag([1.0, 0.0]).astype(complex)
        x = ct.solve_hermitian(a, ct.ceye(2), jitter=1e-3)
        assert np.isfinite(x).all()


class TestVecUnvec:
    def test_scalar(self):
        a = np.array([[2 + 3j]])
        assert np.array_equal(ct.vec(a), a)

    def test_round_trip(self):
        rng = np.random.default_rng(14)
        a = rand_cmatrix(rng, 3, 4)
        assert np.array_equal(ct.unvec(ct.vec(a), 3, 4), a)

    def test_column_major_by_hand(self):
        a = np.array([[1, 3], [2, 4]], dtype=complex)
        assert np.array_equal(ct.vec(a)[:, 0], np.array([1, 2, 3, 4], dtype=complex))

    def test_unvec_length_mismatch(self):
        with pytest.raises(ShapeError):
            ct.unvec(ct.cones(5, 1), 2, 2)


class TestConstructorsAndCounter:
    def test_cmatrix_rejects_nan(self):
        with pytest.raises(NumericError):
            ct.cmatrix([[np.nan]])

    def test_cmatrix_promotes_scalars_and_vectors(self):
        assert ct.cmatrix(2.0).shape == (1, 1)
        assert ct.cmatrix([1, 2, 3]).shape == (3, 1)

    def test_counter_counts_matmul(self):
        a = ct.cones(2, 3)
        b = ct.cones(3, 4)
        with ct.counting() as counter:
            ct.cmatmul(a, b)
            ct.hadamard(b, b)
        assert counter.total == 2 * 3 * 4 + 3 * 4

    def test_counter_inactive_outside_block(self):
        with ct.counting() as counter:
            pass
        ct.cmatmul(ct.cones(2, 2), ct.cones(2, 2))
        assert counter.total == 0
