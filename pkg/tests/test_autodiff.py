import numpy as np
import pytest

from ctcp import ctmath as ct
from ctcp.autodiff import Tape, backward, finite_diff_check, record, replay
from ctcp.errors import ValidationError


def rand_cmatrix(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_tape(seed, n_extra_ops=10):
    """A tape exercising every op kind at least once, ending in a real scalar."""
    rng = np.random.default_rng(seed)
    t = Tape()
    a = t.leaf(rand_cmatrix(rng, 3, 4))
    b = t.leaf(rand_cmatrix(rng, 4, 3))
    c = t.leaf(rand_cmatrix(rng, 3, 3))
    x = t.matmul(a, b)
    x = t.add(x, c)
    x = t.hadamard(x, t.sub(t.conj_transpose(t.matmul(a, b)), c))
    x = t.tanh(t.scale(x, 0.3 - 0.2j))
    x = t.sigmoid(x)
    for _ in range(n_extra_ops):
        x = t.tanh(t.matmul(x, t.const(rand_cmatrix(rng, 3, 3) * 0.3)))
    return t, (a, b, c), t.fro_norm_sq(x)


class TestRecordAndReplay:
    def test_record_matmul_identity(self):
        t = Tape()
        x_val = rand_cmatrix(np.random.default_rng(0), 3, 3)
        i = t.const(ct.ceye(3))
        x = t.const(x_val)
        y = record(t, "matmul", i, x)
        assert np.array_equal(t.value(y), x_val)

    def test_tape_length_counts_ops(self):
        t = Tape()
        a = t.leaf(ct.cones(2, 2))
        assert len(t) == 1
        for k in range(5):
            a = t.tanh(a)
        assert len(t) == 6  # one leaf + five ops

    def test_replay_matches_bit_exactly(self):
        t, _, _ = random_tape(1)
        replayed = replay(t)
        assert len(replayed) == len(t.nodes)
        for node, value in zip(t.nodes, replayed):
            assert np.array_equal(node.value, value)

    def test_solve_is_not_recordable(self):
        t = Tape()
        a = t.const(ct.ceye(2))
        with pytest.raises(ValidationError, match="unsupported op"):
            record(t, "solve_hermitian", a, a)

    def test_inputs_reference_earlier_nodes(self):
        t, _, loss = random_tape(2)
        for vid, node in enumerate(t.nodes):
            assert all(i < vid for i in node.inputs)


class TestBackwardRules:
    def test_fro_norm_sq_gradient_is_2x(self):
        # L = sum(re^2 + im^2)  =>  dL/dre = 2 re, dL/dim = 2 im  =>  g = 2X
        rng = np.random.default_rng(3)
        t = Tape()
        x_val = rand_cmatrix(rng, 3, 2)
        x = t.leaf(x_val)
        grads = backward(t, t.fro_norm_sq(x), {x})
        assert np.abs(grads[x] - 2 * x_val).max() < 1e-14

    def test_unused_leaf_gets_exact_zero(self):
        t = Tape()
        x = t.leaf(ct.cones(2, 2))
        unused = t.leaf(ct.cones(3, 3))
        grads = backward(t, t.fro_norm_sq(x), {x, unused})
        assert np.array_equal(grads[unused], np.zeros((3, 3), complex))

    def test_loss_contract_errors(self):
        t = Tape()
        x = t.leaf(ct.cones(2, 2))
        with pytest.raises(ValidationError, match="1x1"):
            backward(t, x, {x})
        y = t.leaf(np.array([[1j]]))
        with pytest.raises(ValidationError, match="real"):
            backward(t, y, {y})

    @pytest.mark.parametrize("opkind", [
        "matmul", "hadamard", "add", "sub", "scale", "conj_transpose",
        "sigmoid", "tanh", "fro_norm_sq",
    ])
    def test_each_op_matches_finite_differences(self, opkind):
        rng = np.random.default_rng(hash(opkind) % 2 ** 31)

        def build(params):
            t = Tape()
            a = t.leaf(params["a"])
            b = t.leaf(params["b"])
            if opkind == "matmul":
                out = t.matmul(a, b)
            elif opkind == "hadamard":
                out = t.hadamard(a, t.conj_transpose(b))
            elif opkind == "add":
                out = t.add(a, t.conj_transpose(b))
            elif opkind == "sub":
                out = t.sub(a, t.conj_transpose(b))
            elif opkind == "scale":
                out = t.scale(a, 0.7 - 1.3j)
            elif opkind == "conj_transpose":
                out = t.conj_transpose(a)
            elif opkind == "sigmoid":
                out = t.sigmoid(a)
            elif opkind == "tanh":
                out = t.tanh(a)
            else:
                out = a
            # wrap into a generic real scalar with nontrivial downstream weights
            w = t.const(rand_cmatrix(np.random.default_rng(99), *t.value(out).shape))
            loss = t.fro_norm_sq(t.hadamard(out, w))
            grads = backward(t, loss, {a, b})
            return float(t.value(loss)[0, 0].real), {"a": grads[a], "b": grads[b]}

        params = {"a": rand_cmatrix(rng, 3, 4), "b": rand_cmatrix(rng, 4, 3)}
        worst = finite_diff_check(build, params, probes=12, step=1e-6, seed=5)
        assert worst < 1e-6

    def test_gradient_linearity(self):
        rng = np.random.default_rng(6)
        a_val = rand_cmatrix(rng, 3, 3)
        b_val = rand_cmatrix(rng, 3, 3)

        def grads_of(alpha, beta):
            t = Tape()
            x = t.leaf(a_val)
            l1 = t.fro_norm_sq(t.tanh(x))
            l2 = t.fro_norm_sq(t.matmul(x, t.const(b_val)))
            loss = t.add(t.scale(l1, alpha), t.scale(l2, beta))
            return backward(t, loss, {x})[x]

        g = grads_of(2.0, -0.5)
        g1 = grads_of(1.0, 0.0)
        g2 = grads_of(0.0, 1.0)
        assert np.abs(g - (2.0 * g1 - 0.5 * g2)).max() < 1e-12

    def test_two_backward_passes_identical(self):
        t, leaves, loss = random_tape(7)
        n_nodes = len(t.nodes)
        g1 = backward(t, loss, set(leaves))
        g2 = backward(t, loss, set(leaves))
        assert len(t.nodes) == n_nodes  # tape untouched
        for vid in leaves:
            assert np.array_equal(g1[vid], g2[vid])

    def test_seeded_vjp_matches_scalar_composition(self):
        # backward from a matrix output y with seed s must equal the gradient
        # of the real scalar sum(s.re * y.re + s.im * y.im)
        rng = np.random.default_rng(8)
        a_val = rand_cmatrix(rng, 3, 3)
        b_val = rand_cmatrix(rng, 3, 3)
        seed = rand_cmatrix(rng, 3, 3)

        t = Tape()
        a = t.leaf(a_val)
        y = t.tanh(t.matmul(a, t.const(b_val)))
        g_vjp = backward(t, y, {a}, seed=seed)[a]

        def scalar(a_mat):
            y_val = ct.split_tanh(a_mat @ b_val)
            return float(np.sum(seed.real * y_val.real + seed.imag * y_val.imag))

        step = 1e-6
        for _ in range(8):
            i, j = int(rng.integers(3)), int(rng.integers(3))
            part = int(rng.integers(2))
            delta = step if part == 0 else 1j * step
            ap = a_val.copy(); ap[i, j] += delta
            am = a_val.copy(); am[i, j] -= delta
            fd = (scalar(ap) - scalar(am)) / (2 * step)
            ga = g_vjp[i, j].real if part == 0 else g_vjp[i, j].imag
            assert abs(ga - fd) < 1e-6 * max(1.0, abs(fd))


class TestFiniteDiffCheck:
    def test_quadratic_loss_is_exact(self):
        rng = np.random.default_rng(9)
        target = rand_cmatrix(rng, 3, 3)

        def quad(params):
            t = Tape()
            x = t.leaf(params["x"])
            loss = t.fro_norm_sq(t.sub(x, t.const(target)))
            g = backward(t, loss, {x})[x]
            return float(t.value(loss)[0, 0].real), {"x": g}

        worst = finite_diff_check(quad, {"x": rand_cmatrix(rng, 3, 3)}, probes=10, step=1e-3)
        assert worst < 1e-8

    def test_zero_parameter_model_returns_zero(self):
        assert finite_diff_check(lambda p: (0.0, {}), {}, probes=3) == 0.0

    def test_invalid_arguments(self):
        with pytest.raises(ValidationError):
            finite_diff_check(lambda p: (0.0, {}), {}, probes=0)
        with pytest.raises(ValidationError):
            finite_diff_check(lambda p: (0.0, {}), {}, probes=1, step=0.0)
