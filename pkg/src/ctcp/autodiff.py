"""Tape-based reverse-mode differentiation over the complex matrix ops.

Every complex entry is treated as a pair of independent real parameters.
For a real scalar loss L, the gradient carried for a matrix X is the complex
matrix  g = dL/dX.re + 1j * dL/dX.im.  Because the nonlinearities act on the
real and imaginary parts separately, the whole network is a real-valued
network in disguise, and under this convention the adjoint of each complex
op is again a single complex op:

    C = A @ B      ->  g_A = g_C @ conj(B).T,   g_B = conj(A).T @ g_C
    C = A * B      ->  g_A = g_C * conj(B),     g_B = g_C * conj(A)
    C = s * A      ->  g_A = conj(s) * g_C
    C = A^H        ->  g_A = g_C^H
    split sigmoid  ->  g_in.re = s'(in.re) * g_out.re   (imag analogous)
    fro_norm_sq    ->  g_A = 2 * Re(g_C) * A

A tape is append-only: node inputs always reference earlier nodes, forward
values are stored on the nodes, and replaying a tape reproduces the recorded
values bit-exactly. Completed tapes are immutable; backward never writes to
the tape, so concurrent backward passes over one tape are safe.
"""

from __future__ import annotations

import numpy as np

from . import ctmath as ct
from .errors import ShapeError, ValidationError

Array = np.ndarray


class Node:
    __slots__ = ("kind", "inputs", "value", "aux")

    def __init__(self, kind: str, inputs: tuple, value: Array, aux=None):
        self.kind = kind
        self.inputs = inputs
        self.value = value
        self.aux = aux


class Tape:
    """Append-only record of an eager forward computation.

    Methods both compute the forward value (through ctmath, so shape checks
    and multiplication counting apply) and append a node. All methods return
    integer variable ids (indexes into ``nodes``).
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._ones_cache: dict[tuple[int, int], int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _emit(self, kind: str, inputs: tuple, value: Array, aux=None) -> int:
        self.nodes.append(Node(kind, inputs, value, aux))
        return len(self.nodes) - 1

    def value(self, vid: int) -> Array:
        return self.nodes[vid].value

    # -- value holders ------------------------------------------------------

    def leaf(self, value: Array) -> int:
        """A differentiable input (model parameter)."""
        return self._emit("leaf", (), np.asarray(value, dtype=np.complex128))

    def const(self, value: Array) -> int:
        """A non-differentiable input (data, labels, fixed matrices)."""
        return self._emit("const", (), np.asarray(value, dtype=np.complex128))

    def ones(self, rows: int, cols: int) -> int:
        """Shared all-ones constant, cached per shape."""
        key = (rows, cols)
        if key not in self._ones_cache:
            self._ones_cache[key] = self.const(ct.cones(rows, cols))
        return self._ones_cache[key]

    # -- recorded operations ------------------------------------------------

    def matmul(self, a: int, b: int) -> int:
        return self._emit("matmul", (a, b), ct.cmatmul(self.nodes[a].value, self.nodes[b].value))

    def matmul3(self, a: int, x: int, b: int) -> int:
        """Convenience for a @ x @ b (two recorded matmuls)."""
        return self.matmul(self.matmul(a, x), b)

    def hadamard(self, a: int, b: int) -> int:
        return self._emit("hadamard", (a, b), ct.hadamard(self.nodes[a].value, self.nodes[b].value))

    def add(self, a: int, b: int) -> int:
        return self._emit("add", (a, b), ct.add(self.nodes[a].value, self.nodes[b].value))

    def sub(self, a: int, b: int) -> int:
        return self._emit("sub", (a, b), ct.sub(self.nodes[a].value, self.nodes[b].value))

    def scale(self, a: int, s: complex) -> int:
        s = complex(s)
        return self._emit("scale", (a,), ct.scale(self.nodes[a].value, s), aux=s)

    def conj_transpose(self, a: int) -> int:
        return self._emit("conj_transpose", (a,), ct.conj_transpose(self.nodes[a].value))

    def sigmoid(self, a: int) -> int:
        return self._emit("sigmoid", (a,), ct.split_sigmoid(self.nodes[a].value))

    def tanh(self, a: int) -> int:
        return self._emit("tanh", (a,), ct.split_tanh(self.nodes[a].value))

    def fro_norm_sq(self, a: int) -> int:
        v = np.array([[ct.fro_norm_sq(self.nodes[a].value) + 0j]])
        return self._emit("fro_norm_sq", (a,), v)


_RECORDABLE = {
    "matmul", "hadamard", "add", "sub", "scale", "conj_transpose",
    "sigmoid", "tanh", "fro_norm_sq",
}


def record(tape: Tape, opkind: str, *inputs: int, **aux) -> int:
    """Generic front door: record one named op on the tape.

    Gradients of linear solves are never needed (solves appear only in data
    generation and evaluation), so 'solve_hermitian' is rejected outright.
    """
    if opkind not in _RECORDABLE:
        raise ValidationError(f"unsupported op kind for the tape: {opkind!r}")
    return getattr(tape, opkind)(*inputs, **aux)


def replay(tape: Tape) -> list[Array]:
    """Re-execute the tape from its stored leaf/const values.

    Returns the recomputed value of every node, in tape order. Used to verify
    that the tape is a faithful record of the forward pass.
    """
    out: list[Array] = []
    for node in tape.nodes:
        if node.kind in ("leaf", "const"):
            out.append(node.value)
            continue
        vals = [out[i] for i in node.inputs]
        if node.kind == "matmul":
            out.append(ct.cmatmul(*vals))
        elif node.kind == "hadamard":
            out.append(ct.hadamard(*vals))
        elif node.kind == "add":
            out.append(ct.add(*vals))
        elif node.kind == "sub":
            out.append(ct.sub(*vals))
        elif node.kind == "scale":
            out.append(ct.scale(vals[0], node.aux))
        elif node.kind == "conj_transpose":
            out.append(ct.conj_transpose(vals[0]))
        elif node.kind == "sigmoid":
            out.append(ct.split_sigmoid(vals[0]))
        elif node.kind == "tanh":
            out.append(ct.split_tanh(vals[0]))
        elif node.kind == "fro_norm_sq":
            out.append(np.array([[ct.fro_norm_sq(vals[0]) + 0j]]))
        else:  # pragma: no cover
            raise ValidationError(f"unknown op kind {node.kind!r}")
    return out


def _accumulate(adj: list, vid: int, g: Array) -> None:
    # '+' (not '+=') so shared pass-through cotangents are never mutated
    adj[vid] = g if adj[vid] is None else adj[vid] + g


def backward(tape: Tape, loss: int, leaves, seed: Array | None = None) -> dict[int, Array]:
    """Reverse-mode gradients of ``loss`` with respect to ``leaves``.

    Without an explicit seed, ``loss`` must be a real 1x1 scalar and the
    sweep is seeded with 1. With ``seed`` given (same shape as the loss
    node), this computes a vector-Jacobian product instead; the adjoint
    integrator relies on this. Unreached leaves get exact zeros.
    """
    nodes = tape.nodes
    if not 0 <= loss < len(nodes):
        raise ValidationError(f"loss id {loss} not on this tape")
    lv = nodes[loss].value
    if seed is None:
        if lv.shape != (1, 1):
            raise ValidationError(f"loss must be a 1x1 real scalar, got shape {lv.shape}")
        if abs(lv[0, 0].imag) > 1e-12 * max(1.0, abs(lv[0, 0].real)):
            raise ValidationError(f"loss must be real, got imaginary part {lv[0, 0].imag!r}")
        seed = np.ones((1, 1), dtype=np.complex128)
    else:
        seed = np.asarray(seed, dtype=np.complex128)
        if seed.shape != lv.shape:
            raise ShapeError(f"seed shape {seed.shape} does not match loss shape {lv.shape}")

    adj: list[Array | None] = [None] * len(nodes)
    adj[loss] = seed
    for vid in range(loss, -1, -1):
        g = adj[vid]
        if g is None:
            continue
        node = nodes[vid]
        kind = node.kind
        if kind in ("leaf", "const"):
            continue
        if kind == "matmul":
            ai, bi = node.inputs
            a, b = nodes[ai].value, nodes[bi].value
            _accumulate(adj, ai, g @ b.conj().T)
            _accumulate(adj, bi, a.conj().T @ g)
        elif kind == "hadamard":
            ai, bi = node.inputs
            a, b = nodes[ai].value, nodes[bi].value
            _accumulate(adj, ai, g * b.conj())
            _accumulate(adj, bi, g * a.conj())
        elif kind == "add":
            _accumulate(adj, node.inputs[0], g)
            _accumulate(adj, node.inputs[1], g)
        elif kind == "sub":
            _accumulate(adj, node.inputs[0], g)
            _accumulate(adj, node.inputs[1], -g)
        elif kind == "scale":
            _accumulate(adj, node.inputs[0], np.conj(node.aux) * g)
        elif kind == "conj_transpose":
            _accumulate(adj, node.inputs[0], g.conj().T)
        elif kind == "sigmoid":
            yf = ct._interleaved(node.value)
            gin = ct._interleaved(g) * (yf * (1.0 - yf))
            _accumulate(adj, node.inputs[0], gin.view(np.complex128))
        elif kind == "tanh":
            yf = ct._interleaved(node.value)
            gin = ct._interleaved(g) * (1.0 - yf * yf)
            _accumulate(adj, node.inputs[0], gin.view(np.complex128))
        elif kind == "fro_norm_sq":
            x = nodes[node.inputs[0]].value
            _accumulate(adj, node.inputs[0], (2.0 * g[0, 0].real) * x)
        else:  # pragma: no cover
            raise ValidationError(f"unknown op kind {kind!r}")

    out: dict[int, Array] = {}
    for vid in leaves:
        g = adj[vid]
        out[vid] = np.zeros_like(nodes[vid].value) if g is None else g.copy()
    return out


def finite_diff_check(loss_and_grads, params: dict[str, Array], probes: int,
                      step: float = 1e-6, seed: int = 0) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss_and_grads(params) -> (loss, grads)`` with grads keyed like params.
    ``probes`` random real components are perturbed by +-step; returns the
    maximum of |g_analytic - g_fd| / max(|g_fd|, 1e-12). A model with no
    parameters returns 0 by convention.
    """
    if step <= 0:
        raise ValidationError("finite-difference step must be positive")
    if probes < 1:
        raise ValidationError("need at least one probe")
    names = sorted(n for n, v in params.items() if v.size > 0)
    if not names:
        return 0.0
    _, grads = loss_and_grads(params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        name = names[int(rng.integers(len(names)))]
        mat = params[name]
        i = int(rng.integers(mat.shape[0]))
        j = int(rng.integers(mat.shape[1]))
        delta = step if int(rng.integers(2)) == 0 else 1j * step
        probed = dict(params)
        plus = mat.copy()
        plus[i, j] += delta
        probed[name] = plus
        loss_plus = loss_and_grads(probed)[0]
        minus = mat.copy()
        minus[i, j] -= delta
        probed[name] = minus
        loss_minus = loss_and_grads(probed)[0]
        fd = (loss_plus - loss_minus) / (2.0 * step)
        ga = grads[name][i, j].real if delta.imag == 0 else grads[name][i, j].imag
        worst = max(worst, abs(ga - fd) / max(abs(fd), 1e-12))
    return worst
