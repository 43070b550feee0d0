"""Dense complex matrix algebra and split real/imaginary nonlinearities.

A "CMatrix" is simply a 2-D numpy array of dtype complex128. Values are
treated as immutable once constructed; no operation here mutates its inputs.
There is deliberately no broadcasting: every shape mismatch raises ShapeError
so that model-wiring bugs surface immediately.

vec/unvec use column-major stacking (vec(A) stacks the columns of A) even
though the underlying storage is row-major; the mismatch is internal only.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import NumericError, ShapeError

Array = np.ndarray

_SOLVE_RESIDUAL_TOL = 1e-9


# ---------------------------------------------------------------------------
# complex-multiplication counter (feeds the flops report; single-threaded use)

class MultCounter:
    """Running tally of complex multiplications."""

    __slots__ = ("total",)

    def __init__(self) -> None:
        self.total = 0


_active_counter: MultCounter | None = None


@contextmanager
def counting():
    """Activate a fresh multiplication counter for the enclosed block."""
    global _active_counter
    prev = _active_counter
    counter = MultCounter()
    _active_counter = counter
    try:
        yield counter
    finally:
        _active_counter = prev


def _tick(n: int) -> None:
    if _active_counter is not None:
        _active_counter.total += n


# ---------------------------------------------------------------------------
# constructors

def cmatrix(data) -> Array:
    """Validating constructor: a finite 2-D complex128 matrix.

    Scalars become 1x1, 1-D sequences become column vectors.
    """
    a = np.array(data, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a.view(np.float64)).all():
        raise NumericError("matrix entries must be finite")
    return a


def czeros(rows: int, cols: int) -> Array:
    return np.zeros((rows, cols), dtype=np.complex128)


def cones(rows: int, cols: int) -> Array:
    return np.ones((rows, cols), dtype=np.complex128)


def ceye(n: int) -> Array:
    return np.eye(n, dtype=np.complex128)


def complex_normal(rng: np.random.Generator, rows: int, cols: int, var: float = 1.0) -> Array:
    """CN(0, var) i.i.d. entries: real and imaginary parts ~ N(0, var/2)."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal((rows, cols)) + 1j * s * rng.standard_normal((rows, cols))


# ---------------------------------------------------------------------------
# arithmetic

def cmatmul(a: Array, b: Array) -> Array:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    _tick(a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def hadamard(a: Array, b: Array) -> Array:
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    _tick(a.size)
    return a * b


def add(a: Array, b: Array) -> Array:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return a + b


def sub(a: Array, b: Array) -> Array:
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    return a - b


def scale(a: Array, s: complex) -> Array:
    _tick(a.size)
    return a * complex(s)


def conj_transpose(a: Array) -> Array:
    return a.conj().T


def _interleaved(a: Array) -> Array:
    # complex128 viewed as float64 is the (re, im, re, im, ...) split domain
    if not a.flags.c_contiguous:
        a = np.ascontiguousarray(a)
    return a.view(np.float64)


def split_sigmoid(a: Array) -> Array:
    """Sigmoid applied to the real and imaginary parts independently."""
    return expit(_interleaved(a)).view(np.complex128)


def split_tanh(a: Array) -> Array:
    """tanh applied to the real and imaginary parts independently."""
    return np.tanh(_interleaved(a)).view(np.complex128)


def fro_norm_sq(a: Array) -> float:
    """Squared Frobenius norm: sum of |a_ij|^2."""
    flat = _interleaved(a).ravel()
    return float(flat @ flat)


# ---------------------------------------------------------------------------
# linear solves and reshaping

def solve_hermitian(a: Array, b: Array, jitter: float = 0.0, cond_cap: float = 1e12) -> Array:
    """Solve a @ X = b for Hermitian positive definite a, via Cholesky.

    jitter > 0 adds jitter * I before factoring. Raises NumericError when the
    condition estimate exceeds cond_cap, the factorization fails, or the
    relative residual exceeds 1e-9.
    """
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"solve needs a square matrix, got {a.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"solve shape mismatch: {a.shape} x {b.shape}")
    m = a if jitter == 0.0 else a + jitter * ceye(a.shape[0])
    herm_gap = np.abs(m - m.conj().T).max()
    if herm_gap > 1e-8 * max(1.0, np.abs(m).max()):
        raise NumericError(f"matrix is not Hermitian (gap {herm_gap:.3e})")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > cond_cap:
        raise NumericError(f"system too ill-conditioned: cond estimate {cond:.3e} > {cond_cap:.3e}")
    try:
        factor = cho_factor(m, lower=True, check_finite=False)
        x = cho_solve(factor, b, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - cond cap fires first
        raise NumericError(f"Cholesky factorization failed: {exc}") from exc
    bnorm = np.sqrt(fro_norm_sq(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    residual = np.sqrt(fro_norm_sq(m @ x - b)) / bnorm
    if residual > _SOLVE_RESIDUAL_TOL:
        raise NumericError(f"solve residual {residual:.3e} above {_SOLVE_RESIDUAL_TOL:.0e}")
    return x


def vec(a: Array) -> Array:
    """Column-major vectorization: stack the columns of a into one column."""
    return a.reshape(-1, 1, order="F")


def unvec(v: Array, rows: int, cols: int) -> Array:
    if v.shape != (rows * cols, 1):
        raise ShapeError(f"unvec expects shape ({rows * cols}, 1), got {v.shape}")
    return v.reshape(rows, cols, order="F")
