"""Continuous-time channel prediction model.

A two-sided (factored) complex GRU encoder folds the J historical channel
matrices into an initial hidden state; an autonomous neural-ODE decoder
evolves that state to arbitrary future times with a fixed-step solver; a
bilinear head maps hidden states back to channel matrices. Every transition
applies separate left (antenna-domain) and right (frequency-domain) factor
matrices, so hidden states stay matrices of shape (F_l x F_r) instead of
being vectorized.

The "vanilla" counterpart keeps the classical vectorized GRU formulation and
exists as a baseline and as a cross-check: with Kronecker-structured weights
it reproduces the factored model exactly.

Gradients come either from tape backprop through the solver (exact for the
discretized forward) or from the continuous adjoint integrated backward.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import ctmath as ct
from .autodiff import Tape, backward
from .channelsim import (FORMAT_VERSION, SystemConfig, _pack_config,
                         _read_exact, _unpack_config)
from .errors import DataFormatError, ShapeError, ValidationError

Array = np.ndarray

CHECKPOINT_MAGIC = b"CTCK"

GATES = ("z", "x", "u")

ENCODER_NAMES = tuple(f"{side}_{g}" for g in GATES for side in ("U_l", "U_r", "W_l", "W_r"))
DECODER_NAMES = tuple(f"{side}_{g}" for g in GATES for side in ("V_l", "V_r"))
HEAD_NAMES = ("W_l_h", "W_r_h")


# ---------------------------------------------------------------------------
# solver specification

@dataclass(frozen=True)
class SolverSpec:
    """Fixed-step ODE solver choice; step is in frame units."""

    scheme: str = "rk4"          # 'euler' | 'rk4'
    step_frames: float = 0.2

    def __post_init__(self):
        if self.scheme not in ("euler", "rk4"):
            raise ValidationError(f"unknown solver scheme {self.scheme!r}")
        if not 0.0 < self.step_frames <= 1.0:
            raise ValidationError(f"step_frames must lie in (0, 1], got {self.step_frames}")


def default_solver(cfg: SystemConfig) -> SolverSpec:
    """RK4 with one step per slot, so test-grid targets land on step ends."""
    return SolverSpec("rk4", 1.0 / cfg.slots_per_frame)


# ---------------------------------------------------------------------------
# parameters

def model_param_shapes(cfg: SystemConfig) -> dict[str, tuple[int, int]]:
    a, m = cfg.eff_rows, cfg.n_subcarriers
    fl, fr = cfg.feature_l, cfg.feature_r
    shapes: dict[str, tuple[int, int]] = {}
    for g in GATES:
        shapes[f"U_l_{g}"] = (fl, a)
        shapes[f"U_r_{g}"] = (m, fr)
        shapes[f"W_l_{g}"] = (fl, fl)
        shapes[f"W_r_{g}"] = (fr, fr)
        shapes[f"V_l_{g}"] = (fl, fl)
        shapes[f"V_r_{g}"] = (fr, fr)
    shapes["W_l_h"] = (a, fl)
    shapes["W_r_h"] = (fr, m)
    return shapes


# fan-in is the contracted dimension of the factor's product position
def _fan_in(name: str, shape: tuple[int, int]) -> int:
    return shape[1] if name.startswith(("U_l", "W_l", "V_l", "W_l_h")) else shape[0]


# the head has no nonlinearity; a smaller init keeps fresh-model predictions
# below label power so the initial NMSE sits near 0 dB
_HEAD_VAR_SCALE = 0.0625


def init_model_params(cfg: SystemConfig, rng: np.random.Generator) -> dict[str, Array]:
    """CN(0, 1/fan_in) entries (head factors scaled down by 1/4)."""
    params = {}
    for name, shape in model_param_shapes(cfg).items():
        var = 1.0 / _fan_in(name, shape)
        if name in HEAD_NAMES:
            var *= _HEAD_VAR_SCALE
        params[name] = ct.complex_normal(rng, shape[0], shape[1], var)
    return params


def vanilla_param_shapes(cfg: SystemConfig, hidden: int | None = None,
                         with_decoder: bool = True) -> dict[str, tuple[int, int]]:
    d_in = cfg.eff_rows * cfg.n_subcarriers
    d_h = d_in if hidden is None else hidden
    shapes: dict[str, tuple[int, int]] = {}
    for g in GATES:
        shapes[f"van_U_{g}"] = (d_h, d_in)
        shapes[f"van_W_{g}"] = (d_h, d_h)
        if with_decoder:
            shapes[f"van_V_{g}"] = (d_h, d_h)
    shapes["van_W_h"] = (d_in, d_h)
    return shapes


def init_vanilla_params(cfg: SystemConfig, rng: np.random.Generator,
                        hidden: int | None = None, with_decoder: bool = True) -> dict[str, Array]:
    params = {}
    for name, shape in vanilla_param_shapes(cfg, hidden, with_decoder).items():
        var = 1.0 / shape[1]
        if name == "van_W_h":
            var *= _HEAD_VAR_SCALE
        params[name] = ct.complex_normal(rng, shape[0], shape[1], var)
    return params


# ---------------------------------------------------------------------------
# transition cells (recorded on a tape; p maps parameter names to var ids)

def encoder_cell(tape: Tape, p: dict[str, int], h_in: int, r_prev: int) -> int:
    """One gated update of the matrix hidden state from one observed channel.

    Z = sig(U_l_z H U_r_z + W_l_z R W_r_z)
    X = sig(U_l_x H U_r_x + W_l_x R W_r_x)
    U = tanh(U_l_u H U_r_u + W_l_u (R o X) W_r_u)
    R' = (1 - Z) o U + Z o R
    """
    rows, cols = tape.value(r_prev).shape
    ones = tape.ones(rows, cols)
    z = tape.sigmoid(tape.add(tape.matmul3(p["U_l_z"], h_in, p["U_r_z"]),
                              tape.matmul3(p["W_l_z"], r_prev, p["W_r_z"])))
    x = tape.sigmoid(tape.add(tape.matmul3(p["U_l_x"], h_in, p["U_r_x"]),
                              tape.matmul3(p["W_l_x"], r_prev, p["W_r_x"])))
    u = tape.tanh(tape.add(tape.matmul3(p["U_l_u"], h_in, p["U_r_u"]),
                           tape.matmul3(p["W_l_u"], tape.hadamard(r_prev, x), p["W_r_u"])))
    return tape.add(tape.hadamard(tape.sub(ones, z), u), tape.hadamard(z, r_prev))


def encode(tape: Tape, p: dict[str, int], inputs: list[int]) -> int:
    """Fold the encoder cell over the J inputs (oldest first) from a zero state."""
    if not inputs:
        raise ValidationError("encoder needs at least one input channel")
    fl = tape.value(p["W_l_z"]).shape[0]
    fr = tape.value(p["W_r_z"]).shape[0]
    r = tape.const(ct.czeros(fl, fr))
    for h_in in inputs:
        r = encoder_cell(tape, p, h_in, r)
    return r


def decoder_field(tape: Tape, p: dict[str, int], o: int) -> int:
    """Autonomous hidden-state dynamics dO/dt:

    Z = sig(V_l_z O V_r_z); X = sig(V_l_x O V_r_x)
    U = tanh(V_l_u (O o X) V_r_u)
    dO/dt = (1 - Z) o U + Z o O
    """
    rows, cols = tape.value(o).shape
    ones = tape.ones(rows, cols)
    z = tape.sigmoid(tape.matmul3(p["V_l_z"], o, p["V_r_z"]))
    x = tape.sigmoid(tape.matmul3(p["V_l_x"], o, p["V_r_x"]))
    u = tape.tanh(tape.matmul3(p["V_l_u"], tape.hadamard(o, x), p["V_r_u"]))
    return tape.add(tape.hadamard(tape.sub(ones, z), u), tape.hadamard(z, o))


def pred_head(tape: Tape, p: dict[str, int], o: int) -> int:
    """Bilinear readout: H_hat = W_l_h O W_r_h."""
    return tape.matmul3(p["W_l_h"], o, p["W_r_h"])


# vanilla (vectorized) counterparts --------------------------------------

def vanilla_cell(tape: Tape, p: dict[str, int], h_in: int, r_prev: int) -> int:
    rows = tape.value(r_prev).shape[0]
    ones = tape.ones(rows, 1)
    z = tape.sigmoid(tape.add(tape.matmul(p["van_U_z"], h_in), tape.matmul(p["van_W_z"], r_prev)))
    x = tape.sigmoid(tape.add(tape.matmul(p["van_U_x"], h_in), tape.matmul(p["van_W_x"], r_prev)))
    u = tape.tanh(tape.add(tape.matmul(p["van_U_u"], h_in),
                           tape.matmul(p["van_W_u"], tape.hadamard(r_prev, x))))
    return tape.add(tape.hadamard(tape.sub(ones, z), u), tape.hadamard(z, r_prev))


def vanilla_encode(tape: Tape, p: dict[str, int], inputs: list[int]) -> int:
    if not inputs:
        raise ValidationError("encoder needs at least one input channel")
    d_h = tape.value(p["van_W_z"]).shape[0]
    r = tape.const(ct.czeros(d_h, 1))
    for h_in in inputs:
        r = vanilla_cell(tape, p, h_in, r)
    return r


def vanilla_field(tape: Tape, p: dict[str, int], o: int) -> int:
    rows = tape.value(o).shape[0]
    ones = tape.ones(rows, 1)
    z = tape.sigmoid(tape.matmul(p["van_V_z"], o))
    x = tape.sigmoid(tape.matmul(p["van_V_x"], o))
    u = tape.tanh(tape.matmul(p["van_V_u"], tape.hadamard(o, x)))
    return tape.add(tape.hadamard(tape.sub(ones, z), u), tape.hadamard(z, o))


# ---------------------------------------------------------------------------
# fixed-step ODE solving

def _segment_sizes(length: float, step: float) -> list[float]:
    """Step sizes covering one segment: full steps of `step`, the last one
    shortened to land exactly on the target (and snapped back to `step`
    when the segment length is a whole number of steps up to roundoff)."""
    if length <= 0.0:
        return []
    n = max(1, math.ceil(length / step - 1e-9))
    remainder = length - (n - 1) * step
    if abs(remainder - step) <= 1e-9 * step:
        remainder = step
    return [step] * (n - 1) + [remainder]


def _euler_step(tape: Tape, field, o: int, h: float) -> int:
    return tape.add(o, tape.scale(field(tape, o), h))


def _rk4_step(tape: Tape, field, o: int, h: float) -> int:
    k1 = field(tape, o)
    k2 = field(tape, tape.add(o, tape.scale(k1, h / 2.0)))
    k3 = field(tape, tape.add(o, tape.scale(k2, h / 2.0)))
    k4 = field(tape, tape.add(o, tape.scale(k3, h)))
    acc = tape.add(tape.add(k1, tape.scale(tape.add(k2, k3), 2.0)), k4)
    return tape.add(o, tape.scale(acc, h / 6.0))


def _check_targets(targets) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise ValidationError("ode_solve needs at least one target time")
    if np.any(targets <= 0):
        raise ValidationError("target times must be positive")
    if np.any(np.diff(targets) < 0):
        raise ValidationError("target times must be sorted ascending")
    return targets


def ode_solve(tape: Tape, field, o0: int, targets, spec: SolverSpec) -> list[int]:
    """Integrate ``field`` from t=0, recording the state at each target time.

    ``field(tape, state_vid) -> vid``. Integration is segment-by-segment with
    fixed step ``spec.step_frames``; the last step of each segment shortens to
    land exactly on the target. Fully deterministic.
    """
    targets = _check_targets(targets)
    step_fn = _rk4_step if spec.scheme == "rk4" else _euler_step
    states = []
    o = o0
    t_prev = 0.0
    for t in targets:
        for h in _segment_sizes(float(t) - t_prev, spec.step_frames):
            o = step_fn(tape, field, o, h)
        states.append(o)
        t_prev = float(t)
    return states


# ---------------------------------------------------------------------------
# end-to-end forward passes

def predict_on_tape(tape: Tape, p: dict[str, int], inputs: list[int],
                    targets, spec: SolverSpec) -> list[int]:
    r0 = encode(tape, p, inputs)
    states = ode_solve(tape, lambda tp, o: decoder_field(tp, p, o), r0, targets, spec)
    return [pred_head(tape, p, o) for o in states]


def predict(params: dict[str, Array], inputs: list[Array], targets,
            spec: SolverSpec) -> list[Array]:
    """Predicted effective channels at the target times (frame units)."""
    tape = Tape()
    p = {name: tape.const(v) for name, v in params.items()}
    input_vids = [tape.const(m) for m in inputs]
    return [tape.value(v) for v in predict_on_tape(tape, p, input_vids, targets, spec)]


def vanilla_predict_on_tape(tape: Tape, p: dict[str, int], input_vecs: list[int],
                            targets, spec: SolverSpec) -> list[int]:
    r0 = vanilla_encode(tape, p, input_vecs)
    states = ode_solve(tape, lambda tp, o: vanilla_field(tp, p, o), r0, targets, spec)
    return [tape.matmul(p["van_W_h"], o) for o in states]


def vanilla_predict(params: dict[str, Array], inputs: list[Array], targets,
                    spec: SolverSpec) -> list[Array]:
    """Vectorized-GRU continuous prediction; outputs are (eff_rows*M x 1)."""
    tape = Tape()
    p = {name: tape.const(v) for name, v in params.items()}
    input_vids = [tape.const(ct.vec(m)) for m in inputs]
    return [tape.value(v) for v in vanilla_predict_on_tape(tape, p, input_vids, targets, spec)]


# ---------------------------------------------------------------------------
# continuous-adjoint gradients

def _loss_terms(tape: Tape, preds: list[int], labels: list[Array]) -> int:
    # mean over labels of ||pred - label||^2 / ||label||^2
    acc = None
    for pv, lab in zip(preds, labels):
        den = ct.fro_norm_sq(lab)
        if den <= 0.0:
            raise ValidationError("degenerate label: zero Frobenius norm")
        term = tape.scale(tape.fro_norm_sq(tape.sub(pv, tape.const(lab))), 1.0 / den)
        acc = term if acc is None else tape.add(acc, term)
    return tape.scale(acc, 1.0 / len(preds))


def _field_vjp(params: dict[str, Array], o_val: Array, a_val: Array):
    """One decoder-field evaluation plus its VJP with cotangent a_val.

    Returns (f(o), dL/dO contribution, per-parameter contributions)."""
    tape = Tape()
    dvids = {n: tape.leaf(params[n]) for n in DECODER_NAMES}
    o = tape.leaf(o_val)
    f = decoder_field(tape, dvids, o)
    grads = backward(tape, f, {o, *dvids.values()}, seed=a_val)
    return tape.value(f), grads[o], {n: grads[dvids[n]] for n in DECODER_NAMES}


def _adjoint_segment(params, o_val, a_val, g_dec, sizes, scheme):
    """Integrate (state, adjoint, parameter accumulator) backward across one
    segment, mirroring the forward step sizes in reverse."""

    def phi(ov, av):
        f, da, dg = _field_vjp(params, ov, av)
        return -f, da, dg

    for h in reversed(sizes):
        if scheme == "euler":
            do, da, dg = phi(o_val, a_val)
            o_val = o_val + h * do
            a_val = a_val + h * da
            for n in DECODER_NAMES:
                g_dec[n] = g_dec[n] + h * dg[n]
        else:
            do1, da1, dg1 = phi(o_val, a_val)
            do2, da2, dg2 = phi(o_val + (h / 2.0) * do1, a_val + (h / 2.0) * da1)
            do3, da3, dg3 = phi(o_val + (h / 2.0) * do2, a_val + (h / 2.0) * da2)
            do4, da4, dg4 = phi(o_val + h * do3, a_val + h * da3)
            o_val = o_val + (h / 6.0) * (do1 + 2.0 * do2 + 2.0 * do3 + do4)
            a_val = a_val + (h / 6.0) * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
            for n in DECODER_NAMES:
                g_dec[n] = g_dec[n] + (h / 6.0) * (dg1[n] + 2.0 * dg2[n] + 2.0 * dg3[n] + dg4[n])
    return o_val, a_val, g_dec


def adjoint_backward(params: dict[str, Array], inputs: list[Array], targets,
                     labels: list[Array], spec: SolverSpec) -> tuple[float, dict[str, Array]]:
    """Gradients of the normalized-error loss via the continuous adjoint.

    The decoder/head gradients come from integrating the augmented system
    (state, adjoint, parameter accumulator) backward in time, restarting the
    state from the stored forward value at each observation time; encoder
    gradients come from tape backprop through the encoder with the adjoint at
    t=0 as seed. Returns (loss value, gradients for all parameters).
    """
    targets = _check_targets(targets)
    if len(labels) != len(targets):
        raise ValidationError(f"{len(targets)} targets but {len(labels)} labels")

    # forward: encoder on its own tape (kept for the final backprop)
    enc_tape = Tape()
    evids = {n: enc_tape.leaf(params[n]) for n in ENCODER_NAMES}
    r0 = encode(enc_tape, evids, [enc_tape.const(m) for m in inputs])
    o0 = enc_tape.value(r0)

    # forward ODE pass (values only), remembering per-segment step sizes
    fwd_tape = Tape()
    dconst = {n: fwd_tape.const(params[n]) for n in DECODER_NAMES}
    o = fwd_tape.const(o0)
    seg_sizes: list[list[float]] = []
    states: list[Array] = []
    step_fn = _rk4_step if spec.scheme == "rk4" else _euler_step
    t_prev = 0.0
    for t in targets:
        sizes = _segment_sizes(float(t) - t_prev, spec.step_frames)
        for h in sizes:
            o = step_fn(fwd_tape, lambda tp, ov: decoder_field(tp, dconst, ov), o, h)
        seg_sizes.append(sizes)
        states.append(fwd_tape.value(o))
        t_prev = float(t)

    # head loss: one tape gives the loss value, head gradients, and the
    # adjoint jump at every observation time
    head_tape = Tape()
    hvids = {n: head_tape.leaf(params[n]) for n in HEAD_NAMES}
    state_vids = [head_tape.leaf(s) for s in states]
    preds = [pred_head(head_tape, hvids, sv) for sv in state_vids]
    loss_vid = _loss_terms(head_tape, preds, labels)
    head_grads = backward(head_tape, loss_vid, {*hvids.values(), *state_vids})
    loss_value = float(head_tape.value(loss_vid)[0, 0].real)
    jumps = [head_grads[sv] for sv in state_vids]

    # backward sweep over segments
    g_dec = {n: np.zeros_like(params[n]) for n in DECODER_NAMES}
    a_val = jumps[-1]
    o_val = states[-1]
    for i in range(len(targets) - 1, -1, -1):
        o_val, a_val, g_dec = _adjoint_segment(params, o_val, a_val, g_dec,
                                               seg_sizes[i], spec.scheme)
        if i > 0:
            a_val = a_val + jumps[i - 1]
            o_val = states[i - 1]

    enc_grads = backward(enc_tape, r0, set(evids.values()), seed=a_val)
    grads = {n: enc_grads[evids[n]] for n in ENCODER_NAMES}
    grads.update(g_dec)
    for n in HEAD_NAMES:
        grads[n] = head_grads[hvids[n]]
    return loss_value, grads


# ---------------------------------------------------------------------------
# complexity accounting

@dataclass(frozen=True)
class StageCount:
    counted: int      # instrumented complex multiplications
    formula: int      # leading-order analytic count

    @property
    def ratio(self) -> float:
        return self.counted / self.formula


@dataclass(frozen=True)
class FlopReport:
    encoder: StageCount
    decoder: StageCount
    head: StageCount
    field_evals: int     # G
    n_targets: int       # K*Q


def count_flops(cfg: SystemConfig, spec: SolverSpec | None = None) -> FlopReport:
    """Instrumented complex-multiplication counts per pipeline stage, next to
    the analytic leading-order formulas:

        encoder: J * F_l * M * (n_rf*n_rx + F_r)
        decoder: G * F_l * F_r * (F_l + F_r)     (G = field evaluations)
        head:    K*Q * n_rf*n_rx * F_r * (F_l + M) / ... exactly
                 K*Q * (n_rf*n_rx*F_l*F_r + n_rf*n_rx*F_r*M)
    """
    if spec is None:
        spec = default_solver(cfg)
    rng = np.random.default_rng(cfg.seed)
    params = init_model_params(cfg, rng)
    inputs = [ct.complex_normal(rng, cfg.eff_rows, cfg.n_subcarriers)
              for _ in range(cfg.history_frames)]
    targets = cfg.test_grid

    tape = Tape()
    p = {name: tape.const(v) for name, v in params.items()}
    input_vids = [tape.const(m) for m in inputs]

    with ct.counting() as enc_counter:
        r0 = encode(tape, p, input_vids)

    evals = [0]

    def counted_field(tp, o):
        evals[0] += 1
        return decoder_field(tp, p, o)

    with ct.counting() as dec_counter:
        states = ode_solve(tape, counted_field, r0, targets, spec)
    with ct.counting() as head_counter:
        for o in states:
            pred_head(tape, p, o)

    a, m = cfg.eff_rows, cfg.n_subcarriers
    fl, fr = cfg.feature_l, cfg.feature_r
    j, kq = cfg.history_frames, len(targets)
    g = evals[0]
    return FlopReport(
        encoder=StageCount(enc_counter.total, j * fl * m * (a + fr)),
        decoder=StageCount(dec_counter.total, g * fl * fr * (fl + fr)),
        head=StageCount(head_counter.total, kq * (a * fl * fr + a * fr * m)),
        field_evals=g,
        n_targets=kq,
    )


def head_float_count(n_rf: int, n_rx: int, m: int) -> int:
    """Real float count of the factored square head: 2*((n_rf*n_rx)^2 + M^2)."""
    return 2 * ((n_rf * n_rx) ** 2 + m ** 2)


def vanilla_head_float_count(n_rf: int, n_rx: int, m: int) -> int:
    """Real float count of the vectorized square head: 2*(n_rf*n_rx*M)^2."""
    return 2 * (n_rf * n_rx * m) ** 2


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, cfg: SystemConfig, params: dict[str, Array]) -> None:
    """Named-tensor container: magic, version, config echo, then tensors."""
    with open(path, "wb") as out:
        out.write(CHECKPOINT_MAGIC)
        out.write(struct.pack("<I", FORMAT_VERSION))
        out.write(_pack_config(cfg))
        out.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            tensor = params[name]
            raw = name.encode("utf-8")
            out.write(struct.pack("<H", len(raw)))
            out.write(raw)
            out.write(struct.pack("<B", 2))
            out.write(struct.pack("<II", *tensor.shape))
            interleaved = np.empty(2 * tensor.size, dtype=np.float64)
            interleaved[0::2] = tensor.real.ravel()
            interleaved[1::2] = tensor.imag.ravel()
            out.write(interleaved.tobytes())


def load_checkpoint(path) -> tuple[SystemConfig, dict[str, Array]]:
    with open(path, "rb") as src:
        if _read_exact(src, 4) != CHECKPOINT_MAGIC:
            raise DataFormatError(f"bad magic in {path}: not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(src, 4))
        if version != FORMAT_VERSION:
            raise DataFormatError(f"unsupported checkpoint version {version}")
        from .channelsim import _CONFIG_STRUCT
        cfg = _unpack_config(_read_exact(src, _CONFIG_STRUCT.size))
        (n_tensors,) = struct.unpack("<I", _read_exact(src, 4))
        params: dict[str, Array] = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<H", _read_exact(src, 2))
            name = _read_exact(src, name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(src, 1))
            if rank != 2:
                raise DataFormatError(f"tensor {name!r} has unsupported rank {rank}")
            rows, cols = struct.unpack("<II", _read_exact(src, 8))
            if rows < 1 or cols < 1 or rows * cols > 1 << 28:
                raise DataFormatError(f"implausible tensor shape {rows}x{cols}")
            flat = np.frombuffer(_read_exact(src, 16 * rows * cols), dtype=np.float64)
            tensor = np.empty((rows, cols), dtype=np.complex128)
            tensor.real = flat[0::2].reshape(rows, cols)
            tensor.imag = flat[1::2].reshape(rows, cols)
            params[name] = tensor
        if src.read(1):
            raise DataFormatError("trailing bytes after the last tensor")
    return cfg, params


def validate_model_params(cfg: SystemConfig, params: dict[str, Array]) -> None:
    """Check a loaded parameter set against the shapes the config implies."""
    expected = model_param_shapes(cfg)
    missing = sorted(set(expected) - set(params))
    if missing:
        raise ValidationError(f"checkpoint is missing tensors: {missing}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeError(f"tensor {name!r} has shape {params[name].shape}, expected {shape}")
