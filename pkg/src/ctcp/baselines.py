"""Discrete-prediction baselines: frame-boundary predictors plus linear
intra-frame interpolation, and the no-prediction (outdated CSI) reference.

A DiscretePrediction holds K+1 frame-boundary channels; entry 0 is the last
observed (noisy) estimate, entries 1..K are predictions. Slots between
boundaries are recovered by the convex combination
    H(k, q) = (1 - q/Q) * H(k, 0) + (q/Q) * H(k+1, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ctmath as ct
from .autodiff import Tape
from .channelsim import Sample, SystemConfig
from .errors import ValidationError
from .model import vanilla_cell, vanilla_encode

Array = np.ndarray


@dataclass
class DiscretePrediction:
    boundaries: list[Array]   # K+1 matrices (eff_rows x M); index 0 observed
    q_per_frame: int

    @property
    def k_frames(self) -> int:
        return len(self.boundaries) - 1


def interpolate(dp: DiscretePrediction, k: int, q: int) -> Array:
    """Channel at slot q of future frame k: the stated convex combination.
    q = 0 returns boundary k exactly; q = Q returns boundary k+1 exactly."""
    if not 0 <= k <= dp.k_frames - 1:
        raise ValidationError(f"frame index {k} outside 0..{dp.k_frames - 1}")
    if not 0 <= q <= dp.q_per_frame:
        raise ValidationError(f"slot index {q} outside 0..{dp.q_per_frame}")
    w = q / dp.q_per_frame
    return (1.0 - w) * dp.boundaries[k] + w * dp.boundaries[k + 1]


def slot_series(dp: DiscretePrediction) -> list[Array]:
    """Interpolated channels at slots i = 1..K*Q (i = k*Q + q)."""
    out = []
    for i in range(1, dp.k_frames * dp.q_per_frame + 1):
        k, q = divmod(i, dp.q_per_frame)
        if q == 0:
            out.append(dp.boundaries[k])
        else:
            out.append(interpolate(dp, k, q))
    return out


def outdated_csi(inputs: list[Array]):
    """Predictor that returns the last observed estimate for every future slot."""
    last = inputs[-1]

    def predictor(targets) -> list[Array]:
        return [last for _ in targets]

    return predictor


# ---------------------------------------------------------------------------
# GRU discrete predictor

def gru_rollout_on_tape(tape: Tape, p: dict[str, int], input_vecs: list[int],
                        k_frames: int) -> list[int]:
    """Encode the history, then autoregressively emit K boundary predictions,
    feeding each prediction back as the next input."""
    r = vanilla_encode(tape, p, input_vecs)
    preds = []
    for k in range(k_frames):
        pred = tape.matmul(p["van_W_h"], r)
        preds.append(pred)
        if k < k_frames - 1:
            r = vanilla_cell(tape, p, pred, r)
    return preds


def gru_discrete_predict(vparams: dict[str, Array], inputs: list[Array],
                         cfg: SystemConfig) -> DiscretePrediction:
    tape = Tape()
    p = {name: tape.const(v) for name, v in vparams.items()}
    input_vids = [tape.const(ct.vec(m)) for m in inputs]
    preds = gru_rollout_on_tape(tape, p, input_vids, cfg.future_frames)
    boundaries = [inputs[-1]] + [ct.unvec(tape.value(v), cfg.eff_rows, cfg.n_subcarriers)
                                 for v in preds]
    return DiscretePrediction(boundaries, cfg.slots_per_frame)


# ---------------------------------------------------------------------------
# FC discrete predictor

def fc_param_shapes(cfg: SystemConfig, width: int) -> dict[str, tuple[int, int]]:
    d_in = cfg.eff_rows * cfg.n_subcarriers
    shapes = {
        "fc_W1": (width, cfg.history_frames * d_in),
        "fc_W2": (width, width),
    }
    # one output block per future frame keeps every op a plain matmul
    for k in range(1, cfg.future_frames + 1):
        shapes[f"fc_W3_{k}"] = (d_in, width)
    return shapes


def init_fc_params(cfg: SystemConfig, rng: np.random.Generator, width: int) -> dict[str, Array]:
    params = {}
    for name, shape in fc_param_shapes(cfg, width).items():
        var = 1.0 / shape[1]
        if name.startswith("fc_W3"):
            var *= 0.25
        params[name] = ct.complex_normal(rng, shape[0], shape[1], var)
    return params


def fc_forward_on_tape(tape: Tape, p: dict[str, int], sample: Sample,
                       cfg: SystemConfig) -> list[int]:
    """Two hidden layers with split-tanh activations, linear output blocks."""
    stacked = np.vstack([ct.vec(m) for m in sample.inputs])
    x = tape.const(stacked)
    h1 = tape.tanh(tape.matmul(p["fc_W1"], x))
    h2 = tape.tanh(tape.matmul(p["fc_W2"], h1))
    return [tape.matmul(p[f"fc_W3_{k}"], h2) for k in range(1, cfg.future_frames + 1)]


def fc_forward(fcparams: dict[str, Array], sample: Sample, cfg: SystemConfig) -> Array:
    """Raw network output as a (K x eff_rows*M) array of vectorized predictions."""
    tape = Tape()
    p = {name: tape.const(v) for name, v in fcparams.items()}
    preds = fc_forward_on_tape(tape, p, sample, cfg)
    return np.vstack([tape.value(v).T for v in preds])


def fc_discrete_predict(fcparams: dict[str, Array], sample: Sample,
                        cfg: SystemConfig) -> DiscretePrediction:
    tape = Tape()
    p = {name: tape.const(v) for name, v in fcparams.items()}
    preds = fc_forward_on_tape(tape, p, sample, cfg)
    boundaries = [sample.inputs[-1]] + [
        ct.unvec(tape.value(v), cfg.eff_rows, cfg.n_subcarriers) for v in preds]
    return DiscretePrediction(boundaries, cfg.slots_per_frame)
