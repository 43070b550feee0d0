"""Loss, Adam optimization, and the batched training loop.

All architectures (the factored continuous-time model and the discrete
GRU / FC baselines) train through the same loop; an Arch adapter supplies
parameter initialization and a per-sample loss recorded on a tape. Gradient
accumulation is index-ordered, so results are identical for any thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ctmath as ct
from . import model as mdl
from .autodiff import Tape, backward
from .channelsim import Dataset, Sample, SystemConfig
from .errors import ShapeError, ValidationError

Array = np.ndarray

EARLY_STOP_WINDOW = 20       # epochs
EARLY_STOP_MIN_DELTA = 1e-4  # absolute, linear NMSE


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    gradient_path: str = "tape"   # 'tape' | 'adjoint'
    seed: int = 0
    checkpoint_every: int = 50

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.checkpoint_every < 1:
            raise ValidationError("epochs, batch_size and checkpoint_every must be positive")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValidationError("learning_rate and adam_eps must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValidationError("adam betas must lie in (0, 1)")
        if self.gradient_path not in ("tape", "adjoint"):
            raise ValidationError(f"unknown gradient path {self.gradient_path!r}")


# ---------------------------------------------------------------------------
# loss

def nmse_loss(tape: Tape, preds: list[int], labels: list[Array]) -> int:
    """Mean over labels of ||pred - label||^2 / ||label||^2, recorded on the tape."""
    if len(preds) != len(labels):
        raise ShapeError(f"{len(preds)} predictions vs {len(labels)} labels")
    if not preds:
        raise ValidationError("loss needs at least one prediction/label pair")
    for pv, lab in zip(preds, labels):
        if tape.value(pv).shape != lab.shape:
            raise ShapeError(f"prediction shape {tape.value(pv).shape} vs label {lab.shape}")
    return mdl._loss_terms(tape, preds, labels)


def nmse_value(preds: list[Array], labels: list[Array]) -> float:
    """Pure-value version of nmse_loss."""
    if len(preds) != len(labels):
        raise ShapeError(f"{len(preds)} predictions vs {len(labels)} labels")
    total = 0.0
    for p, lab in zip(preds, labels):
        den = ct.fro_norm_sq(lab)
        if den <= 0.0:
            raise ValidationError("degenerate label: zero Frobenius norm")
        total += ct.fro_norm_sq(ct.sub(p, lab)) / den
    return total / len(preds)


def nmse_db(linear: float) -> float:
    return 10.0 * np.log10(max(linear, 1e-20))


# ---------------------------------------------------------------------------
# Adam (per real component; moments stored as complex pairs)

class AdamState:
    def __init__(self, params: dict[str, Array]):
        self.m = {n: np.zeros_like(v) for n, v in params.items()}
        self.v = {n: np.zeros_like(v) for n, v in params.items()}
        self.t = 0


def adam_step(params: dict[str, Array], grads: dict[str, Array], state: AdamState,
              tcfg: TrainConfig) -> dict[str, Array]:
    """One bias-corrected Adam update applied independently to every real
    component; returns the new parameters (state is updated in place)."""
    if set(grads) != set(params):
        raise ShapeError("gradient keys do not match parameter keys")
    state.t += 1
    t = state.t
    b1, b2 = tcfg.adam_beta1, tcfg.adam_beta2
    lr, eps = tcfg.learning_rate, tcfg.adam_eps
    new_params = {}
    for name in sorted(params):
        g = grads[name]
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient shape {g.shape} vs parameter {params[name].shape}")
        m = state.m[name] = b1 * state.m[name] + (1 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1 - b2) * (g.real ** 2 + 1j * g.imag ** 2)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        update = m_hat.real / (np.sqrt(v_hat.real) + eps) \
            + 1j * (m_hat.imag / (np.sqrt(v_hat.imag) + eps))
        new_params[name] = params[name] - lr * update
    return new_params


# ---------------------------------------------------------------------------
# architecture adapters

class OdeArch:
    """The factored continuous-time model, trained at the sample's own label times."""

    name = "ode"

    def __init__(self, spec: mdl.SolverSpec):
        self.spec = spec

    def init(self, cfg: SystemConfig, rng: np.random.Generator) -> dict[str, Array]:
        return mdl.init_model_params(cfg, rng)

    def loss_on_tape(self, tape: Tape, p: dict[str, int], sample: Sample,
                     cfg: SystemConfig) -> int:
        inputs = [tape.const(m) for m in sample.inputs]
        preds = mdl.predict_on_tape(tape, p, inputs, sample.label_times, self.spec)
        return nmse_loss(tape, preds, sample.labels)

    def adjoint_loss_grads(self, params, sample: Sample, cfg: SystemConfig):
        return mdl.adjoint_backward(params, sample.inputs, sample.label_times,
                                    sample.labels, self.spec)


def snap_boundary_targets(sample: Sample, k_frames: int) -> dict[int, Array]:
    """For each future frame boundary k = 1..K, the stored label whose time is
    nearest to k (ties toward the earlier label). Discrete baselines train
    against these since they only ever predict at boundaries."""
    times = np.asarray(sample.label_times)
    out = {}
    for k in range(1, k_frames + 1):
        j = int(np.argmin(np.abs(times - k)))
        out[k] = sample.labels[j]
    return out


class GruArch:
    """Discrete one-frame-ahead GRU predictor (autoregressive rollout)."""

    name = "gru"

    def __init__(self, hidden: int | None = None):
        self.hidden = hidden

    def init(self, cfg: SystemConfig, rng: np.random.Generator) -> dict[str, Array]:
        return mdl.init_vanilla_params(cfg, rng, hidden=self.hidden, with_decoder=False)

    def loss_on_tape(self, tape: Tape, p: dict[str, int], sample: Sample,
                     cfg: SystemConfig) -> int:
        from .baselines import gru_rollout_on_tape
        inputs = [tape.const(ct.vec(m)) for m in sample.inputs]
        preds = gru_rollout_on_tape(tape, p, inputs, cfg.future_frames)
        targets = snap_boundary_targets(sample, cfg.future_frames)
        labels = [ct.vec(targets[k]) for k in range(1, cfg.future_frames + 1)]
        return nmse_loss(tape, preds, labels)


class FcArch:
    """Fully connected predictor: concatenated history to all K boundaries at once."""

    name = "fc"

    def __init__(self, width: int = 512):
        self.width = width

    def init(self, cfg: SystemConfig, rng: np.random.Generator) -> dict[str, Array]:
        from .baselines import init_fc_params
        return init_fc_params(cfg, rng, self.width)

    def loss_on_tape(self, tape: Tape, p: dict[str, int], sample: Sample,
                     cfg: SystemConfig) -> int:
        from .baselines import fc_forward_on_tape
        preds = fc_forward_on_tape(tape, p, sample, cfg)
        targets = snap_boundary_targets(sample, cfg.future_frames)
        labels = [ct.vec(targets[k]) for k in range(1, cfg.future_frames + 1)]
        return nmse_loss(tape, preds, labels)


# ---------------------------------------------------------------------------
# training loop

def sample_loss_grads(arch, params: dict[str, Array], sample: Sample,
                      cfg: SystemConfig, gradient_path: str) -> tuple[float, dict[str, Array]]:
    """Loss and named gradients for one sample via the configured path."""
    if gradient_path == "adjoint":
        if not hasattr(arch, "adjoint_loss_grads"):
            raise ValidationError(f"architecture {arch.name!r} has no adjoint gradient path")
        return arch.adjoint_loss_grads(params, sample, cfg)
    tape = Tape()
    p = {name: tape.leaf(v) for name, v in params.items()}
    loss_vid = arch.loss_on_tape(tape, p, sample, cfg)
    grads = backward(tape, loss_vid, set(p.values()))
    loss = float(tape.value(loss_vid)[0, 0].real)
    return loss, {name: grads[vid] for name, vid in p.items()}


@dataclass
class EpochRow:
    epoch: int
    mean_train_nmse_db: float
    wall_seconds: float


def train(arch, dataset: Dataset, tcfg: TrainConfig,
          checkpoint_path=None, threads: int = 1,
          log=None) -> tuple[dict[str, Array], list[EpochRow]]:
    """Minibatch Adam training until the epoch budget or early stop.

    Shuffling, batching, and gradient reduction are all derived
    deterministically from tcfg.seed; threads only parallelize the per-sample
    forward/backward passes inside a batch.
    """
    if dataset.mode != "train":
        raise ValidationError("training requires a train-mode dataset")
    cfg = dataset.config
    init_rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 0]))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 1]))
    params = arch.init(cfg, init_rng)
    state = AdamState(params)
    samples = dataset.samples
    n = len(samples)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def batch_grads(batch_idx):
        work = [samples[i] for i in batch_idx]
        if pool is not None:
            results = list(pool.map(
                lambda s: sample_loss_grads(arch, params, s, cfg, tcfg.gradient_path), work))
        else:
            results = [sample_loss_grads(arch, params, s, cfg, tcfg.gradient_path)
                       for s in work]
        total = {name: np.zeros_like(v) for name, v in params.items()}
        loss_sum = 0.0
        for loss, grads in results:   # fixed, index-ordered reduction
            loss_sum += loss
            for name in total:
                total[name] = total[name] + grads[name]
        inv = 1.0 / len(work)
        return loss_sum * inv, {name: g * inv for name, g in total.items()}

    trace: list[EpochRow] = []
    best = np.inf
    best_epoch = -1
    t0 = time.monotonic()
    try:
        for epoch in range(tcfg.epochs):
            order = shuffle_rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, tcfg.batch_size):
                batch_idx = order[start:start + tcfg.batch_size]
                loss, grads = batch_grads(batch_idx)
                epoch_loss += loss * len(batch_idx)
                params = adam_step(params, grads, state, tcfg)
            mean_loss = epoch_loss / n
            row = EpochRow(epoch, nmse_db(mean_loss), time.monotonic() - t0)
            trace.append(row)
            if log is not None:
                log(row)
            if checkpoint_path is not None and (epoch + 1) % tcfg.checkpoint_every == 0:
                mdl.save_checkpoint(checkpoint_path, cfg, params)
            if mean_loss < best - EARLY_STOP_MIN_DELTA:
                best = mean_loss
                best_epoch = epoch
            elif epoch - best_epoch >= EARLY_STOP_WINDOW:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    if checkpoint_path is not None:
        mdl.save_checkpoint(checkpoint_path, cfg, params)
    return params, trace


def write_trace_csv(path, trace: list[EpochRow]) -> None:
    with open(path, "w", encoding="utf-8") as out:
        out.write("epoch,mean_train_nmse_db,wall_seconds\n")
        for row in trace:
            out.write(f"{row.epoch},{row.mean_train_nmse_db:.6f},{row.wall_seconds:.3f}\n")
