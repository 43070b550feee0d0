"""Per-slot NMSE, zero-forcing precoding, achievable rate, and report emission.

Every method is evaluated on the identical test dataset (enforced by a
content-hash comparison) over the fixed slot grid i/Q, i = 1..K*Q. NMSE
averaging order is fixed: the per-(sample, slot) ratio sums over subcarriers
first, then the sample mean is taken, then converted to dB.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ctmath as ct
from .channelsim import Dataset, Sample, dataset_bytes, noise_power
from .errors import NumericError, ShapeError, ValidationError

Array = np.ndarray

NMSE_FLOOR_DB = -200.0
ZF_COND_CAP = 1e10
ZF_IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class SlotReport:
    method: str
    slot_index: int        # 1..K*Q
    time_frames: float
    nmse_db: float
    rate_bps_hz: float
    n_samples: int
    n_excluded: int        # samples dropped from the rate average at this slot


@dataclass(frozen=True)
class MethodSpec:
    """A per-sample slot predictor plus the dataset hash it was built for."""
    predict: Callable[[Sample], list[Array]]
    expected_hash: str | None = None


def dataset_hash(ds: Dataset) -> str:
    return hashlib.sha256(dataset_bytes(ds)).hexdigest()


# ---------------------------------------------------------------------------
# NMSE

def nmse_per_slot(preds_by_sample: list[list[Array]],
                  labels_by_sample: list[list[Array]]) -> Array:
    """Per-slot NMSE in dB, floored at -200 dB for exact predictions."""
    if len(preds_by_sample) != len(labels_by_sample):
        raise ShapeError("sample counts differ between predictions and labels")
    n_slots = len(labels_by_sample[0])
    ratios = np.empty((len(labels_by_sample), n_slots))
    for s, (preds, labels) in enumerate(zip(preds_by_sample, labels_by_sample)):
        if len(preds) != n_slots or len(labels) != n_slots:
            raise ShapeError(f"sample {s}: expected {n_slots} slots")
        for i, (p, lab) in enumerate(zip(preds, labels)):
            if p.shape != lab.shape:
                raise ShapeError(f"slot {i}: prediction {p.shape} vs label {lab.shape}")
            ratios[s, i] = ct.fro_norm_sq(ct.sub(p, lab)) / ct.fro_norm_sq(lab)
    mean = ratios.mean(axis=0)
    return 10.0 * np.log10(np.maximum(mean, 10.0 ** (NMSE_FLOOR_DB / 10.0)))


# ---------------------------------------------------------------------------
# precoding and rate

def zf_precoder(h_hat: Array, cond_cap: float = ZF_COND_CAP) -> Array:
    """Zero-forcing left pseudo-inverse D = (H^H H)^-1 H^H, with D @ H = I
    verified to 1e-9. Raises NumericError for ill-conditioned channels."""
    gram = ct.cmatmul(ct.conj_transpose(h_hat), h_hat)
    d = ct.solve_hermitian(gram, ct.conj_transpose(h_hat), cond_cap=cond_cap)
    residual = np.sqrt(ct.fro_norm_sq(ct.sub(ct.cmatmul(d, h_hat), ct.ceye(h_hat.shape[1]))))
    if residual > ZF_IDENTITY_TOL * np.sqrt(h_hat.shape[1]):
        raise NumericError(f"zero-forcing identity residual {residual:.3e}")
    return d


def achievable_rate(d: Array, h_true: Array, sigma2: float) -> float:
    """Single-subcarrier rate log2|I + (1/(n_rx sigma^2)) D H H^H D^H| in bps/Hz."""
    if sigma2 <= 0:
        raise ValidationError("sigma2 must be positive")
    n_rx = d.shape[0]
    if h_true.shape[1] != n_rx or h_true.shape[0] != d.shape[1]:
        raise ShapeError(f"precoder {d.shape} incompatible with channel {h_true.shape}")
    dh = ct.cmatmul(d, h_true)
    m = ct.ceye(n_rx) + (1.0 / (n_rx * sigma2)) * (dh @ dh.conj().T)
    sign, logdet = np.linalg.slogdet(m)
    if sign.real <= 0:
        raise NumericError("rate argument is not positive definite")
    return float(logdet / np.log(2.0))


def rate_over_subcarriers(pred: Array, label: Array, n_rf: int, n_rx: int,
                          sigma2: float) -> float:
    """Mean rate over subcarriers with ZF built from the predicted channel and
    evaluated on the true one. Raises NumericError if any subcarrier's
    predicted channel is too ill-conditioned to invert."""
    n_sub = pred.shape[1]
    total = 0.0
    for m in range(n_sub):
        h_pred = ct.unvec(pred[:, m:m + 1], n_rf, n_rx)
        h_true = ct.unvec(label[:, m:m + 1], n_rf, n_rx)
        total += achievable_rate(zf_precoder(h_pred), h_true, sigma2)
    return total / n_sub


# ---------------------------------------------------------------------------
# full evaluation

def evaluate_methods(methods: dict[str, MethodSpec], ds: Dataset,
                     sigma2: float | None = None) -> list[SlotReport]:
    """Per-slot NMSE and achievable-rate report for every method.

    Samples whose ZF precoder fails at a slot are excluded from that slot's
    rate average (counted per report row); NMSE always uses all samples.
    """
    if ds.mode != "test":
        raise ValidationError("evaluation requires a test-mode dataset")
    cfg = ds.config
    if sigma2 is None:
        sigma2 = noise_power(ds.e_avg, cfg.snr_db)
    actual_hash = dataset_hash(ds)
    grid = cfg.test_grid
    n_slots = len(grid)
    labels_by_sample = [s.labels for s in ds.samples]

    rows: list[SlotReport] = []
    for name, spec in methods.items():
        if spec.expected_hash is not None and spec.expected_hash != actual_hash:
            raise ValidationError(
                f"method {name!r} was prepared for dataset {spec.expected_hash[:12]}..., "
                f"but evaluation data hashes to {actual_hash[:12]}...")
        preds_by_sample = [spec.predict(s) for s in ds.samples]
        nmse = nmse_per_slot(preds_by_sample, labels_by_sample)
        for i in range(n_slots):
            rate_sum = 0.0
            excluded = 0
            for s, sample in enumerate(ds.samples):
                try:
                    rate_sum += rate_over_subcarriers(
                        preds_by_sample[s][i], sample.labels[i],
                        cfg.n_rf, cfg.n_rx, sigma2)
                except NumericError:
                    excluded += 1
            used = len(ds.samples) - excluded
            if excluded:
                warnings.warn(f"method {name!r} slot {i + 1}: excluded {excluded} "
                              f"ill-conditioned samples from the rate average")
            rows.append(SlotReport(
                method=name, slot_index=i + 1, time_frames=float(grid[i]),
                nmse_db=float(nmse[i]),
                rate_bps_hz=rate_sum / used if used else 0.0,
                n_samples=used, n_excluded=excluded))
    return rows


def write_report_csv(path, rows: list[SlotReport], metadata: dict[str, str]) -> None:
    """Report CSV with '# key = value' metadata header lines."""
    with open(path, "w", encoding="utf-8") as out:
        for key in sorted(metadata):
            out.write(f"# {key} = {metadata[key]}\n")
        out.write("method,slot_index,time_frames,nmse_db,rate_bps_hz,n_samples,n_excluded\n")
        for r in rows:
            out.write(f"{r.method},{r.slot_index},{r.time_frames:.6f},{r.nmse_db:.6f},"
                      f"{r.rate_bps_hz:.6f},{r.n_samples},{r.n_excluded}\n")
