"""Time-varying mmWave channel simulator and dataset store.

Generates geometric multipath channels, applies the frame/slot timing and
DFT-codebook combining, performs noisy least-squares estimation at frame
boundaries, and serializes (history, label-times, labels) samples.

Time convention: the model-facing unit is frames (t = 1 means one frame
duration); physical seconds appear only inside channel_at.
"""

from __future__ import annotations

import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import ctmath as ct
from .errors import DataFormatError, NumericError, ValidationError

Array = np.ndarray

SPEED_OF_LIGHT = 2.99792458e8  # m/s

DATASET_MAGIC = b"CTCP"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SystemConfig:
    """All physical and model hyperparameters in one validated record."""

    n_tx: int = 32                  # base-station antennas
    n_rx: int = 2                   # user antennas
    n_rf: int = 4                   # RF chains (combined output rows)
    carrier_hz: float = 28e9
    bandwidth_hz: float = 100e6
    n_subcarriers: int = 16
    snr_db: float = 10.0
    frame_s: float = 0.625e-3
    slot_s: float = 0.125e-3
    slots_per_frame: int = 5
    history_frames: int = 10        # J
    future_frames: int = 2          # K
    label_samples: int = 5          # P, training labels per sample
    n_paths: int = 6
    velocity_range_kmh: tuple[float, float] = (30.0, 60.0)
    delay_spread_range_ns: tuple[float, float] = (50.0, 200.0)
    feature_l: int = 16
    feature_r: int = 32
    seed: int = 0

    def __post_init__(self):
        counts = {
            "n_tx": self.n_tx, "n_rx": self.n_rx, "n_rf": self.n_rf,
            "n_subcarriers": self.n_subcarriers, "slots_per_frame": self.slots_per_frame,
            "history_frames": self.history_frames, "future_frames": self.future_frames,
            "label_samples": self.label_samples, "n_paths": self.n_paths,
            "feature_l": self.feature_l, "feature_r": self.feature_r,
        }
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        if self.n_rf > self.n_tx:
            raise ValidationError(f"n_rf ({self.n_rf}) cannot exceed n_tx ({self.n_tx})")
        for name in ("carrier_hz", "bandwidth_hz", "frame_s", "slot_s"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if abs(self.frame_s - self.slots_per_frame * self.slot_s) > 1e-12 * self.frame_s:
            raise ValidationError(
                f"frame_s ({self.frame_s}) must equal slots_per_frame*slot_s "
                f"({self.slots_per_frame * self.slot_s})")
        for name in ("velocity_range_kmh", "delay_spread_range_ns"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValidationError(f"{name} must be an ordered nonnegative range, got ({lo}, {hi})")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")

    @property
    def eff_rows(self) -> int:
        """Rows of the combined (effective) channel: n_rf * n_rx."""
        return self.n_rf * self.n_rx

    @property
    def test_grid(self) -> Array:
        """Evaluation label times: i / Q frames for i = 1..K*Q."""
        kq = self.future_frames * self.slots_per_frame
        return np.arange(1, kq + 1, dtype=np.float64) / self.slots_per_frame


def desk_config(**overrides) -> SystemConfig:
    """The small configuration used throughout the test and acceptance suites."""
    return replace(SystemConfig(), **overrides) if overrides else SystemConfig()


# ---------------------------------------------------------------------------
# multipath model

@dataclass(frozen=True)
class PathSet:
    """Per-sample multipath parameters defining the channel analytically."""

    gains: Array        # complex, shape (L,)
    doppler_hz: Array   # shape (L,)
    delay_s: Array      # shape (L,)
    aod_rad: Array      # shape (L,)
    aoa_rad: Array      # shape (L,)

    def __post_init__(self):
        L = self.gains.shape[0]
        if L < 1:
            raise ValidationError("a PathSet needs at least one path")
        for name in ("doppler_hz", "delay_s", "aod_rad", "aoa_rad"):
            if getattr(self, name).shape != (L,):
                raise ValidationError(f"PathSet field {name} must have shape ({L},)")
        if np.any(self.delay_s < 0):
            raise ValidationError("path delays must be nonnegative")
        if np.any(np.abs(self.aod_rad) >= np.pi / 2) or np.any(np.abs(self.aoa_rad) >= np.pi / 2):
            raise ValidationError("path angles must lie in (-pi/2, pi/2)")


def steering_vector(n_ant: int, angle_rad: float) -> Array:
    """Half-wavelength ULA steering vector, unit norm: entries
    exp(-j*pi*sin(angle)*k) / sqrt(n_ant) for k = 0..n_ant-1."""
    if n_ant < 1:
        raise ValidationError("n_ant must be at least 1")
    return _steering_matrix(n_ant, np.array([angle_rad]))


def _steering_matrix(n_ant: int, angles: Array) -> Array:
    k = np.arange(n_ant, dtype=np.float64)[:, None]
    return np.exp(-1j * np.pi * np.sin(angles)[None, :] * k) / np.sqrt(n_ant)


def sample_paths(cfg: SystemConfig, rng: np.random.Generator) -> PathSet:
    """Draw one multipath realization.

    User speed ~ U(velocity range); per path: Doppler v = (f*u/c)*cos(psi)
    with psi ~ U(0, 2pi), delay ~ U(0, DS) with DS ~ U(delay-spread range),
    departure/arrival angles ~ U(-pi/2, pi/2), gain ~ CN(0, 1/L).
    """
    L = cfg.n_paths
    lo_v, hi_v = cfg.velocity_range_kmh
    speed = rng.uniform(lo_v, hi_v) / 3.6  # m/s
    v_max = cfg.carrier_hz * speed / SPEED_OF_LIGHT
    psi = rng.uniform(0.0, 2.0 * np.pi, size=L)
    doppler = v_max * np.cos(psi)
    lo_d, hi_d = cfg.delay_spread_range_ns
    spread = rng.uniform(lo_d, hi_d) * 1e-9
    delays = rng.uniform(0.0, spread, size=L)
    aod = rng.uniform(-np.pi / 2, np.pi / 2, size=L)
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, size=L)
    gains = ct.complex_normal(rng, L, 1, var=1.0 / L)[:, 0]
    return PathSet(gains, doppler, delays, aod, aoa)


def subcarrier_hz(cfg: SystemConfig, m: int) -> float:
    """Frequency of subcarrier m (1-based): f + (B/2)*(m - M/2)."""
    return cfg.carrier_hz + (cfg.bandwidth_hz / 2.0) * (m - cfg.n_subcarriers / 2.0)


def channel_at(paths: PathSet, cfg: SystemConfig, t_s: float, m: int) -> Array:
    """Physical channel (n_tx x n_rx) at time t_s seconds on subcarrier m:
    sum_l gain_l * exp(-j*2pi*(v_l*t + f_m*tau_l)) * a_T(aod_l) a_R(aoa_l)^H."""
    if not 1 <= m <= cfg.n_subcarriers:
        raise ValidationError(f"subcarrier index {m} outside 1..{cfg.n_subcarriers}")
    fm = subcarrier_hz(cfg, m)
    rotation = np.exp(-2j * np.pi * (paths.doppler_hz * t_s + fm * paths.delay_s))
    a_t = _steering_matrix(cfg.n_tx, paths.aod_rad)
    a_r = _steering_matrix(cfg.n_rx, paths.aoa_rad)
    return (a_t * (paths.gains * rotation)[None, :]) @ a_r.conj().T


def dft_codebook(n: int) -> Array:
    """Unitary n-point DFT matrix; columns are the unit-norm beam codewords."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def select_combiner(paths: PathSet, cfg: SystemConfig) -> Array:
    """Analog combiner (n_rf x n_tx): conjugate-transposed DFT codewords with
    the largest received energy on the noise-free t=0 channel, summed over
    subcarriers. Ties break toward the lower codeword index. Fixed per sample."""
    codebook = dft_codebook(cfg.n_tx)
    energy = np.zeros(cfg.n_tx)
    for m in range(1, cfg.n_subcarriers + 1):
        proj = codebook.conj().T @ channel_at(paths, cfg, 0.0, m)
        energy += np.sum(proj.real ** 2 + proj.imag ** 2, axis=1)
    order = sorted(range(cfg.n_tx), key=lambda c: (-energy[c], c))[: cfg.n_rf]
    return codebook[:, order].conj().T


def effective_channel(paths: PathSet, combiner: Array, cfg: SystemConfig, t_frames: float) -> Array:
    """Noise-free combined channel at t (frames), stacked over subcarriers:
    column m is vec(combiner @ H_m), giving an (n_rf*n_rx x M) matrix."""
    t_s = t_frames * cfg.frame_s
    cols = [ct.vec(combiner @ channel_at(paths, cfg, t_s, m))
            for m in range(1, cfg.n_subcarriers + 1)]
    return np.hstack(cols)


# ---------------------------------------------------------------------------
# estimation and noise

def ls_estimate(y: Array, pilot: Array) -> Array:
    """Least-squares channel estimate from Y = H S + N:  H_hat = Y S^H (S S^H)^-1.

    pilot is (n_rx x n_q) with n_q >= n_rx and full row rank; with a scaled
    unitary pilot the estimate passes the noise through unchanged.
    """
    if y.shape[1] != pilot.shape[1]:
        raise ValidationError(f"received block {y.shape} incompatible with pilot {pilot.shape}")
    if pilot.shape[1] < pilot.shape[0]:
        raise NumericError(f"pilot {pilot.shape} cannot have full row rank")
    gram = pilot @ pilot.conj().T
    try:
        x = ct.solve_hermitian(gram, pilot @ y.conj().T)
    except NumericError as exc:
        raise NumericError(f"rank-deficient pilot: {exc}") from exc
    return x.conj().T


def noise_power(e_avg: float, snr_db: float) -> float:
    """Per-entry noise variance for a given mean per-entry signal power."""
    return e_avg * 10.0 ** (-snr_db / 10.0)


def add_noise(signal: Array, snr_db: float, rng: np.random.Generator, e_avg: float) -> Array:
    """Add i.i.d. CN(0, sigma^2) noise, sigma^2 = e_avg / 10^(snr/10).

    e_avg is the dataset-level mean per-entry signal power (recorded in the
    dataset header), not the power of this particular matrix.
    """
    sigma2 = noise_power(e_avg, snr_db)
    if sigma2 == 0.0:
        return signal.copy()
    return signal + ct.complex_normal(rng, signal.shape[0], signal.shape[1], var=sigma2)


# ---------------------------------------------------------------------------
# samples and datasets

@dataclass
class Sample:
    """One (history, label-times, labels) triple.

    inputs: J noisy effective channels at frames -J+1..0 (oldest first).
    labels: noise-free effective channels at label_times (frames, in (0, K]).
    paths is kept for in-memory diagnostics only and is not serialized.
    """

    inputs: list[Array]
    label_times: Array
    labels: list[Array]
    paths: PathSet | None = None


@dataclass
class Dataset:
    config: SystemConfig
    e_avg: float
    samples: list[Sample]
    mode: str = "train"   # 'train' | 'test'; inferred from label times on load


def _sample_rng(seed: int, index: int, stream: int) -> np.random.Generator:
    # independent per-sample sub-streams so parallel == serial generation
    return np.random.default_rng(np.random.SeedSequence([seed, index, stream]))


def _build_clean_sample(cfg: SystemConfig, mode: str, seed: int, index: int) -> Sample:
    paths = sample_paths(cfg, _sample_rng(seed, index, 0))
    combiner = select_combiner(paths, cfg)
    inputs = [effective_channel(paths, combiner, cfg, float(n))
              for n in range(-cfg.history_frames + 1, 1)]
    if mode == "train":
        label_rng = _sample_rng(seed, index, 2)
        k = float(cfg.future_frames)
        times = np.sort(k - label_rng.uniform(0.0, k, size=cfg.label_samples))
    else:
        times = cfg.test_grid
    labels = [effective_channel(paths, combiner, cfg, float(t)) for t in times]
    return Sample(inputs, times, labels, paths)


def generate_dataset(cfg: SystemConfig, n_samples: int, mode: str,
                     seed: int | None = None, threads: int = 1) -> Dataset:
    """Generate a dataset of independent channel samples.

    Inputs are noise-free effective channels at frame boundaries plus LS noise
    (identity pilot, so the estimate is signal plus noise); labels are
    noise-free. Train mode draws P label times uniformly from (0, K]; test
    mode uses the fixed grid i/Q, i = 1..K*Q. Generation is deterministic in
    (cfg, seed) regardless of thread count.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be at least 1")
    if mode not in ("train", "test"):
        raise ValidationError(f"mode must be 'train' or 'test', got {mode!r}")
    if seed is None:
        seed = cfg.seed

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(
                lambda i: _build_clean_sample(cfg, mode, seed, i), range(n_samples)))
    else:
        samples = [_build_clean_sample(cfg, mode, seed, i) for i in range(n_samples)]

    total_power = sum(ct.fro_norm_sq(m) for s in samples for m in s.inputs)
    n_entries = n_samples * cfg.history_frames * cfg.eff_rows * cfg.n_subcarriers
    e_avg = total_power / n_entries

    for i, s in enumerate(samples):
        noise_rng = _sample_rng(seed, i, 1)
        s.inputs = [add_noise(m, cfg.snr_db, noise_rng, e_avg) for m in s.inputs]
    return Dataset(cfg, e_avg, samples, mode)


# ---------------------------------------------------------------------------
# binary serialization (little-endian)

_CONFIG_STRUCT = struct.Struct("<IIIdddIdddIIIIIddddIIQ")
# n_tx n_rx n_rf | carrier bandwidth | M | snr frame slot | Q J K P L |
# vel_lo vel_hi ds_lo ds_hi | F_l F_r | seed
# (field order below is authoritative)


def _pack_config(cfg: SystemConfig) -> bytes:
    return _CONFIG_STRUCT.pack(
        cfg.n_tx, cfg.n_rx, cfg.n_rf,
        cfg.carrier_hz, cfg.bandwidth_hz, cfg.n_subcarriers,
        cfg.snr_db, cfg.frame_s, cfg.slot_s,
        cfg.slots_per_frame, cfg.history_frames, cfg.future_frames,
        cfg.label_samples, cfg.n_paths,
        cfg.velocity_range_kmh[0], cfg.velocity_range_kmh[1],
        cfg.delay_spread_range_ns[0], cfg.delay_spread_range_ns[1],
        cfg.feature_l, cfg.feature_r, cfg.seed)


def _unpack_config(raw: bytes) -> SystemConfig:
    f = _CONFIG_STRUCT.unpack(raw)
    try:
        return SystemConfig(
            n_tx=f[0], n_rx=f[1], n_rf=f[2], carrier_hz=f[3], bandwidth_hz=f[4],
            n_subcarriers=f[5], snr_db=f[6], frame_s=f[7], slot_s=f[8],
            slots_per_frame=f[9], history_frames=f[10], future_frames=f[11],
            label_samples=f[12], n_paths=f[13],
            velocity_range_kmh=(f[14], f[15]), delay_spread_range_ns=(f[16], f[17]),
            feature_l=f[18], feature_r=f[19], seed=f[20])
    except ValidationError as exc:
        raise DataFormatError(f"invalid config block: {exc}") from exc


def _write_matrix(out, a: Array) -> None:
    rows, cols = a.shape
    out.write(struct.pack("<II", rows, cols))
    interleaved = np.empty(2 * rows * cols, dtype=np.float64)
    interleaved[0::2] = a.real.ravel()
    interleaved[1::2] = a.imag.ravel()
    out.write(interleaved.tobytes())


def _read_exact(src, n: int) -> bytes:
    raw = src.read(n)
    if len(raw) != n:
        raise DataFormatError(f"truncated file: wanted {n} bytes, got {len(raw)}")
    return raw


def _read_matrix(src) -> Array:
    rows, cols = struct.unpack("<II", _read_exact(src, 8))
    if rows < 1 or cols < 1 or rows * cols > 1 << 28:
        raise DataFormatError(f"implausible matrix header {rows}x{cols}")
    raw = _read_exact(src, 16 * rows * cols)
    flat = np.frombuffer(raw, dtype=np.float64)
    a = np.empty((rows, cols), dtype=np.complex128)
    a.real = flat[0::2].reshape(rows, cols)
    a.imag = flat[1::2].reshape(rows, cols)
    return a


def _write_dataset(out, ds: Dataset) -> None:
    cfg = ds.config
    out.write(DATASET_MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(_pack_config(cfg))
    out.write(struct.pack("<d", ds.e_avg))
    out.write(struct.pack("<Q", len(ds.samples)))
    for s in ds.samples:
        for m in s.inputs:
            _write_matrix(out, m)
        out.write(struct.pack("<I", len(s.label_times)))
        out.write(np.asarray(s.label_times, dtype=np.float64).tobytes())
        for m in s.labels:
            _write_matrix(out, m)


def dataset_bytes(ds: Dataset) -> bytes:
    """Serialized form of a dataset (what save_dataset writes)."""
    buf = io.BytesIO()
    _write_dataset(buf, ds)
    return buf.getvalue()


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "wb") as out:
        _write_dataset(out, ds)


def _infer_mode(samples: list[Sample], cfg: SystemConfig) -> str:
    grid = cfg.test_grid
    for s in samples:
        if len(s.label_times) != len(grid) or np.max(np.abs(s.label_times - grid)) > 1e-12:
            return "train"
    return "test"


def load_dataset(path) -> Dataset:
    """Load a dataset file; raises DataFormatError on any inconsistency."""
    with open(path, "rb") as src:
        if _read_exact(src, 4) != DATASET_MAGIC:
            raise DataFormatError(f"bad magic in {path}: not a dataset file")
        (version,) = struct.unpack("<I", _read_exact(src, 4))
        if version != FORMAT_VERSION:
            raise DataFormatError(f"unsupported dataset version {version}")
        cfg = _unpack_config(_read_exact(src, _CONFIG_STRUCT.size))
        (e_avg,) = struct.unpack("<d", _read_exact(src, 8))
        (n_samples,) = struct.unpack("<Q", _read_exact(src, 8))
        if n_samples < 1 or n_samples > 1 << 32:
            raise DataFormatError(f"implausible sample count {n_samples}")
        k = float(cfg.future_frames)
        samples = []
        for _ in range(n_samples):
            inputs = [_read_matrix(src) for _ in range(cfg.history_frames)]
            (n_labels,) = struct.unpack("<I", _read_exact(src, 4))
            if n_labels < 1:
                raise DataFormatError("sample with no labels")
            times = np.frombuffer(_read_exact(src, 8 * n_labels), dtype=np.float64).copy()
            labels = [_read_matrix(src) for _ in range(n_labels)]
            for m in inputs + labels:
                if m.shape != (cfg.eff_rows, cfg.n_subcarriers):
                    raise DataFormatError(
                        f"matrix shape {m.shape} disagrees with config "
                        f"({cfg.eff_rows}, {cfg.n_subcarriers})")
            if np.any(times <= 0) or np.any(times > k + 1e-9) or np.any(np.diff(times) < 0):
                raise DataFormatError("label times must be sorted and lie in (0, K]")
            samples.append(Sample(inputs, times, labels, paths=None))
        if src.read(1):
            raise DataFormatError("trailing bytes after the last sample")
    return Dataset(cfg, e_avg, samples, _infer_mode(samples, cfg))


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    """Bit-exact equality of the serialized content (paths are diagnostics
    only and do not participate)."""
    return dataset_bytes(a) == dataset_bytes(b)
