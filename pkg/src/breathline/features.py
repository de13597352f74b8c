"""Framewise acoustic features: mel spectrogram (dB), ZCR, and RMSE (dB).

Frames are taken every `hop_ms` over the whole signal; frame t covers
samples [t*hop, t*hop + window) and the tail is zero-padded, so the
frame count depends only on duration and hop (`floor(n / hop)`). All
math runs in float64; the stored matrix is float32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .errors import ConfigError, FormatError

FEATURES_MAGIC = b"BLFT"
FEATURES_VERSION = 1

# dB floors: -100 dB for both the mel power spectrogram and the RMSE track
POWER_EPS = 1e-10
AMP_EPS = 1e-5


@dataclass(frozen=True)
class FeatureConfig:
    window_ms: float = 20.0
    hop_ms: float = 2.5
    n_mels: int = 128

    def __post_init__(self):
        if self.window_ms <= 0 or self.hop_ms <= 0:
            raise ConfigError("window_ms and hop_ms must be positive")
        if self.hop_ms > self.window_ms:
            raise ConfigError("hop_ms must not exceed window_ms")
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")

    @property
    def dim(self) -> int:
        """Feature vector length: mel buckets plus ZCR plus RMSE."""
        return self.n_mels + 2

    def window_samples(self, sample_rate: int) -> int:
        return _exact_samples(self.window_ms, sample_rate, "window_ms")

    def hop_samples(self, sample_rate: int) -> int:
        return _exact_samples(self.hop_ms, sample_rate, "hop_ms")


def _exact_samples(ms: float, sample_rate: int, what: str) -> int:
    exact = ms * sample_rate / 1000.0
    samples = int(round(exact))
    if samples < 1 or abs(exact - samples) > 1e-6:
        raise ConfigError(f"{what}={ms} is not a whole number of samples at {sample_rate} Hz")
    return samples


@dataclass
class FeatureMatrix:
    """(num_frames, n_mels + 2) float32 matrix; columns are mel dB bands
    in order, then ZCR, then RMSE dB."""

    data: np.ndarray
    config: FeatureConfig
    sample_rate: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[1] != self.config.dim:
            raise ConfigError(
                f"feature matrix must have shape (frames, {self.config.dim}), got {self.data.shape}"
            )

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _frames(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Zero-padded frame view, shape (num_frames, window)."""
    num_frames = len(samples) // hop
    padded = np.zeros((num_frames - 1) * hop + window if num_frames else 0)
    padded[: len(samples)] = samples[: len(padded)]
    if num_frames == 0:
        return np.empty((0, window))
    view = np.lib.stride_tricks.sliding_window_view(padded, window)
    return view[::hop]


def zcr(frames: np.ndarray) -> np.ndarray:
    """Zero-crossing rate per frame: sign changes / (window - 1), with
    sign(0) treated as positive."""
    signs = np.where(frames >= 0, 1, -1)
    changes = np.sum(signs[:, 1:] != signs[:, :-1], axis=1)
    return changes / (frames.shape[1] - 1)


def rmse_db(frames: np.ndarray) -> np.ndarray:
    """Root-mean-square energy per frame in dB, floored at -100 dB."""
    rms = np.sqrt(np.mean(frames**2, axis=1))
    return 20.0 * np.log10(np.maximum(rms, AMP_EPS))


def hz_to_mel(hz):
    """Slaney mel scale: linear below 1 kHz, log above."""
    hz = np.asarray(hz, dtype=np.float64)
    mel = 3.0 * hz / 200.0
    log_region = hz >= 1000.0
    mel = np.where(log_region, 15.0 + 27.0 * np.log(np.maximum(hz, 1000.0) / 1000.0) / np.log(6.4), mel)
    return mel


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    hz = 200.0 * mel / 3.0
    log_region = mel >= 15.0
    hz = np.where(log_region, 1000.0 * np.power(6.4, (mel - 15.0) / 27.0), hz)
    return hz


def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular filters (n_mels, fft_size//2 + 1), peak 1, spanning 0 to Nyquist."""
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)
    lower = hz_points[:-2, None]
    center = hz_points[1:-1, None]
    upper = hz_points[2:, None]
    rising = (bin_freqs - lower) / np.maximum(center - lower, 1e-30)
    falling = (upper - bin_freqs) / np.maximum(upper - center, 1e-30)
    return np.maximum(0.0, np.minimum(rising, falling))


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def mel_spectrogram_db(frames: np.ndarray, n_mels: int, sample_rate: int) -> np.ndarray:
    """Mel power spectrogram in dB. Periodic Hann window, FFT size the
    next power of two at or above the window length, floor -100 dB."""
    window = frames.shape[1]
    fft_size = _next_pow2(window)
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)
    spectrum = np.fft.rfft(frames * hann, n=fft_size, axis=1)
    power = np.abs(spectrum) ** 2
    mel_power = power @ mel_filterbank(n_mels, fft_size, sample_rate).T
    return 10.0 * np.log10(np.maximum(mel_power, POWER_EPS))


def extract_features(buffer: AudioBuffer, config: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    window = config.window_samples(buffer.sample_rate)
    hop = config.hop_samples(buffer.sample_rate)
    frames = _frames(buffer.samples, window, hop)
    mel = mel_spectrogram_db(frames, config.n_mels, buffer.sample_rate)
    data = np.column_stack([mel, zcr(frames), rmse_db(frames)])
    return FeatureMatrix(data.astype(np.float32), config, buffer.sample_rate)


def save_features(path, matrix: FeatureMatrix) -> None:
    """Container layout: magic, uint32 header length, JSON header,
    row-major little-endian float32 payload."""
    header = {
        "version": FEATURES_VERSION,
        "num_frames": matrix.num_frames,
        "dim": matrix.dim,
        "window_ms": matrix.config.window_ms,
        "hop_ms": matrix.config.hop_ms,
        "n_mels": matrix.config.n_mels,
        "sample_rate": matrix.sample_rate,
        "dtype": "float32",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(FEATURES_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(matrix.data.astype("<f4").tobytes())


def load_features(path) -> FeatureMatrix:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != FEATURES_MAGIC:
        raise FormatError(f"{path}: not a feature container")
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated feature container")
    (header_len,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad feature header: {exc}") from exc
    if header.get("version") != FEATURES_VERSION:
        raise FormatError(f"{path}: unsupported feature container version {header.get('version')}")
    num_frames, dim = header["num_frames"], header["dim"]
    payload = raw[8 + header_len :]
    expected = num_frames * dim * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(num_frames, dim)
    config = FeatureConfig(header["window_ms"], header["hop_ms"], header["n_mels"])
    return FeatureMatrix(data.copy(), config, header["sample_rate"])


def export_features_csv(path, matrix: FeatureMatrix) -> None:
    names = [f"mel_{i}" for i in range(matrix.config.n_mels)] + ["zcr", "rmse_db"]
    with open(path, "w", newline="") as f:
        f.write("frame," + ",".join(names) + "\n")
        for t in range(matrix.num_frames):
            row = ",".join(f"{v:.6g}" for v in matrix.data[t])
            f.write(f"{t},{row}\n")
