"""Breath detector: conv blocks that downsample time, a BiLSTM, and a
per-step sigmoid head.

With the defaults, a 2 s chunk of 800 feature frames (2.5 ms hop) is
pooled 800 -> 200 -> 40, so the model emits one breath probability per
20 frames, i.e. every 50 ms.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, FormatError, ShapeError
from .layers import BatchNorm1D, Conv1D, Dropout, MaxPool1D, ReLU, Sigmoid, TimeDense
from .recurrent import BiLSTM

MODEL_MAGIC = b"BLNN"
MODEL_VERSION = 1

# probabilities are clipped into the open interval (0, 1)
PROB_EPS = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 130
    conv_filters: tuple[int, ...] = (16, 8)
    conv_kernels: tuple[int, ...] = (3, 1)
    pool_size: int = 3
    pool_strides: tuple[int, ...] = (4, 5)
    dropout_rate: float = 0.2
    lstm_units: int = 32
    chunk_frames: int = 800
    seed: int = 0

    def __post_init__(self):
        if not (len(self.conv_filters) == len(self.conv_kernels) == len(self.pool_strides)):
            raise ConfigError("conv_filters, conv_kernels and pool_strides must have equal length")
        if len(self.conv_filters) == 0:
            raise ConfigError("at least one conv block is required")
        if self.input_dim < 1 or self.lstm_units < 1:
            raise ConfigError("input_dim and lstm_units must be positive")
        if self.chunk_frames % self.frames_per_step != 0:
            raise ConfigError(
                f"chunk_frames={self.chunk_frames} must be divisible by the "
                f"total pool stride {self.frames_per_step}"
            )

    @property
    def frames_per_step(self) -> int:
        """Input frames consumed per output step (product of pool strides)."""
        out = 1
        for s in self.pool_strides:
            out *= s
        return out

    @property
    def steps_per_chunk(self) -> int:
        return self.chunk_frames // self.frames_per_step


class BreathDetectorModel:
    """Framewise breath probability model over feature chunks."""

    def __init__(self, config: ModelConfig = ModelConfig()):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self._layers: list[tuple[str, object]] = []
        in_ch = config.input_dim
        for i, (filters, kernel, stride) in enumerate(
            zip(config.conv_filters, config.conv_kernels, config.pool_strides)
        ):
            self._layers.append((f"conv{i}", Conv1D(in_ch, filters, kernel, rng)))
            self._layers.append((f"relu{i}", ReLU()))
            self._layers.append((f"bn{i}", BatchNorm1D(filters)))
            self._layers.append((f"pool{i}", MaxPool1D(config.pool_size, stride)))
            self._layers.append((f"drop{i}", Dropout(config.dropout_rate)))
            in_ch = filters
        self._layers.append(("lstm", BiLSTM(in_ch, config.lstm_units, rng)))
        self._layers.append(("dense", TimeDense(2 * config.lstm_units, 1, rng)))
        self._layers.append(("sigmoid", Sigmoid()))

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers:
            for pname, arr in layer.params.items():
                out[f"{name}.{pname}"] = arr
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers:
            for pname, arr in layer.grads.items():
                out[f"{name}.{pname}"] = arr
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        """Non-trained state that still belongs in a saved model."""
        out = {}
        for name, layer in self._layers:
            if isinstance(layer, BatchNorm1D):
                out[f"{name}.running_mean"] = layer.running_mean
                out[f"{name}.running_var"] = layer.running_var
        return out

    def forward(self, x: np.ndarray, training: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """(batch, time, input_dim) -> (batch, time / frames_per_step)
        breath probabilities in the open interval (0, 1), float64.

        During training, dropout masks are drawn from `rng`; with
        rng=None the previous masks are reused.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.config.input_dim:
            raise ShapeError(f"expected (batch, time, {self.config.input_dim}), got {x.shape}")
        if x.shape[1] % self.config.frames_per_step != 0:
            raise ShapeError(
                f"time axis {x.shape[1]} must be divisible by {self.config.frames_per_step}"
            )
        for name, layer in self._layers:
            if isinstance(layer, Dropout):
                x = layer.forward(x, training, rng)
            else:
                x = layer.forward(x, training)
        return np.clip(x[:, :, 0], PROB_EPS, 1.0 - PROB_EPS)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Propagate (batch, steps) probability gradients back through the
        most recent training forward; the clip is treated as identity."""
        g = np.asarray(grad, dtype=np.float64)[:, :, None]
        for _, layer in reversed(self._layers):
            g = layer.backward(g)
        return g

    def predict_file(self, features: np.ndarray, batch_chunks: int = 32) -> np.ndarray:
        """Score a whole file of feature frames.

        The file is cut into chunk_frames-long chunks, the last chunk
        zero-padded, and the per-chunk outputs concatenated and trimmed
        to ceil(num_frames / frames_per_step) steps.
        """
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.config.input_dim:
            raise ShapeError(f"expected (frames, {self.config.input_dim}), got {features.shape}")
        num_frames = features.shape[0]
        if num_frames == 0:
            return np.empty(0)
        chunk = self.config.chunk_frames
        num_chunks = -(-num_frames // chunk)
        padded = np.zeros((num_chunks * chunk, self.config.input_dim))
        padded[:num_frames] = features
        chunks = padded.reshape(num_chunks, chunk, self.config.input_dim)
        outputs = [
            self.forward(chunks[i : i + batch_chunks])
            for i in range(0, num_chunks, batch_chunks)
        ]
        steps = -(-num_frames // self.config.frames_per_step)
        return np.concatenate(outputs).reshape(-1)[:steps]


def save_model(path, model: BreathDetectorModel) -> None:
    """Layout: magic, uint32 header length, JSON header with the config
    and a tensor index, then the tensors as little-endian float64 so the
    round trip is bit-exact."""
    tensors = dict(model.parameters())
    tensors.update(model.buffers())
    index = []
    offset = 0
    payload = bytearray()
    for name in sorted(tensors):
        arr = tensors[name]
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        payload.extend(raw)
        offset += len(raw)
    header = {
        "version": MODEL_VERSION,
        "config": dataclasses.asdict(model.config),
        "tensors": index,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(bytes(payload))


def load_model(path) -> BreathDetectorModel:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file")
    (header_len,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad model header: {exc}") from exc
    if header.get("version") != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {header.get('version')}")
    cfg = dict(header["config"])
    for key in ("conv_filters", "conv_kernels", "pool_strides"):
        cfg[key] = tuple(cfg[key])
    model = BreathDetectorModel(ModelConfig(**cfg))
    targets = dict(model.parameters())
    targets.update(model.buffers())
    payload = raw[8 + header_len :]
    seen = set()
    for entry in header["tensors"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if name not in targets:
            raise FormatError(f"{path}: unknown tensor {name!r}")
        target = targets[name]
        if shape != target.shape:
            raise FormatError(f"{path}: tensor {name!r} has shape {shape}, expected {target.shape}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        chunk = payload[offset : offset + 8 * count]
        if len(chunk) != 8 * count:
            raise FormatError(f"{path}: tensor {name!r} payload is truncated")
        target[...] = np.frombuffer(chunk, dtype="<f8").reshape(shape)
        seen.add(name)
    missing = set(targets) - seen
    if missing:
        raise FormatError(f"{path}: missing tensors: {sorted(missing)}")
    return model
