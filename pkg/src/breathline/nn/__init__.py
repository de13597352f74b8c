"""Minimal neural network stack for the framewise breath detector.

Everything runs on float64 numpy arrays shaped (batch, time, channels).
Layers cache activations only during training forwards, so inference is
side-effect free.
"""

from .layers import BatchNorm1D, Conv1D, Dropout, Layer, MaxPool1D, ReLU, Sigmoid, TimeDense
from .model import BreathDetectorModel, ModelConfig, load_model, save_model
from .optim import Adam
from .recurrent import BiLSTM
from .train import TrainConfig, bce_loss, make_training_chunks, train

__all__ = [
    "Adam",
    "BatchNorm1D",
    "BiLSTM",
    "BreathDetectorModel",
    "Conv1D",
    "Dropout",
    "Layer",
    "MaxPool1D",
    "ModelConfig",
    "ReLU",
    "Sigmoid",
    "TimeDense",
    "TrainConfig",
    "bce_loss",
    "load_model",
    "make_training_chunks",
    "save_model",
    "train",
]
