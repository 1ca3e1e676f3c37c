"""Minimal dense-tensor numerical core: layers with exact analytic
gradients, BCE loss, SGD/RMSprop, finite-difference gradient checking,
and checkpoint I/O. float64 throughout."""

from .checkpoint import (
    load_checkpoint,
    load_tensor,
    model_tensors,
    restore_model,
    save_checkpoint,
    save_tensor,
)
from .core import (
    Layer,
    Parameter,
    Sequential,
    glorot_uniform,
    guard_finite,
    orthogonal,
)
from .gradcheck import gradient_check
from .layers import (
    Conv1d,
    Dense,
    Dropout,
    Embedding,
    Flatten,
    MaxOverTime,
    MaxPool1d,
    ReLU,
    Sigmoid,
    Tanh,
    dropout,
)
from .losses import BCE_EPS, bce_loss
from .optim import RMSprop, SGD, make_optimizer
from .recurrent import (
    GRU,
    LSTM,
    Bidirectional,
    SimpleRNN,
    gru_step,
    lstm_step,
    rnn_step,
)

__all__ = [
    "BCE_EPS",
    "Bidirectional",
    "Conv1d",
    "Dense",
    "Dropout",
    "Embedding",
    "Flatten",
    "GRU",
    "LSTM",
    "Layer",
    "MaxOverTime",
    "MaxPool1d",
    "Parameter",
    "ReLU",
    "RMSprop",
    "SGD",
    "Sequential",
    "Sigmoid",
    "SimpleRNN",
    "Tanh",
    "bce_loss",
    "dropout",
    "glorot_uniform",
    "gradient_check",
    "gru_step",
    "guard_finite",
    "load_checkpoint",
    "load_tensor",
    "lstm_step",
    "make_optimizer",
    "model_tensors",
    "orthogonal",
    "restore_model",
    "rnn_step",
    "save_checkpoint",
    "save_tensor",
]
