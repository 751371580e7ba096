from .layers import conv1d_forward, gru_cell_forward, lstm_cell_forward, sigmoid
from .model import (
    ARCHITECTURES,
    ModelSpec,
    ModelWeights,
    backward,
    backward_batch,
    forward,
    forward_batch,
    init_weights,
    loss_and_grads,
    mse_loss,
    predict,
)

__all__ = [
    "ARCHITECTURES",
    "ModelSpec",
    "ModelWeights",
    "backward",
    "backward_batch",
    "conv1d_forward",
    "forward",
    "forward_batch",
    "gru_cell_forward",
    "init_weights",
    "loss_and_grads",
    "lstm_cell_forward",
    "mse_loss",
    "predict",
    "sigmoid",
]
