from .tensor import Tensor
from .layers import (
    ConvLayer,
    LinearLayer,
    LstmCell,
    conv2d_forward,
    conv2d_backward,
    linear_forward,
    linear_backward,
    lstm_step,
    lstm_backward,
    relu,
    relu_backward,
    softmax,
    softmax_backward,
    tanh_op,
    tanh_backward,
)
from .optim import RmsProp, clip_gradients

__all__ = [
    "Tensor",
    "ConvLayer",
    "LinearLayer",
    "LstmCell",
    "conv2d_forward",
    "conv2d_backward",
    "linear_forward",
    "linear_backward",
    "lstm_step",
    "lstm_backward",
    "relu",
    "relu_backward",
    "softmax",
    "softmax_backward",
    "tanh_op",
    "tanh_backward",
    "RmsProp",
    "clip_gradients",
]
