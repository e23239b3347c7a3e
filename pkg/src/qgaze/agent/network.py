"""Q-network: conv stack -> soft attention -> two stacked LSTMs -> linear head.

Per frame, the conv stack produces a K x K grid of D-dimensional feature
slices. The attention module weights those slices against the top LSTM
layer's previous hidden state and hands the expected slice (the context
vector) to the recurrent stack; the head reads the top hidden state into
one Q value per action.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..attention import AttentionParams, attend
from ..errors import NonFiniteError, ShapeError
from ..nn.layers import ConvLayer, LinearLayer, LstmCell, linear_forward, lstm_step


@dataclass(frozen=True)
class NetworkArch:
    """Structural hyperparameters; the default is the full-scale model."""

    frame_hw: tuple = (84, 84)
    in_channels: int = 1
    conv: tuple = ((32, 8, 4), (64, 4, 2), (64, 3, 1))  # (out_ch, k, stride)
    hidden: int = 64
    num_actions: int = 3

    def to_dict(self):
        return {
            "frame_hw": list(self.frame_hw),
            "in_channels": self.in_channels,
            "conv": [list(c) for c in self.conv],
            "hidden": self.hidden,
            "num_actions": self.num_actions,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            frame_hw=tuple(d["frame_hw"]),
            in_channels=d["in_channels"],
            conv=tuple(tuple(c) for c in d["conv"]),
            hidden=d["hidden"],
            num_actions=d["num_actions"],
        )


MINIATURE_ARCH = NetworkArch(frame_hw=(5, 5), in_channels=1,
                             conv=((2, 3, 2),), hidden=2, num_actions=2)


@dataclass
class AgentState:
    """Recurrent state carried across steps of one episode."""

    h1: np.ndarray
    c1: np.ndarray
    h2: np.ndarray
    c2: np.ndarray
    epsilon: float = 1.0
    step: int = 0

    @classmethod
    def zeros(cls, hidden, dtype=np.float32):
        z = lambda: np.zeros(hidden, dtype=dtype)
        return cls(z(), z(), z(), z())


class QNetwork:
    def __init__(self, arch=NetworkArch(), rng=None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.arch = arch
        self.dtype = dtype
        self.convs = []
        in_ch = arch.in_channels
        h, w = arch.frame_hw
        for out_ch, k, s in arch.conv:
            layer = ConvLayer(in_ch, out_ch, k, s, rng=rng, dtype=dtype)
            h, w = layer.out_hw(h, w)
            self.convs.append(layer)
            in_ch = out_ch
        if h != w:
            raise ShapeError(f"conv stack must end on a square grid, got {h}x{w}")
        self.grid_k = h
        self.feature_dim = in_ch
        self.attn = AttentionParams(arch.hidden, self.feature_dim, rng=rng, dtype=dtype)
        self.lstm1 = LstmCell(self.feature_dim, arch.hidden, rng=rng, dtype=dtype)
        self.lstm2 = LstmCell(arch.hidden, arch.hidden, rng=rng, dtype=dtype)
        self.head = LinearLayer(arch.hidden, arch.num_actions, rng=rng, dtype=dtype)

    @property
    def num_regions(self):
        return self.grid_k * self.grid_k

    def parameters(self):
        """Flat ordered name -> Tensor map; ordering is stable and load-bearing
        (optimizer state, checkpoints, and gradient dicts all key off it)."""
        params = {}
        for i, conv in enumerate(self.convs):
            for k, t in conv.parameters().items():
                params[f"conv{i}.{k}"] = t
        for k, t in self.attn.parameters().items():
            params[f"attn.{k}"] = t
        for k, t in self.lstm1.parameters().items():
            params[f"lstm1.{k}"] = t
        for k, t in self.lstm2.parameters().items():
            params[f"lstm2.{k}"] = t
        for k, t in self.head.parameters().items():
            params[f"head.{k}"] = t
        return params

    def recurrent_param_names(self):
        """Parameters on the recurrent path (gradient clipping applies here)."""
        return [n for n in self.parameters() if n.split(".")[0] in ("attn", "lstm1", "lstm2")]

    def clone(self):
        other = QNetwork(self.arch, rng=np.random.default_rng(0), dtype=self.dtype)
        src, dst = self.parameters(), other.parameters()
        for name in src:
            dst[name].data[...] = src[name].data
        return other

    # ------------------------------------------------------------------
    # forward passes
    # ------------------------------------------------------------------

    def conv_features(self, frames, want_cache=False):
        """frames: [B, C, H, W] -> (slices [B, K^2, D], stack cache)."""
        return kernels.conv_stack_forward(
            frames,
            [c.filters.data for c in self.convs],
            [c.bias.data for c in self.convs],
            [c.stride for c in self.convs],
            want_cache,
        )

    def conv_features_backward(self, dslices, cache, need_input_grad=False):
        """Per-layer (dfilters, dbias) list for a conv_features cache."""
        return kernels.conv_stack_backward(
            dslices, cache,
            [c.filters.data for c in self.convs],
            [c.stride for c in self.convs],
            need_input_grad,
        )

    def step_recurrent(self, slices, h1, c1, h2, c2):
        """One attention + LSTM-stack step on batched slices."""
        att_out, att_cache = attend(slices, h2, self.attn)
        nh1, nc1, cache1 = lstm_step(self.lstm1, att_out.context, h1, c1)
        nh2, nc2, cache2 = lstm_step(self.lstm2, nh1, h2, c2)
        return att_out, nh1, nc1, nh2, nc2, (att_cache, cache1, cache2)


def q_forward(net, frame, state):
    """Single acting step.

    frame: [H, W] grayscale in [0, 1] (already preprocessed).
    Returns (q [num_actions], alpha [K^2], next_state).
    """
    frame = np.asarray(frame, dtype=net.dtype)
    if frame.shape != tuple(net.arch.frame_hw):
        raise ShapeError(f"frame shape {frame.shape} != expected {net.arch.frame_hw}")
    if not np.all(np.isfinite(frame)):
        raise NonFiniteError("q_forward received a non-finite frame")
    slices, _ = net.conv_features(frame[None, None])
    att_out, nh1, nc1, nh2, nc2, _ = net.step_recurrent(
        slices, state.h1[None], state.c1[None], state.h2[None], state.c2[None])
    q, _ = linear_forward(nh2, net.head)
    next_state = AgentState(nh1[0], nc1[0], nh2[0], nc2[0],
                            epsilon=state.epsilon, step=state.step + 1)
    return q[0], att_out.alpha[0], next_state
