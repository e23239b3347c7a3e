"""RMSProp with a decayed squared-gradient accumulator and step momentum.

The exact per-parameter recurrence, applied elementwise:

    acc  <- decay * acc + (1 - decay) * grad^2
    step <- lr * grad / sqrt(acc + eps)
    mom  <- momentum * mom + step
    p    <- p - mom

New accumulators start at zero. The recurrence above is the documented
contract; the unit tests replay it by hand.
"""

import numpy as np

from ..errors import ShapeError


class RmsProp:
    def __init__(self, lr=0.00025, decay=0.95, momentum=0.95, eps=1e-6):
        self.lr = lr
        self.decay = decay
        self.momentum = momentum
        self.eps = eps
        self.acc = {}
        self.mom = {}

    def update(self, params, grads):
        """Apply one update. params: name -> Tensor, grads: name -> ndarray."""
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.data.shape:
                raise ShapeError(f"grad shape {g.shape} != param {name} shape {p.data.shape}")
            if name not in self.acc:
                self.acc[name] = np.zeros_like(p.data)
                self.mom[name] = np.zeros_like(p.data)
            acc = self.acc[name]
            acc *= self.decay
            acc += (1.0 - self.decay) * g * g
            step = self.lr * g / np.sqrt(acc + self.eps)
            mom = self.mom[name]
            mom *= self.momentum
            mom += step
            p.data -= mom

    def state_arrays(self):
        """Accumulator/momentum buffers keyed by parameter name (for tests)."""
        return self.acc, self.mom


def rmsprop_update(params, grads, state):
    """Functional form: one RmsProp.update call on an existing state object."""
    state.update(params, grads)
    return params


def clip_gradients(grads, max_norm):
    """Per-tensor L2 clipping: any gradient whose norm exceeds ``max_norm``
    is rescaled to exactly ``max_norm``; the rest pass through unchanged.

    ``grads`` is a dict name -> ndarray; returns the same dict, modified
    in place.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    for name, g in grads.items():
        norm = float(np.sqrt(np.sum(g.astype(np.float64) ** 2)))
        if norm > max_norm:
            g *= np.asarray(max_norm / norm, dtype=g.dtype)
            # float32 rounding can leave the norm a hair above the bound
            for _ in range(8):
                norm = float(np.sqrt(np.sum(g.astype(np.float64) ** 2)))
                if norm <= max_norm:
                    break
                factor = np.asarray(max_norm / norm, dtype=g.dtype)
                if factor >= 1:
                    factor = np.nextafter(g.dtype.type(1), g.dtype.type(0))
                g *= factor
    return grads
