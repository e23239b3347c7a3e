"""Dense tensor value type: a shaped value buffer plus an optional gradient."""

import numpy as np

from ..errors import NonFiniteError, ShapeError


class Tensor:
    """N-dimensional array of reals with an optional same-shaped grad buffer.

    Learnable parameters carry a grad buffer; activations normally do not.
    All training math runs in float32; tests may build float64 instances.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, grad=None, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype if dtype is not None else None)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        if grad is not None:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.data.shape:
                raise ShapeError(f"grad shape {grad.shape} != value shape {self.data.shape}")
            self.grad = grad
        elif requires_grad:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0)

    def add_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def check_finite(self, what="tensor"):
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"{what} contains non-finite values")

    def copy(self):
        return Tensor(self.data.copy(),
                      grad=None if self.grad is None else self.grad.copy())

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype}, grad={'yes' if self.grad is not None else 'no'})"
