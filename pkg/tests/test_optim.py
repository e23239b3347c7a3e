"""Optimizer recurrence and gradient-clipping contracts."""

import numpy as np
import pytest

from qgaze.errors import ShapeError
from qgaze.nn import RmsProp, Tensor, clip_gradients
from qgaze.nn.optim import rmsprop_update


class TestRmsProp:
    def test_zero_gradient_leaves_params_and_decays_acc(self):
        opt = RmsProp(lr=0.01)
        p = {"w": Tensor(np.array([1.0, -2.0], dtype=np.float32), requires_grad=True)}
        opt.update(p, {"w": np.array([4.0, 4.0], dtype=np.float32)})
        acc_before = opt.acc["w"].copy()
        val_before = p["w"].data.copy()
        opt.mom["w"][:] = 0  # isolate the accumulator behaviour
        opt.update(p, {"w": np.zeros(2, dtype=np.float32)})
        assert np.array_equal(p["w"].data, val_before)
        assert np.allclose(opt.acc["w"], acc_before * opt.decay)

    def test_zero_learning_rate_freezes_params(self):
        opt = RmsProp(lr=0.0)
        p = {"w": Tensor(np.array([3.0], dtype=np.float64), requires_grad=True)}
        for _ in range(5):
            opt.update(p, {"w": np.array([1.5])})
        assert p["w"].data[0] == 3.0

    def test_three_steps_match_hand_recurrence(self):
        lr, decay, momentum, eps = 0.01, 0.9, 0.5, 1e-6
        g = 2.0
        opt = RmsProp(lr=lr, decay=decay, momentum=momentum, eps=eps)
        p = {"w": Tensor(np.array([1.0], dtype=np.float64), requires_grad=True)}

        # Hand-rolled replay of the documented recurrence.
        acc = mom = 0.0
        val = 1.0
        for _ in range(3):
            acc = decay * acc + (1 - decay) * g * g
            step = lr * g / np.sqrt(acc + eps)
            mom = momentum * mom + step
            val -= mom
            opt.update(p, {"w": np.array([g])})
            assert p["w"].data[0] == pytest.approx(val, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        opt = RmsProp()
        p = {"w": Tensor(np.zeros(3), requires_grad=True)}
        with pytest.raises(ShapeError):
            opt.update(p, {"w": np.zeros(4)})

    def test_functional_wrapper(self):
        state = RmsProp(lr=0.1, momentum=0.0)
        p = {"w": Tensor(np.array([1.0]), requires_grad=True)}
        out = rmsprop_update(p, {"w": np.array([1.0])}, state)
        assert out is p and p["w"].data[0] < 1.0

    def test_params_stay_finite(self):
        opt = RmsProp(lr=0.1)
        rng = np.random.default_rng(0)
        p = {"w": Tensor(rng.standard_normal(16).astype(np.float32), requires_grad=True)}
        for _ in range(200):
            opt.update(p, {"w": rng.standard_normal(16).astype(np.float32) * 100})
        assert np.all(np.isfinite(p["w"].data))


class TestClipGradients:
    def test_norm_below_max_untouched(self):
        g = {"a": np.array([3.0, 4.0])}  # norm 5
        out = clip_gradients(g, 10.0)
        assert np.array_equal(out["a"], [3.0, 4.0])

    def test_norm_above_max_rescaled_exactly(self):
        g = {"a": np.array([30.0, 40.0])}  # norm 50
        out = clip_gradients(g, 10.0)
        assert np.allclose(out["a"], [6.0, 8.0])
        assert np.linalg.norm(out["a"]) == pytest.approx(10.0)

    def test_zero_gradient_stays_zero(self):
        g = {"a": np.zeros(5)}
        out = clip_gradients(g, 1.0)
        assert not out["a"].any()

    def test_clipped_norm_never_exceeds_bound(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            scale = 10.0 ** rng.uniform(-3, 3)
            g = {"a": (rng.standard_normal(rng.integers(1, 40)) * scale).astype(np.float32)}
            out = clip_gradients(g, 10.0)
            assert np.linalg.norm(out["a"].astype(np.float64)) <= 10.0 + 1e-9

    def test_invalid_max_norm_rejected(self):
        with pytest.raises(ValueError):
            clip_gradients({"a": np.ones(2)}, 0.0)
