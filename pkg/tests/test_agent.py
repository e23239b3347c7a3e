"""Agent assembly: forward contract, acting, targets, BPTT training."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgaze.agent import (
    AgentState,
    NetworkArch,
    QNetwork,
    ReplayMemory,
    TrainConfig,
    compute_targets,
    epsilon_at,
    q_forward,
    select_action,
    sync_target,
    train_step,
)
from qgaze.agent.network import MINIATURE_ARCH
from qgaze.agent.training import compute_loss_and_grads
from qgaze.errors import NonFiniteError
from qgaze.nn.optim import RmsProp

from fdcheck import rel_err

RNG = np.random.default_rng(7)


def mini_net(seed=0, dtype=np.float64):
    return QNetwork(MINIATURE_ARCH, rng=np.random.default_rng(seed), dtype=dtype)


def full_net(seed=0):
    return QNetwork(NetworkArch(num_actions=3), rng=np.random.default_rng(seed))


class TestQForward:
    def test_shape_trace_full_architecture(self):
        net = full_net()
        assert net.grid_k == 7 and net.feature_dim == 64
        state = AgentState.zeros(64)
        frame = RNG.random((84, 84)).astype(np.float32)
        q, alpha, nxt = q_forward(net, frame, state)
        assert q.shape == (3,)
        assert alpha.shape == (49,)
        assert nxt.h2.shape == (64,)
        assert abs(alpha.sum() - 1.0) < 1e-6

    def test_zero_weights_give_zero_q(self):
        net = full_net()
        for t in net.parameters().values():
            t.data[:] = 0
        q, _, _ = q_forward(net, RNG.random((84, 84)).astype(np.float32),
                            AgentState.zeros(64))
        assert np.allclose(q, 0)

    def test_deterministic(self):
        net = full_net()
        frame = RNG.random((84, 84)).astype(np.float32)
        a = q_forward(net, frame, AgentState.zeros(64))
        b = q_forward(net, frame, AgentState.zeros(64))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_non_finite_frame_rejected(self):
        net = mini_net()
        frame = np.full(MINIATURE_ARCH.frame_hw, np.nan)
        with pytest.raises(NonFiniteError):
            q_forward(net, frame, AgentState.zeros(MINIATURE_ARCH.hidden))


class TestSelectAction:
    def test_greedy_picks_argmax(self):
        rng = np.random.default_rng(0)
        assert select_action(np.array([1.0, 3.0, 2.0]), 0.0, rng) == 1

    def test_greedy_tie_breaks_low(self):
        rng = np.random.default_rng(0)
        assert select_action(np.array([5.0, 5.0]), 0.0, rng) == 0

    def test_fully_random_is_uniform(self):
        rng = np.random.default_rng(123)
        n, draws = 3, 10_000
        counts = np.bincount(
            [select_action(np.array([9.0, 0.0, 0.0]), 1.0, rng) for _ in range(draws)],
            minlength=n)
        p = 1 / n
        sigma = np.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) < 3 * sigma)


class TestEpsilonSchedule:
    CFG = TrainConfig(epsilon_start=1.0, epsilon_end=0.1, epsilon_anneal_steps=1000,
                      replay_capacity=10, total_steps=1)

    def test_endpoints_and_midpoint(self):
        assert epsilon_at(0, self.CFG) == pytest.approx(1.0)
        assert epsilon_at(1000, self.CFG) == pytest.approx(0.1)
        assert epsilon_at(500, self.CFG) == pytest.approx(0.55)
        assert epsilon_at(10_000, self.CFG) == pytest.approx(0.1)

    @given(st.integers(0, 5000), st.integers(0, 5000))
    @settings(max_examples=50, deadline=None)
    def test_monotone_nonincreasing_and_bounded(self, a, b):
        lo, hi = sorted((a, b))
        ea, eb = epsilon_at(lo, self.CFG), epsilon_at(hi, self.CFG)
        assert ea >= eb
        assert 0.1 <= ea <= 1.0 and 0.1 <= eb <= 1.0


def fill_memory(memory, rng, episodes=6, ep_len=6, hw=(5, 5), num_actions=2):
    for ep in range(episodes):
        for t in range(ep_len):
            memory.push(rng.random(hw).astype(np.float32),
                        int(rng.integers(num_actions)),
                        float(rng.integers(-1, 2)),
                        t == ep_len - 1, ep)


class TestReplayWindows:
    def test_windows_stay_inside_episodes(self):
        rng = np.random.default_rng(5)
        mem = ReplayMemory(64, frame_hw=(5, 5))
        fill_memory(mem, rng)
        starts = mem.valid_window_starts(4)
        ids = mem.episode_ids
        for s in starts:
            window_ids = {int(ids[(s + off) % mem.capacity]) for off in range(4)}
            assert len(window_ids) == 1

    @given(st.lists(st.integers(1, 9), min_size=1, max_size=12),
           st.integers(8, 80), st.integers(0, 10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_windows_never_straddle_random_episode_lengths(self, lengths, cap, seed):
        rng = np.random.default_rng(seed)
        mem = ReplayMemory(cap, frame_hw=(2, 2))
        for ep, ln in enumerate(lengths):
            for t in range(ln):
                mem.push(np.zeros((2, 2), np.float32), 0, 0.0, t == ln - 1, ep)
        length = 4
        starts = mem.valid_window_starts(length)
        for s in starts:
            idx = [(s + off) % cap for off in range(length)]
            window_ids = {int(mem.episode_ids[i]) for i in idx}
            assert len(window_ids) == 1
            last = (s + length - 1) % cap
            if not mem.dones[last]:
                nxt = (s + length) % cap
                assert mem.episode_ids[nxt] == mem.episode_ids[last]
                assert s + length < mem.total

    def test_sample_returns_none_when_empty(self):
        mem = ReplayMemory(16, frame_hw=(2, 2))
        assert mem.sample_windows(np.random.default_rng(0), 4, 4) is None

    def test_terminal_windows_have_zero_next_frames(self):
        mem = ReplayMemory(16, frame_hw=(2, 2))
        for t in range(4):
            mem.push(np.full((2, 2), t, np.float32), 0, 0.0, t == 3, 0)
        batch = mem.sample_windows(np.random.default_rng(0), 2, 4)
        assert batch["terminal"].all()
        assert not batch["next_frames"].any()


class TestTargets:
    def test_terminal_uses_reward_only(self):
        net = mini_net()
        batch = {
            "frames": RNG.random((2, 4, 5, 5)),
            "actions": np.zeros((2, 4), dtype=np.int32),
            "rewards": np.array([[0, 0, 0, 1.0], [0, 0, 0, -1.0]], dtype=np.float32),
            "next_frames": np.zeros((2, 5, 5), dtype=np.float32),
            "terminal": np.array([True, True]),
        }
        y = compute_targets(batch, net, 0.99)
        assert np.allclose(y, [1.0, -1.0])

    def test_gamma_zero_is_reward(self):
        net = mini_net()
        batch = {
            "frames": RNG.random((3, 4, 5, 5)),
            "actions": np.zeros((3, 4), dtype=np.int32),
            "rewards": RNG.random((3, 4)).astype(np.float32),
            "next_frames": RNG.random((3, 5, 5)).astype(np.float32),
            "terminal": np.array([False, False, False]),
        }
        y = compute_targets(batch, net, 0.0)
        assert np.allclose(y, batch["rewards"][:, -1], atol=1e-6)

    def test_bootstrap_arithmetic(self):
        # Force the net to output a constant Q of 2 for its single action.
        arch = NetworkArch(frame_hw=(5, 5), in_channels=1, conv=((2, 3, 2),),
                           hidden=2, num_actions=1)
        net = QNetwork(arch, rng=np.random.default_rng(0), dtype=np.float64)
        for t in net.parameters().values():
            t.data[:] = 0
        net.head.bias.data[:] = 2.0
        batch = {
            "frames": RNG.random((1, 4, 5, 5)),
            "actions": np.zeros((1, 4), dtype=np.int32),
            "rewards": np.array([[0, 0, 0, 1.0]], dtype=np.float32),
            "next_frames": RNG.random((1, 5, 5)).astype(np.float32),
            "terminal": np.array([False]),
        }
        y = compute_targets(batch, net, 0.99)
        assert y[0] == pytest.approx(1.0 + 0.99 * 2.0, rel=1e-6)


class TestSyncTarget:
    def test_outputs_identical_after_sync(self):
        net = full_net(seed=3)
        target = sync_target(net)
        frame = RNG.random((84, 84)).astype(np.float32)
        q1, _, _ = q_forward(net, frame, AgentState.zeros(64))
        q2, _, _ = q_forward(target, frame, AgentState.zeros(64))
        assert np.array_equal(q1, q2)

    def test_target_frozen_while_online_trains(self):
        net = mini_net(dtype=np.float32)
        target = sync_target(net)
        before = {k: v.data.copy() for k, v in target.parameters().items()}
        for t in net.parameters().values():
            t.data += 1.0
        for k, v in target.parameters().items():
            assert np.array_equal(v.data, before[k])


class TestFullLossGradients:
    def test_unrolled_loss_matches_finite_differences(self):
        net = mini_net(seed=11)
        rng = np.random.default_rng(42)
        b, t = 3, 4
        batch = {
            "frames": rng.random((b, t, 5, 5)),
            "actions": rng.integers(0, 2, size=(b, t)).astype(np.int32),
            "rewards": rng.standard_normal((b, t)).astype(np.float32),
            "next_frames": rng.random((b, 5, 5)),
            "terminal": np.array([False, True, False]),
        }
        targets = rng.standard_normal(b)

        loss, grads = compute_loss_and_grads(net, batch, targets)
        params = net.parameters()
        step = 1e-5
        for name, tensor in params.items():
            flat = tensor.data.ravel()
            num = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                lp, _ = compute_loss_and_grads(net, batch, targets)
                flat[i] = orig - step
                lm, _ = compute_loss_and_grads(net, batch, targets)
                flat[i] = orig
                num[i] = (lp - lm) / (2 * step)
            err = rel_err(grads[name].ravel(), num)
            assert err < 1e-3, f"{name}: rel err {err}"

    def test_zero_residual_gives_zero_grads_and_loss(self):
        net = mini_net(seed=2)
        rng = np.random.default_rng(1)
        b, t = 2, 4
        batch = {
            "frames": rng.random((b, t, 5, 5)),
            "actions": rng.integers(0, 2, size=(b, t)).astype(np.int32),
            "rewards": np.zeros((b, t), dtype=np.float32),
            "next_frames": rng.random((b, 5, 5)),
            "terminal": np.array([True, True]),
        }
        # Set the targets to the network's own predictions.
        loss0, _ = compute_loss_and_grads(net, batch, np.zeros(b))
        from qgaze.agent.training import _unroll

        z = lambda: np.zeros((b, net.arch.hidden), dtype=net.dtype)
        from qgaze.nn.layers import linear_forward

        _, _, _, _, h2_seq, _ = _unroll(net, batch["frames"], z(), z(), z(), z())
        q, _ = linear_forward(h2_seq[-1], net.head)
        targets = q[np.arange(b), batch["actions"][:, -1]]
        loss, grads = compute_loss_and_grads(net, batch, targets)
        assert loss == pytest.approx(0.0, abs=1e-12)
        for g in grads.values():
            assert np.allclose(g, 0)

    def test_all_step_loss_runs(self):
        net = mini_net(seed=4, dtype=np.float32)
        mem = ReplayMemory(64, frame_hw=(5, 5))
        fill_memory(mem, np.random.default_rng(0))
        cfg = TrainConfig(batch_size=4, bptt_steps=4, loss_all_steps=True,
                          replay_capacity=64, learning_rate=1e-3,
                          epsilon_anneal_steps=10, total_steps=1)
        opt = RmsProp(lr=cfg.learning_rate)
        loss = train_step(net, sync_target(net), mem, opt, cfg, np.random.default_rng(0))
        assert loss is not None and np.isfinite(loss)


class TestTrainStep:
    def test_insufficient_replay_is_noop(self):
        net = mini_net(dtype=np.float32)
        mem = ReplayMemory(8, frame_hw=(5, 5))
        cfg = TrainConfig(batch_size=2, bptt_steps=4, replay_capacity=8,
                          epsilon_anneal_steps=10, total_steps=1)
        assert train_step(net, sync_target(net), mem, RmsProp(), cfg,
                          np.random.default_rng(0)) is None

    def test_single_transition_td_error_converges(self):
        arch = NetworkArch(frame_hw=(5, 5), in_channels=1, conv=((2, 3, 2),),
                           hidden=2, num_actions=2)
        net = QNetwork(arch, rng=np.random.default_rng(9), dtype=np.float32)
        mem = ReplayMemory(8, frame_hw=(5, 5))
        rng = np.random.default_rng(3)
        frames = rng.random((4, 5, 5)).astype(np.float32)
        for t in range(4):
            mem.push(frames[t], 1, 0.7 if t == 3 else 0.0, t == 3, 0)
        cfg = TrainConfig(batch_size=8, bptt_steps=4, replay_capacity=8,
                          learning_rate=0.01, momentum=0.0,
                          epsilon_anneal_steps=10, total_steps=1)
        opt = RmsProp(lr=cfg.learning_rate, decay=cfg.rms_decay,
                      momentum=cfg.momentum, eps=cfg.rms_eps)
        target = sync_target(net)
        srng = np.random.default_rng(0)
        td = None
        for i in range(500):
            train_step(net, target, mem, opt, cfg, srng)
            batch = mem.sample_windows(srng, 1, 4)
            y = compute_targets(batch, target, cfg.gamma)
            from qgaze.agent.training import _unroll
            from qgaze.nn.layers import linear_forward

            z = lambda: np.zeros((1, 2), dtype=np.float32)
            _, _, _, _, h2_seq, _ = _unroll(net, batch["frames"], z(), z(), z(), z())
            q, _ = linear_forward(h2_seq[-1], net.head)
            td = abs(float(q[0, 1] - y[0]))
            if td < 1e-3:
                break
        assert td is not None and td < 1e-3
