"""Acting, target computation, truncated BPTT training, and the run loop.

Training samples fixed-length windows of transitions, unrolls the network
from zero recurrent state, regresses the final step's chosen-action Q value
onto a frozen-target bootstrap, and backpropagates through the whole
window. Gradients on the recurrent path (attention + both LSTM cells) are
per-tensor L2-clipped before the RMSProp update; conv and head gradients
are left unclipped.
"""

from dataclasses import dataclass, field

import numpy as np

from ..attention import attend_backward
from ..nn.layers import linear_backward, linear_forward, lstm_backward
from ..nn.optim import RmsProp, clip_gradients
from .network import AgentState, NetworkArch, QNetwork, q_forward
from .preprocess import preprocess_frame
from .replay import ReplayMemory


def epsilon_at(step, cfg):
    """Linear anneal from epsilon_start to epsilon_end, then constant."""
    if step < 0:
        raise ValueError("step must be >= 0")
    frac = min(step / cfg.epsilon_anneal_steps, 1.0)
    return cfg.epsilon_start * (1.0 - frac) + cfg.epsilon_end * frac


def select_action(q, epsilon, rng):
    """Epsilon-greedy; greedy ties break to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(0, len(q)))
    return int(np.argmax(q))


def sync_target(net):
    """Frozen deep copy of all parameters."""
    return net.clone()


def _unroll(net, frames, h1, c1, h2, c2, want_cache=False):
    """Forward a [B, T, H, W] frame block through conv (batched across B*T)
    and the recurrent stack (sequential over T). Returns per-step state/
    cache lists and the conv cache."""
    b, t = frames.shape[:2]
    flat = frames.reshape(b * t, 1, *frames.shape[2:]).astype(net.dtype, copy=False)
    slices_all, conv_cache = net.conv_features(flat, want_cache=want_cache)
    k2, d = slices_all.shape[1:]
    slices_all = slices_all.reshape(b, t, k2, d)
    alphas, rec_caches, h2_seq = [], [], []
    for step in range(t):
        att_out, h1, c1, h2, c2, caches = net.step_recurrent(
            slices_all[:, step], h1, c1, h2, c2)
        alphas.append(att_out.alpha)
        rec_caches.append(caches)
        h2_seq.append(h2)
    return slices_all, conv_cache, rec_caches, alphas, h2_seq, (h1, c1, h2, c2)


def compute_targets(batch, target_net, gamma):
    """Bootstrap targets for the final step of each sampled window.

    The target network replays the window's frames from zero state so its
    recurrent state matches the online unroll, then evaluates the successor
    frame. Terminal windows use the plain reward.
    """
    frames = batch["frames"]
    b, t = frames.shape[:2]
    hsz = target_net.arch.hidden
    z = lambda: np.zeros((b, hsz), dtype=target_net.dtype)
    _, _, _, _, _, (h1, c1, h2, c2) = _unroll(target_net, frames, z(), z(), z(), z())
    next_slices, _ = target_net.conv_features(
        batch["next_frames"][:, None].astype(target_net.dtype, copy=False))
    _, _, _, nh2, _, _ = target_net.step_recurrent(next_slices, h1, c1, h2, c2)
    q_next, _ = linear_forward(nh2, target_net.head)
    boot = q_next.max(axis=1)
    rewards = batch["rewards"][:, -1].astype(np.float64)
    y = rewards + gamma * boot.astype(np.float64) * (~batch["terminal"])
    return y.astype(target_net.dtype)


def compute_loss_and_grads(net, batch, targets, all_steps=False, step_targets=None):
    """Mean-squared TD error on the window's final step (or on every step
    when ``all_steps``), with gradients for every parameter.

    Returns (loss, grads dict keyed like net.parameters()).
    """
    frames = batch["frames"].astype(net.dtype, copy=False)
    actions = batch["actions"]
    b, t = frames.shape[:2]
    hsz = net.arch.hidden
    z = lambda: np.zeros((b, hsz), dtype=net.dtype)
    slices_all, conv_cache, rec_caches, _, h2_seq, _ = _unroll(
        net, frames, z(), z(), z(), z(), want_cache=True)

    loss_steps = range(t) if all_steps else [t - 1]
    head_caches = {}
    residuals = {}
    n_terms = b * len(list(loss_steps))
    loss = 0.0
    for step in loss_steps:
        q, cache = linear_forward(h2_seq[step], net.head)
        y = targets if step == t - 1 and not all_steps else step_targets[:, step]
        chosen = q[np.arange(b), actions[:, step]]
        r = (chosen - y).astype(np.float64)
        loss += float(np.sum(r * r))
        head_caches[step] = (q, cache)
        residuals[step] = r
    loss /= n_terms

    grads = {name: np.zeros_like(tensor.data) for name, tensor in net.parameters().items()}
    k2, d = slices_all.shape[2:]
    dslices_all = np.zeros_like(slices_all)
    dh1 = dc1 = dh2 = dc2 = None
    zero = np.zeros((b, hsz), dtype=net.dtype)
    dh1, dc1, dh2, dc2 = zero.copy(), zero.copy(), zero.copy(), zero.copy()

    for step in reversed(range(t)):
        dh2_t = dh2
        if step in head_caches:
            q, cache = head_caches[step]
            dq = np.zeros_like(q)
            dq[np.arange(b), actions[:, step]] = (2.0 / n_terms) * residuals[step].astype(net.dtype)
            dh_head, dw, dbias = linear_backward(dq, cache, net.head)
            grads["head.weights"] += dw
            grads["head.bias"] += dbias
            dh2_t = dh2_t + dh_head
        att_cache, cache1, cache2 = rec_caches[step]
        dx2, dh2_rec, dc2, dwx2, dwh2, db2 = lstm_backward(net.lstm2, dh2_t, dc2, cache2)
        grads["lstm2.w_x"] += dwx2
        grads["lstm2.w_h"] += dwh2
        grads["lstm2.bias"] += db2
        dctx, dh1_rec, dc1, dwx1, dwh1, db1 = lstm_backward(net.lstm1, dh1 + dx2, dc1, cache1)
        grads["lstm1.w_x"] += dwx1
        grads["lstm1.w_h"] += dwh1
        grads["lstm1.bias"] += db1
        dslices, dquery, dhw, dsw = attend_backward(None, dctx, att_cache, net.attn)
        grads["attn.hidden_w"] += dhw
        grads["attn.slice_w"] += dsw
        dslices_all[:, step] = dslices
        dh1 = dh1_rec
        dh2 = dh2_rec + dquery  # h2_{t-1} feeds both lstm2 and the attention query

    # conv backward, batched across all B*T frames
    layer_grads, _ = net.conv_features_backward(
        dslices_all.reshape(b * t, k2, d), conv_cache)
    for i, (dw, dbias) in enumerate(layer_grads):
        grads[f"conv{i}.filters"] += dw
        grads[f"conv{i}.bias"] += dbias
    return loss, grads


def _all_step_targets(batch, target_net, gamma):
    """Per-step bootstrap targets (used when loss_all_steps is enabled)."""
    frames = batch["frames"]
    b, t = frames.shape[:2]
    hsz = target_net.arch.hidden
    z = lambda: np.zeros((b, hsz), dtype=target_net.dtype)
    h1, c1, h2, c2 = z(), z(), z(), z()
    qs = []
    for step in range(t):
        sl, _ = target_net.conv_features(frames[:, step][:, None].astype(target_net.dtype, copy=False))
        _, h1, c1, h2, c2, _ = target_net.step_recurrent(sl, h1, c1, h2, c2)
        q, _ = linear_forward(h2, target_net.head)
        qs.append(q)
    sl, _ = target_net.conv_features(batch["next_frames"][:, None].astype(target_net.dtype, copy=False))
    _, _, _, nh2, _, _ = target_net.step_recurrent(sl, h1, c1, h2, c2)
    q_last, _ = linear_forward(nh2, target_net.head)
    qs.append(q_last)
    ys = np.zeros((b, t), dtype=target_net.dtype)
    for step in range(t):
        boot = qs[step + 1].max(axis=1)
        done = batch["terminal"] & (step == t - 1)
        ys[:, step] = batch["rewards"][:, step] + gamma * boot * (~done)
    return ys


def train_step(net, target_net, memory, opt, cfg, rng):
    """One minibatch update. Returns the loss, or None when the replay
    holds no valid window yet."""
    batch = memory.sample_windows(rng, cfg.batch_size, cfg.bptt_steps)
    if batch is None:
        return None
    if cfg.loss_all_steps:
        step_targets = _all_step_targets(batch, target_net, cfg.gamma)
        loss, grads = compute_loss_and_grads(net, batch, None, all_steps=True,
                                             step_targets=step_targets)
    else:
        targets = compute_targets(batch, target_net, cfg.gamma)
        loss, grads = compute_loss_and_grads(net, batch, targets)
    recurrent = {n: grads[n] for n in net.recurrent_param_names()}
    clip_gradients(recurrent, cfg.clip_norm)
    opt.update(net.parameters(), grads)
    return loss


@dataclass
class TrainResult:
    net: QNetwork
    log: list = field(default_factory=list)
    final_step: int = 0


def run_training(env, cfg, seed, arch=None, progress=None):
    """Full training loop: epsilon-greedy acting, replay, periodic target
    sync, one log record per completed episode. Deterministic given seed."""
    root = np.random.SeedSequence(seed)
    ss_init, ss_action, ss_replay, ss_env = root.spawn(4)
    init_rng = np.random.default_rng(ss_init)
    action_rng = np.random.default_rng(ss_action)
    replay_rng = np.random.default_rng(ss_replay)
    env_rng = np.random.default_rng(ss_env)

    if arch is None:
        arch = NetworkArch(hidden=cfg.hidden_size, num_actions=env.spec.num_actions)
    net = QNetwork(arch, rng=init_rng)
    target = sync_target(net)
    opt = RmsProp(lr=cfg.learning_rate, decay=cfg.rms_decay,
                  momentum=cfg.momentum, eps=cfg.rms_eps)
    memory = ReplayMemory(cfg.replay_capacity)
    result = TrainResult(net=net)

    if cfg.total_steps == 0:
        return result

    episode = 0
    episode_return = 0.0
    losses = []
    obs = env.reset(int(env_rng.integers(2 ** 31)))
    frame = preprocess_frame(obs)
    state = AgentState.zeros(arch.hidden)

    for step in range(cfg.total_steps):
        eps = epsilon_at(step, cfg)
        q, _, state = q_forward(net, frame, state)
        action = select_action(q, eps, action_rng)
        obs, reward, done = env.step(action)
        memory.push(frame, action, float(np.clip(reward, -1.0, 1.0)), done, episode)
        episode_return += reward

        if len(memory) >= cfg.warmup_transitions and step % cfg.train_every == 0:
            loss = train_step(net, target, memory, opt, cfg, replay_rng)
            if loss is not None:
                losses.append(loss)
        if (step + 1) % cfg.target_sync_period == 0:
            target = sync_target(net)

        if done:
            record = {
                "step": step + 1,
                "episode": episode,
                "return": float(episode_return),
                "loss": float(np.mean(losses)) if losses else None,
                "epsilon": float(eps),
            }
            result.log.append(record)
            if progress is not None:
                progress(record)
            episode += 1
            episode_return = 0.0
            losses = []
            obs = env.reset(int(env_rng.integers(2 ** 31)))
            state = AgentState.zeros(arch.hidden)
        frame = preprocess_frame(obs)

    result.final_step = cfg.total_steps
    return result
