"""Episode replay container: recorded rollouts for playback and annotation.

File layout (little-endian, version 1, documented in docs/formats.md):

    bytes 0-3   magic b"QGRP"
    bytes 4-7   u32 format version (1)
    bytes 8-11  u32 header length N
    bytes 12-.. N bytes UTF-8 JSON header:
                {env, seed, checkpoint_id, fps, frame_shape [H, W, 3],
                 num_actions, frame_count, terminal, config}
    per step    u32 compressed frame length, zlib(raw uint8 HWC bytes),
                i32 action, f32 reward, u8 done,
                u16 alpha count, f32 * count attention weights

Frames are stored as the exact uint8 native render (lossless; the float
observation is render/255), so (env, seed, actions) reproduces the stored
frames bit for bit.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..agent.network import AgentState, q_forward
from ..agent.preprocess import preprocess_frame
from ..agent.training import select_action
from ..errors import ReplayFormatError

MAGIC = b"QGRP"
VERSION = 1
DEFAULT_FPS = 5  # annotation playback rate


@dataclass
class EpisodeReplay:
    env_name: str
    seed: int
    checkpoint_id: str
    frames: np.ndarray   # [T, H, W, 3] uint8
    actions: np.ndarray  # [T] int32
    rewards: np.ndarray  # [T] float32
    alphas: np.ndarray   # [T, K^2] float32 (empty second dim when absent)
    terminal: bool
    fps: int = DEFAULT_FPS
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    @property
    def frame_hw(self):
        return self.frames.shape[1], self.frames.shape[2]


def save_replay(path, replay):
    header = {
        "env": replay.env_name,
        "seed": replay.seed,
        "checkpoint_id": replay.checkpoint_id,
        "fps": replay.fps,
        "frame_shape": list(replay.frames.shape[1:]),
        "frame_count": len(replay.frames),
        "terminal": bool(replay.terminal),
        "config": replay.config,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for i in range(len(replay.frames)):
            comp = zlib.compress(replay.frames[i].tobytes(), 6)
            alpha = np.asarray(replay.alphas[i], dtype="<f4")
            fh.write(struct.pack("<I", len(comp)))
            fh.write(comp)
            fh.write(struct.pack("<ifBH", int(replay.actions[i]),
                                 float(replay.rewards[i]),
                                 1 if i == len(replay.frames) - 1 and replay.terminal else 0,
                                 alpha.size))
            fh.write(alpha.tobytes())


def load_replay(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ReplayFormatError(f"{path}: not a replay file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ReplayFormatError(f"{path}: unsupported replay version {version}")
        try:
            header = json.loads(fh.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ReplayFormatError(f"{path}: corrupt replay header: {exc}") from exc
        shape = tuple(header["frame_shape"])
        count = header["frame_count"]
        frames = np.zeros((count, *shape), dtype=np.uint8)
        actions = np.zeros(count, dtype=np.int32)
        rewards = np.zeros(count, dtype=np.float32)
        alphas = None
        for i in range(count):
            raw = fh.read(4)
            if len(raw) < 4:
                raise ReplayFormatError(f"{path}: truncated at frame {i}")
            (clen,) = struct.unpack("<I", raw)
            comp = fh.read(clen)
            try:
                frame = np.frombuffer(zlib.decompress(comp), dtype=np.uint8)
            except zlib.error as exc:
                raise ReplayFormatError(f"{path}: frame {i} corrupt: {exc}") from exc
            frames[i] = frame.reshape(shape)
            action, reward, _done, acount = struct.unpack("<ifBH", fh.read(11))
            actions[i] = action
            rewards[i] = reward
            alpha = np.frombuffer(fh.read(4 * acount), dtype="<f4")
            if alphas is None:
                alphas = np.zeros((count, acount), dtype=np.float32)
            alphas[i] = alpha
    return EpisodeReplay(
        env_name=header["env"],
        seed=header["seed"],
        checkpoint_id=header["checkpoint_id"],
        frames=frames,
        actions=actions,
        rewards=rewards,
        alphas=alphas if alphas is not None else np.zeros((count, 0), dtype=np.float32),
        terminal=header["terminal"],
        fps=header.get("fps", DEFAULT_FPS),
        config=header.get("config", {}),
    )


def record_episode(env, net, seed, epsilon=0.05, checkpoint_id="", config=None):
    """Roll out one episode mostly-greedily and record everything.

    net=None records a uniformly random agent (epsilon forced to 1) using a
    freshly initialized network for the attention weights.
    """
    from ..agent.network import NetworkArch, QNetwork

    root = np.random.SeedSequence(seed)
    ss_env, ss_action, ss_init = root.spawn(3)
    action_rng = np.random.default_rng(ss_action)
    env_seed = int(np.random.default_rng(ss_env).integers(2 ** 31))
    if net is None:
        net = QNetwork(NetworkArch(num_actions=env.spec.num_actions),
                       rng=np.random.default_rng(ss_init))
        epsilon = 1.0

    obs = env.reset(env_seed)
    state = AgentState.zeros(net.arch.hidden)
    frames, actions, rewards, alphas = [], [], [], []
    done = False
    while not done and len(frames) < env.spec.max_episode_steps:
        frames.append(env.render_uint8())
        q, alpha, state = q_forward(net, preprocess_frame(obs), state)
        action = select_action(q, epsilon, action_rng)
        obs, reward, done = env.step(action)
        actions.append(action)
        rewards.append(reward)
        alphas.append(alpha)
    return EpisodeReplay(
        env_name=env.spec.name,
        seed=env_seed,
        checkpoint_id=checkpoint_id,
        frames=np.asarray(frames, dtype=np.uint8),
        actions=np.asarray(actions, dtype=np.int32),
        rewards=np.asarray(rewards, dtype=np.float32),
        alphas=np.asarray(alphas, dtype=np.float32),
        terminal=done,
        config=config or {},
    )
