"""Ring-buffer replay memory over single-frame transitions.

Frames are stored in episode order so fixed-length windows can be
reconstructed; sampled windows never straddle an episode boundary, and a
non-terminal window additionally requires its successor frame (for the
bootstrap target) to belong to the same episode.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    frame: np.ndarray  # [84, 84] float32 in [0, 1]
    action: int
    reward: float
    done: bool


class ReplayMemory:
    def __init__(self, capacity, frame_hw=(84, 84)):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.frames = np.zeros((capacity, *frame_hw), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.int32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=bool)
        self.episode_ids = np.full(capacity, -1, dtype=np.int64)
        self.total = 0  # transitions ever pushed; logical index of next write

    def __len__(self):
        return min(self.total, self.capacity)

    @property
    def base(self):
        """Oldest logical index still held."""
        return self.total - len(self)

    def push(self, frame, action, reward, done, episode_id):
        i = self.total % self.capacity
        self.frames[i] = frame
        self.actions[i] = action
        self.rewards[i] = reward
        self.dones[i] = done
        self.episode_ids[i] = episode_id
        self.total += 1

    def _phys(self, logical):
        return np.asarray(logical) % self.capacity

    def valid_window_starts(self, length):
        """Logical start indices of windows of ``length`` transitions that
        stay inside one episode and either end terminally or have a
        same-episode successor frame available."""
        n = len(self)
        if n < length:
            return np.empty(0, dtype=np.int64)
        logical = self.base + np.arange(n)
        ids = self.episode_ids[self._phys(logical)]
        dones = self.dones[self._phys(logical)]
        starts = np.arange(n - length + 1)
        same = np.ones(len(starts), dtype=bool)
        for off in range(1, length):
            same &= ids[starts + off] == ids[starts]
        last = starts + length - 1
        has_next = np.zeros(len(starts), dtype=bool)
        can = last + 1 <= n - 1
        has_next[can] = ids[last[can] + 1] == ids[starts[can]]
        ok = same & (dones[last] | has_next)
        return logical[starts[ok]]

    def sample_windows(self, rng, batch, length):
        """Sample ``batch`` windows with replacement.

        Returns a dict of arrays or None when no valid window exists:
          frames [B, L, H, W], actions [B, L], rewards [B, L],
          next_frames [B, H, W] (zeros when terminal), terminal [B].
        """
        starts = self.valid_window_starts(length)
        if starts.size == 0:
            return None
        chosen = starts[rng.integers(0, starts.size, size=batch)]
        offsets = np.arange(length)
        idx = self._phys(chosen[:, None] + offsets[None, :])
        frames = self.frames[idx]
        actions = self.actions[idx]
        rewards = self.rewards[idx]
        last = self._phys(chosen + length - 1)
        terminal = self.dones[last]
        next_frames = np.zeros((batch, *self.frames.shape[1:]), dtype=np.float32)
        nonterm = ~terminal
        next_frames[nonterm] = self.frames[self._phys(chosen[nonterm] + length)]
        return {
            "frames": frames,
            "actions": actions,
            "rewards": rewards,
            "next_frames": next_frames,
            "terminal": terminal,
        }
