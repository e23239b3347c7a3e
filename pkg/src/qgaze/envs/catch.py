"""Catch: a ball falls one row per step; a 3-cell paddle slides along the
bottom row. Catching scores +1, missing -1, and either ends the episode.

Actions: 0 = left, 1 = stay, 2 = right. The ball spawns in a random column
at the top; every episode lasts exactly GRID_ROWS - 1 steps. The paddle is
wider than the ball's per-step displacement, so from a centered position a
single exploratory action cannot force a miss.
"""

import numpy as np

from .base import EnvSpec, GridEnv, GRID_COLS, GRID_ROWS

BALL_COLOR = (236, 52, 36)     # red
PADDLE_COLOR = (56, 196, 240)  # cyan

PADDLE_HALF = 1  # paddle spans paddle_col +- 1


class CatchEnv(GridEnv):
    spec = EnvSpec("catch", num_actions=3, max_episode_steps=GRID_ROWS - 1)

    def __init__(self):
        super().__init__()
        self.ball_row = 0
        self.ball_col = 0
        self.paddle_col = GRID_COLS // 2

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        self.ball_row = 0
        self.ball_col = int(rng.integers(0, GRID_COLS))
        self.paddle_col = GRID_COLS // 2
        self.done = False
        self.t = 0
        return self.observation()

    def step(self, action):
        self._require_live()
        self._require_action(action)
        self.paddle_col = int(np.clip(self.paddle_col + (action - 1),
                                      PADDLE_HALF, GRID_COLS - 1 - PADDLE_HALF))
        self.ball_row += 1
        self.t += 1
        reward = 0.0
        if self.ball_row >= GRID_ROWS - 1:
            self.done = True
            caught = abs(self.ball_col - self.paddle_col) <= PADDLE_HALF
            reward = 1.0 if caught else -1.0
        return self.observation(), reward, self.done

    def _draw(self, canvas):
        self._fill_cell(canvas, GRID_ROWS - 1, self.paddle_col - PADDLE_HALF,
                        PADDLE_COLOR, width_cells=2 * PADDLE_HALF + 1)
        if self.ball_row < GRID_ROWS - 1 or not self.done:
            self._fill_cell(canvas, min(self.ball_row, GRID_ROWS - 1),
                            self.ball_col, BALL_COLOR)
