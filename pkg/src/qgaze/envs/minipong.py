"""MiniPong: two vertical paddles and a bouncing ball with integer velocity.

The agent controls the right paddle (actions: 0 = up, 1 = stay, 2 = down).
The opponent is a tracking bot whose speed is capped at one cell every
other step, so it can be beaten. The ball reflects off the top and bottom
walls and off paddles; a paddle hit re-aims the vertical velocity by where
the ball struck. The episode ends at the first point: +1 when the opponent
misses, -1 when the agent misses.
"""

import numpy as np

from .base import EnvSpec, GridEnv, GRID_COLS, GRID_ROWS

BALL_COLOR = (240, 240, 240)      # white
AGENT_COLOR = (245, 150, 40)      # orange
OPPONENT_COLOR = (90, 220, 90)    # green

AGENT_COL = GRID_COLS - 2
OPPONENT_COL = 1
PADDLE_HALF = 1  # paddles span row +- 1


class MiniPongEnv(GridEnv):
    spec = EnvSpec("minipong", num_actions=3, max_episode_steps=1000)

    def __init__(self):
        super().__init__()
        self.ball = [GRID_ROWS // 2, GRID_COLS // 2]
        self.vel = [0, 1]
        self.agent_row = GRID_ROWS // 2
        self.opp_row = GRID_ROWS // 2

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        self.ball = [GRID_ROWS // 2, GRID_COLS // 2]
        self.vel = [int(rng.integers(-1, 2)), int(rng.choice([-1, 1]))]
        self.agent_row = GRID_ROWS // 2
        self.opp_row = GRID_ROWS // 2
        self.done = False
        self.t = 0
        return self.observation()

    def _clip_row(self, row):
        return int(np.clip(row, PADDLE_HALF, GRID_ROWS - 1 - PADDLE_HALF))

    def step(self, action):
        self._require_live()
        self._require_action(action)
        self.agent_row = self._clip_row(self.agent_row + (action - 1))
        if self.t % 2 == 0 and self.opp_row != self.ball[0]:
            self.opp_row = self._clip_row(self.opp_row + np.sign(self.ball[0] - self.opp_row))

        ball_r, ball_c = self.ball
        vr, vc = self.vel
        new_r = ball_r + vr
        if new_r < 0 or new_r > GRID_ROWS - 1:
            vr = -vr
            new_r = ball_r + vr
        new_c = ball_c + vc

        reward = 0.0
        if new_c == AGENT_COL and abs(new_r - self.agent_row) <= PADDLE_HALF:
            vc = -vc
            vr = int(np.clip(new_r - self.agent_row, -1, 1))
            new_c = ball_c + vc
        elif new_c == OPPONENT_COL and abs(new_r - self.opp_row) <= PADDLE_HALF:
            vc = -vc
            vr = int(np.clip(new_r - self.opp_row, -1, 1))
            new_c = ball_c + vc

        self.ball = [new_r, new_c]
        self.vel = [vr, vc]
        self.t += 1

        if new_c > AGENT_COL:
            reward, self.done = -1.0, True
        elif new_c < OPPONENT_COL:
            reward, self.done = 1.0, True
        elif self.t >= self.spec.max_episode_steps:
            self.done = True
        return self.observation(), reward, self.done

    def _draw(self, canvas):
        self._fill_cell(canvas, self.opp_row - PADDLE_HALF, OPPONENT_COL,
                        OPPONENT_COLOR, height_cells=2 * PADDLE_HALF + 1)
        self._fill_cell(canvas, self.agent_row - PADDLE_HALF, AGENT_COL,
                        AGENT_COLOR, height_cells=2 * PADDLE_HALF + 1)
        row = int(np.clip(self.ball[0], 0, GRID_ROWS - 1))
        col = int(np.clip(self.ball[1], 0, GRID_COLS - 1))
        self._fill_cell(canvas, row, col, BALL_COLOR)
