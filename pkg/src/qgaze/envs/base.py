"""Shared environment contract and native-resolution rendering helpers.

Environments play on a coarse cell grid and render to a 210x160 RGB frame
(portrait: 210 rows by 160 columns), so the agent-side preprocessing path
is exercised at a realistic native size. Cells are 10x10 native pixels,
comfortably above the 2x2 minimum that survives 84x84 downsampling.
Objects use distinct saturated colors on a dark background so color-
opponency saliency channels have signal to work with.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import EnvError

NATIVE_H, NATIVE_W = 210, 160
CELL_PX = 10
GRID_ROWS = NATIVE_H // CELL_PX  # 21
GRID_COLS = NATIVE_W // CELL_PX  # 16

BACKGROUND = (8, 8, 12)


@dataclass(frozen=True)
class EnvSpec:
    name: str
    num_actions: int
    max_episode_steps: int
    frame_shape: tuple = (3, NATIVE_H, NATIVE_W)

    def __post_init__(self):
        if self.num_actions < 2:
            raise ValueError("environments need at least 2 actions")


class GridEnv:
    """Base: cell-grid state, uint8 native render, float observation."""

    spec: EnvSpec

    def __init__(self):
        self.done = True
        self.t = 0

    # subclasses draw onto the uint8 canvas
    def _draw(self, canvas):
        raise NotImplementedError

    def render_uint8(self):
        """Native frame as uint8 [H, W, 3]."""
        canvas = np.empty((NATIVE_H, NATIVE_W, 3), dtype=np.uint8)
        canvas[:] = BACKGROUND
        self._draw(canvas)
        return canvas

    def observation(self):
        """Float observation [3, H, W] in [0, 1]; exactly render/255."""
        return (self.render_uint8().astype(np.float32) / 255.0).transpose(2, 0, 1)

    def _fill_cell(self, canvas, row, col, color, width_cells=1, height_cells=1):
        y0, x0 = row * CELL_PX, col * CELL_PX
        canvas[y0 : y0 + height_cells * CELL_PX, x0 : x0 + width_cells * CELL_PX] = color

    def _require_live(self):
        if self.done:
            raise EnvError(f"{self.spec.name}: step() called on a finished episode")

    def _require_action(self, action):
        if not 0 <= action < self.spec.num_actions:
            raise EnvError(f"{self.spec.name}: action {action} out of range")
