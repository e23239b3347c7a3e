"""Frame preprocessing: native RGB render -> 84x84 grayscale in [0, 1].

Channels are averaged to luminance and the result is box-filter (area)
resized, which keeps small on-screen objects visible at the target size.
"""

import numpy as np

from ..errors import ShapeError
from ..imageops import area_resize

TARGET_HW = (84, 84)


def preprocess_frame(obs):
    """obs: [3, H, W] float in [0, 1] -> [84, 84] float32 in [0, 1]."""
    obs = np.asarray(obs)
    if obs.ndim != 3 or obs.shape[0] != 3:
        raise ShapeError(f"expected [3, H, W] observation, got {obs.shape}")
    lum = obs.astype(np.float32).mean(axis=0)
    small = area_resize(lum, *TARGET_HW)
    return np.clip(small, 0.0, 1.0).astype(np.float32)
