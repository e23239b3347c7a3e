"""qgaze: recurrent Q-learning with soft spatial attention on toy pixel games.

Subpackages
-----------
kernels   -- hot numeric kernels (compiled extension with NumPy fallback)
nn        -- minimal dense-tensor layers with manual backward passes
attention -- soft spatial attention over convolutional feature slices
agent     -- Q-network assembly, replay memory, training loop, checkpoints
envs      -- deterministic toy pixel environments and episode replays
saliency  -- bottom-up saliency baselines (center-surround and graph-based)
scoring   -- fixation-prediction metrics (NSS, AUC) and report assembly
service   -- HTTP backend for the browser annotation tool
"""

__version__ = "0.1.0"
