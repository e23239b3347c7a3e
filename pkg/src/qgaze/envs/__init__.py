from .base import EnvSpec, GRID_COLS, GRID_ROWS, CELL_PX
from .catch import CatchEnv
from .minipong import MiniPongEnv
from .replayfile import EpisodeReplay, load_replay, record_episode, save_replay

ENVS = {"catch": CatchEnv, "minipong": MiniPongEnv}


def make_env(name):
    try:
        return ENVS[name]()
    except KeyError:
        raise ValueError(f"unknown environment '{name}' (have: {', '.join(sorted(ENVS))})")


__all__ = [
    "EnvSpec",
    "CatchEnv",
    "MiniPongEnv",
    "EpisodeReplay",
    "load_replay",
    "save_replay",
    "record_episode",
    "make_env",
    "ENVS",
    "GRID_COLS",
    "GRID_ROWS",
    "CELL_PX",
]
