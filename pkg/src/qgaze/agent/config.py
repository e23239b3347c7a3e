"""Training configuration with config-file loading and flag overrides.

Config files use INI syntax with a single ``[train]`` section; every field
of TrainConfig is a key. Flags override file values; the effective config
is echoed into output artifacts for provenance.
"""

import configparser
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class TrainConfig:
    env: str = "catch"
    gamma: float = 0.99
    learning_rate: float = 0.00025
    momentum: float = 0.95
    rms_decay: float = 0.95
    rms_eps: float = 1e-6
    batch_size: int = 32
    bptt_steps: int = 4
    clip_norm: float = 10.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_anneal_steps: int = 1_000_000
    replay_capacity: int = 500_000
    warmup_transitions: int = 500
    target_sync_period: int = 1_000
    total_steps: int = 2_000_000
    train_every: int = 1
    loss_all_steps: bool = False
    hidden_size: int = 64

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.epsilon_anneal_steps <= 0:
            raise ValueError("epsilon_anneal_steps must be positive")
        if self.bptt_steps < 1 or self.batch_size < 1 or self.train_every < 1:
            raise ValueError("bptt_steps, batch_size, train_every must be >= 1")

    def to_dict(self):
        return asdict(self)

    def merged(self, overrides):
        """New config with non-None override values applied."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        if "train" not in parser:
            raise ValueError(f"{path}: missing [train] section")
        section = parser["train"]
        kwargs = {}
        known = {f.name: f.type for f in fields(cls)}
        for key in section:
            if key not in known:
                raise ValueError(f"{path}: unknown config key '{key}'")
            raw = section[key]
            typ = known[key]
            if typ is bool or typ == "bool":
                kwargs[key] = section.getboolean(key)
            elif typ is int or typ == "int":
                kwargs[key] = int(raw)
            elif typ is float or typ == "float":
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
        return cls(**kwargs)
