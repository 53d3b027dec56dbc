"""Model and training configuration."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

ABLATIONS = ("no_DA", "no_DM", "no_NE", "no_TE", "no_SA", "no_mask")


@dataclass
class ModelConfig:
    """Every hyperparameter and ablation switch of a run.

    Together with ``seed`` this fully determines training. ``N`` is usually
    filled in from the data when left as ``None``.
    """

    T: int = 12
    H: int = 12
    N: int = None
    C: int = 3
    D: int = 64
    L: int = 1
    heads: int = 4
    tau: float = 0.5
    epsilon: float = 1e-6
    mask_init_scale: float = 1e-3
    huber_delta: float = 1.0
    fremlp_depth: int = 1
    residual: bool = False
    steps_per_day: int = 288
    lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 20
    lr_milestones: list = field(default_factory=lambda: [40, 70])
    lr_decay: float = 0.1
    mape_threshold: float = 1.0
    seed: int = 0
    no_DA: bool = False
    no_DM: bool = False
    no_NE: bool = False
    no_TE: bool = False
    no_SA: bool = False
    no_mask: bool = False

    def validate(self):
        for name in ("T", "H", "C", "D", "L", "heads", "batch_size", "max_epochs", "fremlp_depth"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.N is not None and self.N < 1:
            raise ConfigError(f"N must be positive, got {self.N}")
        if self.D % self.heads:
            raise ConfigError(f"D={self.D} is not divisible by heads={self.heads}")
        if self.no_DA and self.no_DM:
            raise ConfigError("no_DA and no_DM are alternative variants; set at most one")
        for name in ("tau", "epsilon", "huber_delta", "lr", "steps_per_day"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.patience < 0 or self.mask_init_scale < 0 or self.mape_threshold < 0:
            raise ConfigError("patience, mask_init_scale and mape_threshold must be non-negative")
        return self

    @property
    def ablations(self):
        return [a for a in ABLATIONS if getattr(self, a)]

    @property
    def uses_decomposition(self):
        return not (self.no_DA or self.no_DM)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.lr_milestones = list(cfg.lr_milestones)
        return cfg.validate()

    @classmethod
    def load(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(raw)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ModelConfig.from_dict(d)
