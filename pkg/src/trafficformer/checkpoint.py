"""Checkpoint container: magic header, JSON metadata and named float64 arrays."""

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .data import Normalizer
from .errors import CheckpointError

MAGIC = b"TFMRCKPT"
VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    normalizer: Normalizer
    epoch: int = 0
    best_val_loss: float = float("inf")
    node_ids: list = field(default_factory=list)

    @classmethod
    def from_model(cls, model, normalizer, epoch=0, best_val_loss=float("inf"), node_ids=()):
        params = {name: p.data.copy() for name, p in model.named_parameters().items()}
        return cls(model.config, params, normalizer, epoch, best_val_loss, list(node_ids))

    def build_model(self):
        from .model import Forecaster

        model = Forecaster(self.config)
        named = model.named_parameters()
        if set(named) != set(self.params):
            missing = sorted(set(named) ^ set(self.params))
            raise CheckpointError(f"checkpoint parameters do not match the model: {missing}")
        for name, p in named.items():
            if p.data.shape != self.params[name].shape:
                raise CheckpointError(f"shape mismatch for {name}: {p.data.shape} vs {self.params[name].shape}")
            p.data = self.params[name].copy()
        return model

    def save(self, path):
        meta = {
            "config": self.config.to_dict(),
            "normalizer": {"mean": self.normalizer.mean, "std": self.normalizer.std,
                           "fitted_on": self.normalizer.fitted_on},
            "epoch": self.epoch,
            "best_val_loss": self.best_val_loss,
            "node_ids": self.node_ids,
        }
        meta_bytes = json.dumps(meta, sort_keys=True).encode()
        buf = io.BytesIO()
        np.savez(buf, **{k: self.params[k] for k in sorted(self.params)})
        with Path(path).open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", VERSION, len(meta_bytes)))
            fh.write(meta_bytes)
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path):
        raw = Path(path).read_bytes()
        if raw[: len(MAGIC)] != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic header)")
        head = len(MAGIC)
        try:
            version, meta_len = struct.unpack("<II", raw[head:head + 8])
            if version != VERSION:
                raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
            meta = json.loads(raw[head + 8:head + 8 + meta_len])
            with np.load(io.BytesIO(raw[head + 8 + meta_len:]), allow_pickle=False) as npz:
                params = {k: npz[k] for k in npz.files}
            config = ModelConfig.from_dict(meta["config"])
            normalizer = Normalizer(**meta["normalizer"])
        except CheckpointError:
            raise
        except Exception as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None
        return cls(config, params, normalizer, meta["epoch"], meta["best_val_loss"], meta["node_ids"])
