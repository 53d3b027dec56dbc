"""The full forecaster: embedding, decomposition, temporal and spatial blocks, output head."""

import numpy as np

from .config import ModelConfig
from .decomposition import GateParams, decompose, gate
from .embedding import EmbeddingSet
from .errors import ConfigError, DimensionError
from .nn import Linear, Module
from .spatial import MaskParams, SpatialAttentionParams, connectivity_scores, masked_spatial_attention, sample_mask
from .temporal import FourierAttentionParams, FreMLPParams, fourier_attention, fremlp, fuse
from .tensor import Tensor, abs_, mean, transpose


class Block(Module):
    """One temporal + spatial block with its own parameters."""

    def __init__(self, cfg, rng):
        D = cfg.D
        n_gate = (0 if cfg.no_TE else 2) + (0 if cfg.no_NE else 1)
        self.gate = GateParams(D, rng, n_gate) if cfg.uses_decomposition else None
        self.fourier = FourierAttentionParams(D, rng, cfg.heads) if not cfg.no_DM else None
        self.fremlp = [FreMLPParams(D, rng) for _ in range(cfg.fremlp_depth)] if not cfg.no_DA else None
        self.spatial = SpatialAttentionParams(D, rng, cfg.heads) if not cfg.no_SA else None
        self._residual = cfg.residual

    def temporal(self, h, emb):
        if self.gate is None:
            if self.fourier is not None:
                return fourier_attention(h, self.fourier)
            return fremlp(h, self.fremlp)
        _, e_tod, e_dow, e_node = emb
        lam = gate(e_tod, e_dow, e_node, self.gate)
        x_main, x_res = decompose(h, lam)
        return fuse(fourier_attention(x_main, self.fourier), fremlp(x_res, self.fremlp))

    def __call__(self, h, emb, mask):
        out = self.temporal(h, emb)
        if self.spatial is not None:
            out = masked_spatial_attention(out, mask, self.spatial)
        return out + h if self._residual else out


class Forecaster(Module):
    """Maps a :class:`~trafficformer.data.WindowBatch` to normalized predictions ``(B, H, N)``."""

    def __init__(self, cfg: ModelConfig, rng=None):
        cfg.validate()
        if cfg.N is None:
            raise ConfigError("config.N must be set before building the model")
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        self._cfg = cfg
        needs_gate = cfg.uses_decomposition
        self.embedding = EmbeddingSet(
            cfg.C, cfg.D, cfg.N, rng, cfg.steps_per_day,
            use_time=needs_gate and not cfg.no_TE,
            use_node=needs_gate and not cfg.no_NE,
        )
        self.blocks = [Block(cfg, rng) for _ in range(cfg.L)]
        use_mask = not (cfg.no_SA or cfg.no_mask)
        self.mask = MaskParams(cfg.T, rng, cfg.epsilon, cfg.tau, cfg.mask_init_scale) if use_mask else None
        self.head = Linear(cfg.T * cfg.D, cfg.H, rng)

    @property
    def config(self):
        return self._cfg

    def compute_mask(self, batch, mode="eval", noise=None, rng=None, hard=True):
        """The per-window :class:`SpatialMask`, or ``None`` when the mask is ablated."""
        if self.mask is None:
            return None
        scores = connectivity_scores(Tensor(batch.flow), self.mask)
        return sample_mask(scores, self.mask, mode, noise=noise, rng=rng, hard=hard)

    def __call__(self, batch, mode="eval", noise=None, rng=None, hard=True, return_mask=False):
        cfg = self._cfg
        B, T, N, C = batch.x.shape
        if (T, N, C) != (cfg.T, cfg.N, cfg.C):
            raise DimensionError(f"batch (T, N, C)={(T, N, C)} does not match config {(cfg.T, cfg.N, cfg.C)}")
        emb = self.embedding(batch)
        spatial = self.compute_mask(batch, mode, noise, rng, hard)
        if spatial is not None:
            mask = spatial.mask
        else:
            mask = Tensor(np.ones((B, N, N)))
        h = emb[0]
        for block in self.blocks:
            h = block(h, emb, mask)
        flat = transpose(h, (0, 2, 1, 3)).reshape(B, N, T * cfg.D)
        y = transpose(self.head(flat), (0, 2, 1))
        return (y, spatial) if return_mask else y

    forward = __call__


def huber_loss(pred, target, delta=1.0):
    """Mean Huber loss: ``x^2 / 2`` inside ``|x| <= delta``, linear outside."""
    if delta <= 0:
        raise ConfigError(f"Huber delta must be positive, got {delta}")
    if tuple(pred.shape) != tuple(np.shape(target.data if isinstance(target, Tensor) else target)):
        raise DimensionError(f"prediction {pred.shape} and target shapes differ")
    x = pred - target
    a = abs_(x)
    inside = (a.data <= delta).astype(np.float64)
    quad = x * x * 0.5
    lin = (a - 0.5 * delta) * delta
    return mean(quad * inside + lin * (1.0 - inside))
