"""Input projection and the learnable calendar and node tables."""

import numpy as np

from .nn import Linear, Module, uniform_init
from .tensor import Tensor, relu, take

DAYS_PER_WEEK = 7


class EmbeddingSet(Module):
    """Projection MLP ``C -> D -> D`` plus time-of-day, weekday and node tables.

    Tables are created only when some consumer needs them, so ablated
    models do not carry unused parameters.
    """

    def __init__(self, C, D, N, rng, steps_per_day=288, use_time=True, use_node=True):
        self.proj_in = Linear(C, D, rng)
        self.proj_out = Linear(D, D, rng)
        bound = 1.0 / np.sqrt(D)
        self.tod_table = uniform_init(rng, (steps_per_day, D), bound) if use_time else None
        self.dow_table = uniform_init(rng, (DAYS_PER_WEEK, D), bound) if use_time else None
        self.node_table = uniform_init(rng, (N, D), bound) if use_node else None

    def project(self, x):
        return self.proj_out(relu(self.proj_in(x)))

    def __call__(self, batch):
        """Return ``(x_emb, e_tod, e_dow, e_node)``; absent tables give ``None``."""
        x_emb = self.project(Tensor(batch.x))
        e_tod = take(self.tod_table, batch.tod_index) if self.tod_table is not None else None
        e_dow = take(self.dow_table, batch.dow_index) if self.dow_table is not None else None
        return x_emb, e_tod, e_dow, self.node_table


def embed(batch, emb):
    return emb(batch)
