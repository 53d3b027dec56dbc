"""Time-node adaptive gate that splits embeddings into dominant and residual parts."""

import numpy as np

from .errors import DimensionError
from .nn import Module, kaiming_uniform, param
from .tensor import broadcast_to, concat, matmul, sigmoid


class GateParams(Module):
    """Weights of the gate; ``n_inputs`` counts the concatenated D-wide tables."""

    def __init__(self, D, rng, n_inputs=3):
        self.n_inputs = n_inputs
        self.w_g = kaiming_uniform(rng, n_inputs * D, D) if n_inputs else None
        self.b_g = param(np.zeros(D))


def gate(e_tod, e_dow, e_node, params):
    """Sigmoid gate ``(B, T, N, D)`` from calendar and node embeddings.

    Any of the three inputs may be ``None`` (ablations); the remaining ones
    are concatenated in (time-of-day, weekday, node) order. The gate never
    sees the observed flow.
    """
    if params.w_g is None:
        # no conditioning inputs left: a learned constant per feature
        return sigmoid(params.b_g)
    pieces = [e for e in (e_tod, e_dow) if e is not None]
    ref = pieces[0] if pieces else None
    if e_node is None and ref is None:
        raise DimensionError("gate needs at least one embedding to infer its shape")
    D = params.b_g.shape[0]
    if ref is not None:
        B, T = ref.shape[:2]
        for e in pieces:
            if e.shape != (B, T, D):
                raise DimensionError(f"calendar embedding shape {e.shape} != {(B, T, D)}")
    if e_node is not None and e_node.shape[-1] != D:
        raise DimensionError(f"node embedding width {e_node.shape[-1]} != {D}")

    if ref is None:
        return sigmoid(matmul(e_node, params.w_g) + params.b_g)
    if e_node is None:
        feats = concat(pieces, axis=-1)
        return sigmoid((matmul(feats, params.w_g) + params.b_g).reshape(B, T, 1, D))
    N = e_node.shape[0]
    full = (B, T, N, D)
    parts = [broadcast_to(e.reshape(B, T, 1, D), full) for e in pieces]
    parts.append(broadcast_to(e_node, full))
    return sigmoid(matmul(concat(parts, axis=-1), params.w_g) + params.b_g)


def decompose(x_emb, lam):
    """Return ``(x_emb * lam, x_emb * (1 - lam))``."""
    try:
        np.broadcast_shapes(x_emb.shape, lam.shape)
    except ValueError:
        raise DimensionError(f"gate shape {lam.shape} does not match embeddings {x_emb.shape}") from None
    return x_emb * lam, x_emb * (1.0 - lam)
