"""Input-dependent sparse spatial mask and masked spatial attention."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DimensionError, NumericError
from .nn import Module, kaiming_uniform, param
from .tensor import (
    Tensor, as_tensor, clip, concat, fft, imag, log, matmul, max_, real, sigmoid,
    softmax, straight_through, sum_, transpose,
)

METRIC_JITTER = 1e-6
PROB_CLAMP = 1e-6
LARGE = 1e9


class MaskParams(Module):
    """Learned metric factor ``A``; the distance metric is ``A A^T + 1e-6 I``.

    ``A`` starts small so the metric is close to the jitter term and
    near-identical nodes score comparably to ``epsilon``; a unit-scale start
    would push every off-diagonal probability towards zero.
    """

    def __init__(self, T, rng, epsilon=1e-6, temperature=0.5, init_scale=1e-3):
        if epsilon <= 0 or temperature <= 0:
            raise ConfigError("epsilon and temperature must be positive")
        F = 2 * T
        self.factor = param(rng.normal(0.0, init_scale / np.sqrt(F), size=(F, F)))
        self.epsilon = epsilon
        self.temperature = temperature

    def metric(self):
        a = self.factor.data
        return a @ a.T + METRIC_JITTER * np.eye(a.shape[0])


@dataclass
class SpatialMask:
    """Scores ``S``, max-normalized probabilities ``P`` and the binary mask ``M``."""

    scores: Tensor
    probs: Tensor
    mask: Tensor

    @property
    def binary(self):
        return self.mask.data


def spectral_features(x_flow):
    """Per-node real and imaginary parts of the time spectrum, ``(B, N, 2T)``."""
    xf = transpose(fft(as_tensor(x_flow), axis=1), (0, 2, 1))
    return concat([real(xf), imag(xf)], axis=-1)


def connectivity_scores(x_flow, params):
    """``S_ij = 1 / (d_ij + eps)`` with ``d_ij`` a quadratic form over spectral differences."""
    x_flow = as_tensor(x_flow)
    if x_flow.ndim != 3:
        raise DimensionError(f"expected (B, T, N) flow, got {x_flow.shape}")
    if params.factor.shape[0] != 2 * x_flow.shape[1]:
        raise DimensionError(f"metric size {params.factor.shape} does not match T={x_flow.shape[1]}")
    f = spectral_features(x_flow)
    B, N, F = f.shape
    diff = f.reshape(B, N, 1, F) - f.reshape(B, 1, N, F)
    proj = matmul(diff, params.factor)
    dist = sum_(proj * proj, axis=-1) + METRIC_JITTER * sum_(diff * diff, axis=-1)
    return 1.0 / (dist + params.epsilon)


def draw_noise(rng, shape):
    """Difference of two independent standard Gumbel draws (logistic noise)."""
    return rng.gumbel(size=shape) - rng.gumbel(size=shape)


def _force_diagonal(m, N):
    eye = np.eye(N)
    return m * (1.0 - eye) + eye


def sample_mask(scores, params, mode="eval", noise=None, rng=None, hard=True):
    """Max-normalize scores and draw a binary mask.

    In ``train`` mode a Gumbel-Sigmoid relaxation at temperature ``tau`` is
    sampled; with ``hard=True`` the forward pass sees the thresholded mask
    and gradients follow the soft relaxation (straight-through). ``noise``
    fixes the logistic perturbation, otherwise it is drawn from ``rng``.
    ``eval`` mode is deterministic: ``M = 1[P > 0.5]``. The diagonal is
    always 1 so no attention row is empty.
    """
    scores = as_tensor(scores)
    if not np.all(np.isfinite(scores.data)):
        raise NumericError("connectivity scores contain non-finite values")
    if (scores.data < 0).any():
        raise ContractError("connectivity scores must be non-negative")
    B, N, _ = scores.shape
    probs = scores / max_(scores, axis=(1, 2), keepdims=True)

    if mode == "eval":
        mask = Tensor(_force_diagonal((probs.data > 0.5).astype(np.float64), N))
        return SpatialMask(scores, probs, mask)
    if mode != "train":
        raise ContractError(f"unknown mask mode {mode!r}")

    if noise is None:
        if rng is None:
            raise ContractError("train-mode masks need fixed noise or a generator")
        noise = draw_noise(rng, (B, N, N))
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (B, N, N):
        raise DimensionError(f"noise shape {noise.shape} != {(B, N, N)}")
    p = clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    logits = log(p) - log(1.0 - p)
    soft = sigmoid((logits + noise) * (1.0 / params.temperature))
    relaxed = straight_through((soft.data > 0.5).astype(np.float64), soft) if hard else soft
    return SpatialMask(scores, probs, _force_diagonal(relaxed, N))


class SpatialAttentionParams(Module):
    def __init__(self, D, rng, heads=4):
        if D % heads:
            raise ConfigError(f"embedding dimension {D} is not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = D // heads
        self.w_q = kaiming_uniform(rng, D, D)
        self.w_k = kaiming_uniform(rng, D, D)
        self.w_v = kaiming_uniform(rng, D, D)


def _heads(x, h):
    # (B, T, N, D) -> (B, T, h, N, d)
    B, T, N, D = x.shape
    return transpose(x.reshape(B, T, N, h, D // h), (0, 1, 3, 2, 4))


def masked_spatial_attention(x_hat, mask, params, return_weights=False):
    """Attention over the N node tokens at every timestep, restricted by ``mask``.

    Masked scores are ``s * M + (1 - M) * (-1e9)``; one mask per sample is
    shared by all timesteps and heads.
    """
    mask = as_tensor(mask)
    B, T, N, D = x_hat.shape
    if mask.shape != (B, N, N):
        raise DimensionError(f"mask shape {mask.shape} != {(B, N, N)}")
    if (mask.data.sum(axis=-1) == 0).any():
        raise ContractError("a mask row is empty; the diagonal must be kept")
    h = params.heads
    q = _heads(matmul(x_hat, params.w_q), h)
    k = _heads(matmul(x_hat, params.w_k), h)
    v = _heads(matmul(x_hat, params.w_v), h)
    scores = matmul(q, transpose(k, (0, 1, 2, 4, 3))) * (1.0 / np.sqrt(params.head_dim))
    m = mask.reshape(B, 1, 1, N, N)
    weights = softmax(scores * m + (1.0 - m) * (-LARGE), axis=-1)
    out = transpose(matmul(weights, v), (0, 1, 3, 2, 4)).reshape(B, T, N, D)
    return (out, weights) if return_weights else out
