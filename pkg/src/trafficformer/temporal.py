"""Frequency-domain temporal branches: Fourier attention and the complex FreMLP."""

import numpy as np

from .errors import ConfigError, DimensionError
from .nn import Module, kaiming_uniform, param
from .tensor import abs_, complex_, conj, fft, ifft, imag, matmul, real, relu, softmax, transpose

TIME_AXIS = 1


class FourierAttentionParams(Module):
    def __init__(self, D, rng, heads=4):
        if D % heads:
            raise ConfigError(f"embedding dimension {D} is not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = D // heads
        self.w_q = kaiming_uniform(rng, D, D)
        self.w_k = kaiming_uniform(rng, D, D)
        self.w_v = kaiming_uniform(rng, D, D)


def _split_heads(x, heads):
    # (B, T, N, D) -> (B, N, heads, T, d)
    B, T, N, D = x.shape
    return transpose(x.reshape(B, T, N, heads, D // heads), (0, 2, 3, 1, 4))


def _merge_heads(x):
    # (B, N, heads, T, d) -> (B, T, N, D)
    B, N, h, T, d = x.shape
    return transpose(x, (0, 3, 1, 2, 4)).reshape(B, T, N, h * d)


def fourier_attention(x_main, params, return_weights=False):
    """Attention among the T frequency bins of every node's series.

    Query, key and value projections are transformed along time; the
    complex scores ``Q K^H / sqrt(d)`` are turned into real weights by a
    softmax over their moduli, applied to the value spectrum, and the result
    is brought back with the inverse transform keeping the real part.
    """
    if x_main.ndim != 4:
        raise DimensionError(f"expected (B, T, N, D) input, got {x_main.shape}")
    h = params.heads
    q_f = fft(_split_heads(matmul(x_main, params.w_q), h), axis=-2)
    k_f = fft(_split_heads(matmul(x_main, params.w_k), h), axis=-2)
    v_f = fft(_split_heads(matmul(x_main, params.w_v), h), axis=-2)
    k_h = transpose(k_f, (0, 1, 2, 4, 3))
    scores = matmul(q_f, conj(k_h)) * (1.0 / np.sqrt(params.head_dim))
    weights = softmax(abs_(scores), axis=-1)
    out = real(ifft(matmul(weights, v_f), axis=-2))
    out = _merge_heads(out)
    return (out, weights) if return_weights else out


class FreMLPParams(Module):
    """One complex layer ``W = W_r + j W_i``, ``b = b_r + j b_i``."""

    def __init__(self, D, rng):
        self.w_r = kaiming_uniform(rng, D, D)
        self.w_i = kaiming_uniform(rng, D, D)
        self.b_r = param(np.zeros(D))
        self.b_i = param(np.zeros(D))


def complex_layer(spec, params):
    """Apply ReLU separately to the real and imaginary parts of ``spec @ W + b``."""
    re, im = real(spec), imag(spec)
    out_re = relu(matmul(re, params.w_r) - matmul(im, params.w_i) + params.b_r)
    out_im = relu(matmul(im, params.w_r) + matmul(re, params.w_i) + params.b_i)
    return complex_(out_re, out_im)


def fremlp(x_res, params):
    """Complex MLP on the full two-sided spectrum along time.

    ``params`` is a single :class:`FreMLPParams` or a sequence of them for
    deeper stacks.
    """
    if x_res.ndim != 4:
        raise DimensionError(f"expected (B, T, N, D) input, got {x_res.shape}")
    layers = params if isinstance(params, (list, tuple)) else [params]
    spec = fft(x_res, axis=TIME_AXIS)
    for layer in layers:
        spec = complex_layer(spec, layer)
    return real(ifft(spec, axis=TIME_AXIS))


def fuse(x_main_hat, x_res_hat):
    if x_main_hat.shape != x_res_hat.shape:
        raise DimensionError(f"cannot fuse branch outputs {x_main_hat.shape} and {x_res_hat.shape}")
    return x_main_hat + x_res_hat
