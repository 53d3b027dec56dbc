"""Discrete Fourier transforms along an arbitrary axis.

Forward transforms are unnormalized and inverse transforms carry the 1/n
factor. Power-of-two lengths use an iterative radix-2 Cooley-Tukey pass,
other lengths up to ``DIRECT_MAX`` use a cached DFT matrix, and longer
lengths go through Bluestein's chirp-z algorithm on top of the radix-2 path.
"""

from functools import lru_cache

import numpy as np

from .errors import DimensionError

DIRECT_MAX = 64


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _dft_matrix(n):
    k = np.arange(n)
    # reduce the exponent mod n before scaling, keeps twiddles exact-ish for large k*n
    phase = (np.outer(k, k) % n) * (-2.0 * np.pi / n)
    mat = np.exp(1j * phase)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=64)
def _twiddles(n):
    tw = np.exp(-2j * np.pi * np.arange(n // 2) / n)
    tw.setflags(write=False)
    return tw


def _radix2(a):
    """Forward radix-2 FFT over the last axis of a complex array."""
    n = a.shape[-1]
    if n == 1:
        return a.copy()
    out = a[..., _bit_reverse(n)]
    full_tw = _twiddles(n)
    size = 2
    while size <= n:
        half = size // 2
        tw = full_tw[:: n // size]
        blocks = out.reshape(out.shape[:-1] + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        blocks = np.concatenate([even + odd, even - odd], axis=-1)
        out = blocks.reshape(a.shape)
        size *= 2
    return out


@lru_cache(maxsize=32)
def _bluestein_plan(n):
    k = np.arange(n)
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1 << (2 * n - 1).bit_length()
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:])[::-1]
    b_hat = _radix2(b)
    chirp.setflags(write=False)
    b_hat.setflags(write=False)
    return chirp, b_hat, m


def _bluestein(a):
    n = a.shape[-1]
    chirp, b_hat, m = _bluestein_plan(n)
    padded = np.zeros(a.shape[:-1] + (m,), dtype=np.complex128)
    padded[..., :n] = a * chirp
    conv = _radix2(padded) * b_hat
    # inverse radix-2 via conjugation
    conv = np.conj(_radix2(np.conj(conv))) / m
    return conv[..., :n] * chirp


def _forward_last(a):
    n = a.shape[-1]
    if _is_pow2(n):
        return _radix2(a)
    if n <= DIRECT_MAX:
        return a @ _dft_matrix(n).T
    return _bluestein(a)


def _check_axis(a, axis):
    if not -a.ndim <= axis < a.ndim:
        raise DimensionError(f"axis {axis} is out of range for array of shape {a.shape}")
    axis %= a.ndim
    if a.shape[axis] < 1:
        raise DimensionError(f"cannot transform an empty axis (shape {a.shape}, axis {axis})")
    return axis


def fft(a, axis=-1):
    """Unnormalized forward DFT of ``a`` along ``axis``; always complex."""
    a = np.asarray(a)
    axis = _check_axis(a, axis)
    moved = np.moveaxis(a.astype(np.complex128, copy=False), axis, -1)
    return np.moveaxis(_forward_last(moved), -1, axis)


def ifft(a, axis=-1):
    """Inverse DFT (scaled by 1/n) of ``a`` along ``axis``; always complex."""
    a = np.asarray(a)
    axis = _check_axis(a, axis)
    n = a.shape[axis]
    moved = np.moveaxis(a.astype(np.complex128, copy=False), axis, -1)
    out = np.conj(_forward_last(np.conj(moved))) / n
    return np.moveaxis(out, -1, axis)
