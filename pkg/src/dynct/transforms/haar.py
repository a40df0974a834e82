"""Orthonormal separable 2-D Haar wavelet transform.

Coefficients are stored in the usual Mallat layout inside an array of the
image's shape: the coarsest approximation sits in the top-left
``(N / 2**levels)`` square, detail bands fill the remaining quadrants of each
level.  Leading axes are treated as a batch (e.g. a stack of frames).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import LinearMap, ShapeError

_S = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class WaveletConfig:
    levels: int = 4

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be positive")


def _check(x: np.ndarray, cfg: WaveletConfig):
    if x.ndim < 2:
        raise ShapeError("Haar transform needs at least 2-D input")
    step = 1 << cfg.levels
    h, w = x.shape[-2:]
    if h % step or w % step:
        raise ShapeError(f"image {h}x{w} not divisible by 2^{cfg.levels}: "
                         "pad or crop to multiple of 2^levels")


def _analysis_1d(x: np.ndarray, axis: int) -> np.ndarray:
    x = np.moveaxis(x, axis, -1)
    even, odd = x[..., 0::2], x[..., 1::2]
    out = np.concatenate(((even + odd) * _S, (even - odd) * _S), axis=-1)
    return np.moveaxis(out, -1, axis)


def _synthesis_1d(c: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(c, axis, -1)
    half = c.shape[-1] // 2
    a, d = c[..., :half], c[..., half:]
    out = np.empty_like(c)
    out[..., 0::2] = (a + d) * _S
    out[..., 1::2] = (a - d) * _S
    return np.moveaxis(out, -1, axis)


def haar_forward(x, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check(x, cfg)
    out = x.copy()
    h, w = x.shape[-2:]
    for _ in range(cfg.levels):
        block = out[..., :h, :w]
        block = _analysis_1d(_analysis_1d(block, -1), -2)
        out[..., :h, :w] = block
        h //= 2
        w //= 2
    return out


def haar_inverse(c, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    _check(c, cfg)
    out = c.copy()
    h, w = c.shape[-2:]
    sizes = [(h >> k, w >> k) for k in range(cfg.levels)]
    for hh, ww in reversed(sizes):
        block = out[..., :hh, :ww]
        out[..., :hh, :ww] = _synthesis_1d(_synthesis_1d(block, -2), -1)
    return out


def haar_map(shape: tuple[int, ...], cfg: WaveletConfig = WaveletConfig()) -> LinearMap:
    """Haar transform as a :class:`LinearMap`; orthogonal, so adjoint = inverse."""
    _check(np.empty(shape, dtype=np.float64), cfg)
    return LinearMap(shape, shape, lambda x: haar_forward(x, cfg), lambda c: haar_inverse(c, cfg),
                     name=f"Haar{tuple(shape)}x{cfg.levels}")
