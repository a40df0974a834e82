"""Image-quality metrics: relative l2 error, PSNR and HaarPSI.

Volumes are compared as a whole for ``rel_l2`` and ``psnr``; ``hpsi`` is a
2-D index and is averaged over frames when given stacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .core import ShapeError

#: Value reported by :func:`psnr` for identical images (MSE = 0).
PSNR_CAP = 999.0


@dataclass(frozen=True)
class HaarPsiConfig:
    """Constants of the Haar perceptual similarity index.

    Defaults are the grayscale values of the index's defining publication.
    """

    similarity_constant: float = 30.0
    alpha: float = 4.2
    scales: int = 3
    subsample: bool = True
    #: both images are jointly rescaled to [0, dynamic_range] first
    dynamic_range: float = 255.0


@dataclass
class MetricsReport:
    rel_l2: float
    psnr: float
    hpsi: float
    per_frame: list | None = field(default=None)

    def __post_init__(self):
        if self.rel_l2 < 0 or not (0.0 <= self.hpsi <= 1.0):
            raise ValueError(f"invalid metrics rel_l2={self.rel_l2}, hpsi={self.hpsi}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.rel_l2, self.psnr, self.hpsi)


def _pair(recon, reference) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(recon, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: recon {a.shape} vs reference {b.shape}")
    return a, b


def rel_l2_error(recon, reference) -> float:
    """``||recon - reference|| / ||reference||``."""
    a, b = _pair(recon, reference)
    denom = float(np.linalg.norm(b))
    if denom == 0.0:
        raise ValueError("relative error undefined for an all-zero reference")
    return float(np.linalg.norm(a - b)) / denom


def psnr(recon, reference, peak: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB.

    ``peak`` defaults to ``max(reference)``.  Identical inputs give
    :data:`PSNR_CAP` instead of infinity, and no result exceeds the cap.
    """
    a, b = _pair(recon, reference)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    if peak is None:
        peak = float(np.max(b))
    if peak <= 0.0:
        return -math.inf
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def _conv(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # correlation with ``kernel``, same-size output
    return convolve2d(img, np.rot90(kernel, 2), mode="same")


def _haar_responses(img: np.ndarray, scales: int) -> np.ndarray:
    """Vertical-edge responses for scales 1..S followed by horizontal ones."""
    out = np.empty((2 * scales,) + img.shape)
    for s in range(1, scales + 1):
        h = 2.0 ** (-s) * np.ones(2 ** s)
        h[: h.size // 2] *= -1.0
        kernel = np.outer(np.ones_like(h), h)
        out[s - 1] = _conv(img, kernel)
        out[s - 1 + scales] = _conv(img, kernel.T)
    return out


def _sigmoid(x, a):
    return 1.0 / (1.0 + np.exp(-a * x))


def _logit(x, a):
    return math.log(x / (1.0 - x)) / a


def hpsi(recon, reference, cfg: HaarPsiConfig = HaarPsiConfig()) -> float:
    """Haar wavelet-based perceptual similarity index of two 2-D images.

    Both images are rescaled together (one min/max over the pair) to
    ``[0, cfg.dynamic_range]``, so the score is symmetric in its arguments.
    Identical images score 1.

    Examples
    --------
    >>> import numpy as np
    >>> x = np.arange(64.0).reshape(8, 8)
    >>> hpsi(x, x)
    1.0
    """
    a, b = _pair(recon, reference)
    if a.ndim != 2:
        raise ShapeError(f"hpsi compares 2-D images, got shape {a.shape}")
    if np.array_equal(a, b):
        return 1.0
    lo = min(a.min(), b.min())
    span = max(a.max(), b.max()) - lo
    a = (a - lo) * (cfg.dynamic_range / span)
    b = (b - lo) * (cfg.dynamic_range / span)
    if cfg.subsample:
        box = np.full((2, 2), 0.25)
        a = _conv(a, box)[::2, ::2]
        b = _conv(b, box)[::2, ::2]

    S = cfg.scales
    C = cfg.similarity_constant
    ca = _haar_responses(a, S)
    cb = _haar_responses(b, S)
    num = 0.0
    den = 0.0
    for o in range(2):
        # coarsest scale weights, two finest scales for similarity
        w = np.maximum(np.abs(ca[S - 1 + o * S]), np.abs(cb[S - 1 + o * S]))
        ma = np.abs(ca[o * S:o * S + 2])
        mb = np.abs(cb[o * S:o * S + 2])
        local = np.sum((2 * ma * mb + C) / (ma ** 2 + mb ** 2 + C), axis=0) / 2
        num += float(np.sum(_sigmoid(local, cfg.alpha) * w))
        den += float(np.sum(w))
    if den == 0.0:
        return 1.0
    ratio = min(num / den, _sigmoid(1.0, cfg.alpha))
    score = _logit(ratio, cfg.alpha) ** 2
    return float(min(1.0, max(0.0, score)))


def _hpsi_frames(a: np.ndarray, b: np.ndarray, cfg: HaarPsiConfig) -> float:
    if a.ndim == 2:
        return hpsi(a, b, cfg)
    return float(np.mean([hpsi(x, y, cfg) for x, y in zip(a, b)]))


def evaluate(recon, reference, peak: float | None = None, cfg: HaarPsiConfig = HaarPsiConfig(),
             per_frame: bool = False) -> MetricsReport:
    """All three metrics for an image or a ``(frames, N, N)`` stack."""
    a, b = _pair(recon, reference)
    frames = None
    if per_frame:
        if a.ndim != 3:
            raise ShapeError("per-frame metrics need a (frames, N, N) stack")
        frames = [evaluate(x, y, peak, cfg).as_tuple() for x, y in zip(a, b)]
    return MetricsReport(rel_l2_error(a, b), psnr(a, b, peak), _hpsi_frames(a, b, cfg), frames)


def mean_first_last(recon, reference, peak: float | None = None,
                    cfg: HaarPsiConfig = HaarPsiConfig()) -> MetricsReport:
    """Average of the metrics of the first and the last frame."""
    a, b = _pair(recon, reference)
    if a.ndim != 3:
        raise ShapeError("mean_first_last needs a (frames, N, N) stack")
    first = evaluate(a[0], b[0], peak, cfg)
    last = evaluate(a[-1], b[-1], peak, cfg)
    vals = [(x + y) / 2 for x, y in zip(first.as_tuple(), last.as_tuple())]
    return MetricsReport(*vals, per_frame=[first.as_tuple(), last.as_tuple()])
