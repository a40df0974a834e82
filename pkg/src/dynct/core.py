"""Linear-operator contract and generic numerical utilities.

Every operator in the package (projectors, block operators, wavelet and
shearlet transforms) is a :class:`LinearMap` acting on real float64 arrays
of a fixed shape.  Shapes are carried explicitly; ``input_len`` and
``output_len`` give the flattened sizes.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

#: Environment variable selecting the FFT worker count (default: all cores).
THREADS_ENV = "DYNCT_NUM_THREADS"

#: Relative margin added to spectral-norm estimates before normalizing.
SAFETY_MARGIN = 0.01


class ShapeError(ValueError):
    """Raised when an array does not conform to an operator or geometry."""


def fft_workers() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def default_rng(seed: int | None) -> np.random.Generator:
    """Seeded PCG64 generator used for every random draw in the package."""
    return np.random.Generator(np.random.PCG64(seed))


def as_real_array(x, shape: tuple[int, ...] | None = None, name: str = "array") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        if arr.ndim == 1 and arr.size == math.prod(shape):
            arr = arr.reshape(shape)
        else:
            raise ShapeError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def check_finite(x: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_image(image, size: int | None = None) -> np.ndarray:
    """Validate an ``Image2D``: a finite 2-D float array (rows, columns)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"image must be 2-D, got shape {arr.shape}")
    if size is not None and arr.shape != (size, size):
        raise ShapeError(f"image must be {size}x{size}, got {arr.shape}")
    return check_finite(arr, "image")


def check_volume(stack, frames: int | None = None) -> np.ndarray:
    """Validate a ``VolumeStack``: a finite (frames, height, width) float array."""
    arr = np.asarray(stack, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"volume stack must be 3-D (frames, height, width), got {arr.shape}")
    if frames is not None and arr.shape[0] != frames:
        raise ShapeError(f"volume stack has {arr.shape[0]} frames, expected {frames}")
    return check_finite(arr, "volume stack")


@dataclass(frozen=True)
class LinearMap:
    """A real linear operator with an explicit adjoint.

    ``apply`` maps arrays of ``input_shape`` to arrays of ``output_shape``;
    ``apply_adjoint`` goes the other way.  Flat vectors of the right length
    are reshaped on the way in.  Calls are reentrant.
    """

    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    apply_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    adjoint_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    name: str = "LinearMap"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(n) for n in self.input_shape))
        object.__setattr__(self, "output_shape", tuple(int(n) for n in self.output_shape))
        if min(self.input_shape + self.output_shape, default=1) < 1:
            raise ShapeError(f"{self.name}: shapes must be positive")

    @property
    def input_len(self) -> int:
        return math.prod(self.input_shape)

    @property
    def output_len(self) -> int:
        return math.prod(self.output_shape)

    def apply(self, x) -> np.ndarray:
        x = as_real_array(x, self.input_shape, f"{self.name} input")
        out = self.apply_fn(x)
        if out.shape != self.output_shape:
            raise ShapeError(f"{self.name}: apply produced {out.shape}, declared {self.output_shape}")
        return out

    def apply_adjoint(self, z) -> np.ndarray:
        z = as_real_array(z, self.output_shape, f"{self.name} adjoint input")
        out = self.adjoint_fn(z)
        if out.shape != self.input_shape:
            raise ShapeError(f"{self.name}: adjoint produced {out.shape}, declared {self.input_shape}")
        return out

    __call__ = apply

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.output_shape, self.input_shape, self.adjoint_fn, self.apply_fn,
                         name=f"{self.name}^T")

    def scaled(self, scale: float) -> "LinearMap":
        s = float(scale)
        return LinearMap(self.input_shape, self.output_shape,
                         lambda x: s * self.apply_fn(x),
                         lambda z: s * self.adjoint_fn(z),
                         name=f"{s:g}*{self.name}")


@dataclass(frozen=True)
class NormalizedMap(LinearMap):
    """``scale * inner`` with ``scale`` the reciprocal of inner's spectral norm."""

    inner: LinearMap | None = field(default=None, repr=False)
    scale: float = 1.0


def identity_map(shape: tuple[int, ...]) -> LinearMap:
    return LinearMap(shape, shape, lambda x: x.copy(), lambda z: z.copy(), name="Identity")


def matrix_map(matrix) -> LinearMap:
    """Wrap an explicit dense matrix (mainly for tests and small problems)."""
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError("matrix_map needs a 2-D matrix")
    return LinearMap((mat.shape[1],), (mat.shape[0],), lambda x: mat @ x, lambda z: mat.T @ z,
                     name=f"Matrix{mat.shape}")


def dot_test(op: LinearMap, trials: int = 20, seed: int = 0) -> dict:
    """Check ``<Ax, z> == <x, A^T z>`` on random vectors.

    Returns a report with the maximum of
    ``|<Ax, z> - <x, A^T z>| / (||Ax|| ||z|| + eps)`` over ``trials`` draws.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(op.input_shape)
        z = rng.standard_normal(op.output_shape)
        ax = op.apply(x)
        atz = op.apply_adjoint(z)
        lhs = float(np.vdot(ax, z))
        rhs = float(np.vdot(x, atz))
        denom = float(np.linalg.norm(ax) * np.linalg.norm(z)) + np.finfo(float).eps
        worst = max(worst, abs(lhs - rhs) / denom)
    return {"max_relative_discrepancy": worst, "trials": trials}


class PowerIterationResult(NamedTuple):
    value: float
    iterations: int
    converged: bool
    zero_operator: bool


def power_iteration_lambda_max(op: LinearMap, max_iters: int = 200, tol: float = 1e-8,
                               seed: int = 0, full_output: bool = False):
    """Estimate the largest eigenvalue of ``B^T B`` by power iteration.

    Iterates ``x <- B^T B x / ||B^T B x||`` from a seeded Gaussian start and
    stops once the Rayleigh quotient changes by less than ``tol`` relative
    to its current value.  A zero operator yields ``0.0`` (flagged through
    ``zero_operator`` when ``full_output`` is set) instead of raising.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = default_rng(seed)
    x = rng.standard_normal(op.input_shape)
    x /= np.linalg.norm(x)
    lam = 0.0
    converged = False
    k = 0
    for k in range(1, max_iters + 1):
        y = op.apply_adjoint(op.apply(x))
        lam_new = float(np.vdot(x, y))
        ynorm = float(np.linalg.norm(y))
        if ynorm == 0.0:
            logger.warning("%s: power iteration hit the zero vector; operator is zero", op.name)
            result = PowerIterationResult(0.0, k, True, True)
            return result if full_output else 0.0
        x = y / ynorm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    result = PowerIterationResult(lam, k, converged, False)
    return result if full_output else lam


def normalize_map(op: LinearMap, seed: int = 0, max_iters: int = 500, tol: float = 1e-9,
                  safety_margin: float = SAFETY_MARGIN) -> NormalizedMap:
    """Rescale ``op`` so its spectral norm is at most one.

    Power iteration underestimates ``lambda_max``, so the estimate is
    inflated by ``safety_margin`` before taking ``1/sqrt``.
    """
    est = power_iteration_lambda_max(op, max_iters=max_iters, tol=tol, seed=seed, full_output=True)
    if est.zero_operator or est.value <= 0.0:
        raise ValueError("cannot normalize zero map")
    scale = 1.0 / math.sqrt(est.value * (1.0 + safety_margin))
    inner = op
    return NormalizedMap(op.input_shape, op.output_shape,
                         lambda x: scale * inner.apply_fn(x),
                         lambda z: scale * inner.adjoint_fn(z),
                         name=f"normalized({op.name})", inner=inner, scale=scale)
