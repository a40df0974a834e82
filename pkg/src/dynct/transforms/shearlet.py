"""Undecimated digital shearlet systems in 2-D (cone-adapted) and 3-D (pyramid-adapted).

The filter bank lives in the frequency domain.  Frequencies are scaled per
axis so Nyquist sits at 1, and the "radius" of a frequency is its max-norm,
so level sets are squares/cubes, the natural shape for cones and pyramids.

* Scale: smooth Meyer-type windows split the max-norm radius dyadically into
  a lowpass box and ``scales`` bandpass shells.
* Direction: on scale ``j`` the shear parameter runs over
  ``|k| <= K_j = 2**ceil(j/2)`` in every cone (2-D) or pyramid (3-D).  The
  sheared directions are the points of the cone/pyramid boundary grid with
  spacing ``1/K_j``; directions shared by neighbouring cones are counted
  once and ``q`` is identified with ``-q`` (real filters).  Each direction
  gets a smooth bump around its grid point.
* The squared windows are normalized to sum to one at every frequency, so
  the system is a Parseval frame: ``sum_b |H_b|^2 == 1`` up to round-off.

The defaults reproduce the usual subband counts: 1 + 8 + 8 + 16 = 33 for
2-D with 3 scales and 1 + 49 + 49 = 99 for 3-D with 2 scales.  Filters are
real and even, so each subband is a self-adjoint periodic convolution and
the coefficients of a real signal are real.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from ..core import LinearMap, ShapeError, fft_workers

#: Minimum samples per axis for the 3-D system.
MIN_3D_SAMPLES = 33

_CHUNK = 16


@dataclass(frozen=True)
class SubbandIndex:
    """Label of one subband.

    ``kind`` is ``"lowpass"``, ``"cone"`` (2-D) or ``"pyramid"`` (3-D);
    ``cone`` is the dominant frequency axis, ``scale`` is ``j`` (0 for the
    lowpass) and ``shear`` holds the ``dims - 1`` shear components.
    ``direction`` is the grid point on the unit cone/pyramid boundary the
    window is centred on, in array-axis order.
    """

    kind: str
    scale: int
    cone: int | None = None
    shear: tuple[int, ...] = ()
    direction: tuple[float, ...] = ()

    @property
    def shear_limit(self) -> int:
        return shear_limit(self.scale)

    def orientation(self) -> float:
        """2-D only: angle in degrees, in [0, 180), of the edges this band sees.

        Angles are measured in image coordinates with ``x`` along columns
        and ``y`` along rows.
        """
        if len(self.direction) != 2:
            raise ValueError("orientation is defined for 2-D directional subbands")
        q_row, q_col = self.direction
        freq_angle = math.degrees(math.atan2(q_row, q_col))
        return (freq_angle + 90.0) % 180.0


def shear_limit(j: int) -> int:
    return 2 ** math.ceil(j / 2)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def _lowpass_sq(t: np.ndarray) -> np.ndarray:
    """Squared Meyer-type lowpass profile: 1 on [0, 1], 0 beyond 2."""
    return _smooth_step(2.0 - t)


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def boundary_directions(dims: int, k_max: int) -> list[tuple[float, ...]]:
    """Grid points of spacing 1/k_max on the boundary of [-1, 1]^dims, one per +-pair."""
    ticks = [k / k_max for k in range(-k_max, k_max + 1)]
    out = []
    for q in itertools.product(ticks, repeat=dims):
        if max(abs(c) for c in q) != 1.0:
            continue
        first = next(c for c in q if c != 0.0)
        if first > 0:
            out.append(q)
    return out


def _frequency_grid(shape: tuple[int, ...]) -> list[np.ndarray]:
    # per-axis frequencies scaled so Nyquist maps to 1
    axes = [scipy.fft.fftfreq(n) * 2.0 for n in shape]
    return np.meshgrid(*axes, indexing="ij", sparse=True)


def _mirror(a: np.ndarray) -> np.ndarray:
    """Values at -k for every index k of a full FFT grid."""
    out = np.flip(a)
    return np.roll(out, 1, axis=tuple(range(a.ndim)))


@dataclass(frozen=True, eq=False)
class ShearletSystem:
    dims: int
    shape: tuple[int, ...]
    scales: int
    indices: tuple[SubbandIndex, ...]
    filters: np.ndarray = field(repr=False)  # (R, *rfft half-spectrum shape), real
    normalization: float = 1.0

    @property
    def n_subbands(self) -> int:
        return len(self.indices)

    @property
    def coefficient_shape(self) -> tuple[int, ...]:
        return (self.n_subbands,) + tuple(self.shape)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dims, 0))


def build_shearlet_system(dims: int, shape, scales: int | None = None) -> ShearletSystem:
    """Construct the 2-D or 3-D shearlet filter bank for arrays of ``shape``."""
    shape = tuple(int(n) for n in shape)
    if dims not in (2, 3) or len(shape) != dims:
        raise ShapeError(f"dims must be 2 or 3 and match shape, got dims={dims}, shape={shape}")
    if scales is None:
        scales = 3 if dims == 2 else 2
    if scales < 1:
        raise ValueError("scales must be positive")
    if dims == 3 and min(shape) < MIN_3D_SAMPLES:
        raise ShapeError(f"3D shearlet needs >= {MIN_3D_SAMPLES} samples per axis, got {shape}")
    if dims == 2 and min(shape) < 2 ** scales:
        raise ShapeError(f"2D shearlet with {scales} scales needs >= {2 ** scales} samples per axis, got {shape}")

    grid = _frequency_grid(shape)
    radius = np.zeros(shape)
    for g in grid:
        radius = np.maximum(radius, np.abs(g))
    safe = np.where(radius > 0, radius, 1.0)
    # projection onto the unit cube surface; arbitrary (masked by windows) at 0
    surface = [np.broadcast_to(g / safe, shape) for g in grid]

    # cumulative squared lowpass windows Phi_m^2, m = 0..scales
    cum = [_lowpass_sq(radius / 2.0 ** (m - scales)) for m in range(scales)] + [np.ones(shape)]

    half = shape[:-1] + (shape[-1] // 2 + 1,)
    half_slice = (slice(None),) * (dims - 1) + (slice(0, half[-1]),)
    kind = "cone" if dims == 2 else "pyramid"

    indices = [SubbandIndex("lowpass", 0)]
    squares = [cum[0]]
    for j in range(1, scales + 1):
        k_max = shear_limit(j)
        dirs = boundary_directions(dims, k_max)
        weights = []
        for q in dirs:
            d_plus = np.sqrt(sum((s - c) ** 2 for s, c in zip(surface, q)))
            d_minus = np.sqrt(sum((s + c) ** 2 for s, c in zip(surface, q)))
            weights.append(np.maximum(_bump(d_plus * k_max), _bump(d_minus * k_max)) ** 2)
        total = np.sum(weights, axis=0)
        total[total == 0] = 1.0  # only the origin, where the shell vanishes
        shell = np.clip(cum[j] - cum[j - 1], 0.0, None)
        for q, w in zip(dirs, weights):
            cone = int(np.argmax(np.abs(q)))
            sign = 1.0 if q[cone] > 0 else -1.0
            shear = tuple(int(round(sign * q[a] * k_max)) for a in range(dims) if a != cone)
            indices.append(SubbandIndex(kind, j, cone, shear, tuple(float(c) for c in q)))
            squares.append(shell * w / total)

    filters = np.empty((len(squares),) + half)
    for b, sq in enumerate(squares):
        sym = 0.5 * (sq + _mirror(sq))
        filters[b] = np.sqrt(sym[half_slice])
    upper = float(np.max(np.sum(filters ** 2, axis=0)))
    norm = math.sqrt(upper)
    filters /= norm
    filters.setflags(write=False)
    return ShearletSystem(dims, shape, scales, tuple(indices), filters, norm)


def _rfft(x: np.ndarray, system: ShearletSystem) -> np.ndarray:
    return scipy.fft.rfftn(x, axes=system.axes, workers=fft_workers())


def _irfft(x: np.ndarray, system: ShearletSystem) -> np.ndarray:
    return scipy.fft.irfftn(x, s=system.shape, axes=system.axes, workers=fft_workers())


def _check_signal(system: ShearletSystem, x: np.ndarray):
    if x.shape[-system.dims:] != system.shape:
        raise ShapeError(f"input shape {x.shape} does not end with system shape {system.shape}")


def shearlet_forward(system: ShearletSystem, x) -> np.ndarray:
    """Coefficients of shape ``(R, *batch, *system.shape)``; subband axis first."""
    x = np.asarray(x, dtype=np.float64)
    _check_signal(system, x)
    spec = _rfft(x, system)
    out = np.empty((system.n_subbands,) + x.shape)
    batch = x.ndim - system.dims
    for start in range(0, system.n_subbands, _CHUNK):
        h = system.filters[start:start + _CHUNK]
        h = h.reshape((h.shape[0],) + (1,) * batch + h.shape[1:])
        out[start:start + _CHUNK] = _irfft(spec[None] * h, system)
    return out


def shearlet_adjoint(system: ShearletSystem, coeffs) -> np.ndarray:
    """Adjoint of :func:`shearlet_forward`: filter each subband again and sum."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim < system.dims + 1 or c.shape[0] != system.n_subbands:
        raise ShapeError(f"coefficients {c.shape} do not match {system.n_subbands} subbands")
    _check_signal(system, c)
    batch = c.ndim - 1 - system.dims
    acc = None
    for start in range(0, system.n_subbands, _CHUNK):
        h = system.filters[start:start + _CHUNK]
        h = h.reshape((h.shape[0],) + (1,) * batch + h.shape[1:])
        part = np.sum(_rfft(c[start:start + _CHUNK], system) * h, axis=0)
        acc = part if acc is None else acc + part
    return _irfft(acc, system)


def frame_bounds_estimate(system: ShearletSystem) -> tuple[float, float]:
    """Min and max over frequencies of ``sum_b |H_b|^2`` (lower/upper frame bounds)."""
    power = np.sum(system.filters ** 2, axis=0)
    return float(power.min()), float(power.max())


def shearlet_map(system: ShearletSystem, batch_shape: tuple[int, ...] = ()) -> LinearMap:
    shape = tuple(batch_shape) + system.shape
    return LinearMap(shape, (system.n_subbands,) + shape,
                     lambda x: shearlet_forward(system, x),
                     lambda c: shearlet_adjoint(system, c),
                     name=f"Shearlet{system.dims}D{system.shape}")
