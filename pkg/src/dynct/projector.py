"""Parallel-beam Radon transform, its block-diagonal dynamic version, and FBP.

Coordinates: pixel ``(i, j)`` (row, column) has its centre at
``x1 = j - (N-1)/2``, ``x2 = i - (N-1)/2`` and unit side length.  Detector
bin ``d`` sits at ``r = (d - (D-1)/2) * spacing``.  The ray for angle
``theta`` and offset ``r`` is the line ``x1 cos(theta) + x2 sin(theta) = r``.

The forward model is Joseph's method: step one pixel at a time along the
ray's major axis, linearly interpolate between the two nearest pixels on the
minor axis, and weight by the step length.  The interpolation weights for a
geometry are computed once and held in a sparse matrix; the adjoint applies
its literal transpose, so the pair is exactly adjoint.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.sparse as sp

from .core import LinearMap, ShapeError, check_image, check_volume, fft_workers

logger = logging.getLogger(__name__)


def default_detector_count(image_size: int) -> int:
    return int(math.ceil(math.sqrt(2.0) * image_size))


def uniform_angles(count: int, arc: float = math.pi) -> np.ndarray:
    """``count`` equispaced angles on ``[0, arc)``."""
    return np.arange(count, dtype=np.float64) * (arc / count)


@dataclass(frozen=True, eq=False)
class Geometry:
    """Parallel-beam acquisition geometry for one time frame."""

    image_size: int
    angles: np.ndarray
    detectors: int | None = None
    detector_spacing: float = 1.0

    def __post_init__(self):
        angles = np.array(self.angles, dtype=np.float64).ravel()
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)
        if self.detectors is None:
            object.__setattr__(self, "detectors", default_detector_count(self.image_size))
        if self.image_size < 1 or self.detectors < 1 or self.detector_spacing <= 0:
            raise ValueError("image_size, detectors and detector_spacing must be positive")
        if angles.size == 0:
            raise ValueError("geometry needs at least one angle")
        if np.unique(angles).size != angles.size:
            raise ValueError("projection angles must be distinct")
        if self.detectors * self.detector_spacing < math.sqrt(2.0) * self.image_size - 1e-9:
            warnings.warn("detector array does not cover the image diagonal", stacklevel=3)

    @property
    def n_angles(self) -> int:
        return int(self.angles.size)

    @property
    def sinogram_shape(self) -> tuple[int, int]:
        return (self.n_angles, self.detectors)

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_size, self.image_size)

    def detector_positions(self) -> np.ndarray:
        return (np.arange(self.detectors) - (self.detectors - 1) / 2.0) * self.detector_spacing

    def same_as(self, other: "Geometry") -> bool:
        return (self.image_size == other.image_size and self.detectors == other.detectors
                and self.detector_spacing == other.detector_spacing
                and np.array_equal(self.angles, other.angles))

    @cached_property
    def system_matrix(self) -> sp.csr_matrix:
        """Sparse Joseph interpolation weights, rows = (angle, detector) bins."""
        return _joseph_matrix(self)

    @cached_property
    def system_matrix_t(self) -> sp.csr_matrix:
        return self.system_matrix.T.tocsr()


@dataclass(frozen=True, eq=False)
class DynamicGeometry:
    """Per-frame geometries of a dynamic acquisition (all frames share one here)."""

    frames: int
    geometries: tuple[Geometry, ...] = field(default=())

    def __post_init__(self):
        geoms = tuple(self.geometries)
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if len(geoms) == 1 and self.frames > 1:
            geoms = geoms * self.frames
        if len(geoms) != self.frames:
            raise ValueError(f"expected {self.frames} geometries, got {len(geoms)}")
        if any(not g.same_as(geoms[0]) for g in geoms[1:]):
            raise ValueError("all frames must share one geometry")
        object.__setattr__(self, "geometries", geoms)

    @classmethod
    def shared(cls, geometry: Geometry, frames: int) -> "DynamicGeometry":
        return cls(frames, (geometry,) * frames)

    def __getitem__(self, tau: int) -> Geometry:
        return self.geometries[tau]

    @property
    def volume_shape(self) -> tuple[int, int, int]:
        n = self.geometries[0].image_size
        return (self.frames, n, n)

    @property
    def sinogram_shape(self) -> tuple[int, int, int]:
        return (self.frames,) + self.geometries[0].sinogram_shape


def _joseph_matrix(geom: Geometry) -> sp.csr_matrix:
    n = geom.image_size
    centre = (n - 1) / 2.0
    coords = np.arange(n) - centre
    r = geom.detector_positions()
    rows, cols, vals = [], [], []
    n_det = geom.detectors
    for a, theta in enumerate(geom.angles):
        c, s = math.cos(theta), math.sin(theta)
        if abs(s) >= abs(c):
            # step over columns; interpolate along rows
            minor = (r[:, None] - coords[None, :] * c) / s + centre
            step = 1.0 / abs(s)
            fixed = np.broadcast_to(np.arange(n)[None, :], minor.shape)
            row_major = False
        else:
            minor = (r[:, None] - coords[None, :] * s) / c + centre
            step = 1.0 / abs(c)
            fixed = np.broadcast_to(np.arange(n)[None, :], minor.shape)
            row_major = True
        lo = np.floor(minor).astype(np.int64)
        w_hi = minor - lo
        ray = np.broadcast_to((a * n_det + np.arange(n_det))[:, None], minor.shape)
        for idx, w in ((lo, 1.0 - w_hi), (lo + 1, w_hi)):
            ok = (idx >= 0) & (idx < n) & (w > 0)
            if row_major:
                pix = fixed[ok] * n + idx[ok]   # fixed = row, idx = column
            else:
                pix = idx[ok] * n + fixed[ok]   # idx = row, fixed = column
            rows.append(ray[ok])
            cols.append(pix)
            vals.append(w[ok] * step)
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(geom.n_angles * n_det, n * n),
    )
    mat.sum_duplicates()
    return mat


def radon_forward(image, geom: Geometry) -> np.ndarray:
    """Sinogram ``(angles, detectors)`` of a square image."""
    img = check_image(image, geom.image_size)
    return (geom.system_matrix @ img.ravel()).reshape(geom.sinogram_shape)


def radon_adjoint(sino, geom: Geometry) -> np.ndarray:
    """Back-projection: the exact transpose of :func:`radon_forward`."""
    sino = np.asarray(sino, dtype=np.float64)
    if sino.shape != geom.sinogram_shape:
        raise ShapeError(f"sinogram shape {sino.shape} does not match geometry {geom.sinogram_shape}")
    return (geom.system_matrix_t @ sino.ravel()).reshape(geom.image_shape)


def _check_frames(arr: np.ndarray, frames: int, what: str):
    if arr.shape[0] != frames:
        raise ShapeError(f"{what} has {arr.shape[0]} frames, geometry has {frames}")


def block_forward(stack, geom: DynamicGeometry) -> np.ndarray:
    """Project every frame with its own geometry; no cross-frame coupling."""
    vol = check_volume(stack)
    _check_frames(vol, geom.frames, "volume stack")
    if vol.shape[1:] != geom[0].image_shape:
        raise ShapeError(f"frame shape {vol.shape[1:]} does not match geometry {geom[0].image_shape}")
    mat = geom[0].system_matrix
    # all frames share the geometry: one sparse-dense product
    out = (mat @ vol.reshape(geom.frames, -1).T).T
    return np.ascontiguousarray(out).reshape(geom.sinogram_shape)


def block_adjoint(sinos, geom: DynamicGeometry) -> np.ndarray:
    data = np.asarray(sinos, dtype=np.float64)
    if data.ndim != 3:
        raise ShapeError(f"sinogram stack must be 3-D, got {data.shape}")
    _check_frames(data, geom.frames, "sinogram stack")
    if data.shape[1:] != geom[0].sinogram_shape:
        raise ShapeError(f"sinogram shape {data.shape[1:]} does not match {geom[0].sinogram_shape}")
    mat_t = geom[0].system_matrix_t
    out = (mat_t @ data.reshape(geom.frames, -1).T).T
    return np.ascontiguousarray(out).reshape(geom.volume_shape)


def radon_map(geom: Geometry) -> LinearMap:
    return LinearMap(geom.image_shape, geom.sinogram_shape,
                     lambda x: radon_forward(x, geom), lambda z: radon_adjoint(z, geom),
                     name=f"Radon(N={geom.image_size},P={geom.n_angles})")


def block_map(geom: DynamicGeometry) -> LinearMap:
    return LinearMap(geom.volume_shape, geom.sinogram_shape,
                     lambda x: block_forward(x, geom), lambda z: block_adjoint(z, geom),
                     name=f"BlockRadon(T={geom.frames},P={geom[0].n_angles})")


def ram_lak_filter(n_detectors: int, spacing: float = 1.0) -> np.ndarray:
    """Frequency response of the band-limited ramp filter on the padded grid.

    Built from the sampled spatial kernel (``1/(4 tau^2)`` at 0,
    ``-1/(pi n tau)^2`` at odd ``n``), which avoids the DC offset of a naive
    ``|omega|`` ramp.  Returned length is the next power of two >= 2D.
    """
    size = max(64, 1 << int(math.ceil(math.log2(2 * n_detectors))))
    n = np.concatenate((np.arange(0, size // 2 + 1), np.arange(-size // 2 + 1, 0)))
    kernel = np.zeros(size)
    kernel[0] = 0.25
    odd = n % 2 == 1
    kernel[odd] = -1.0 / (np.pi * n[odd]) ** 2
    # the spacing factor of the convolution sum cancels one power of 1/tau^2
    return np.real(scipy.fft.fft(kernel)) / spacing


def fbp_reconstruct(sino, geom: Geometry) -> np.ndarray:
    """Filtered back-projection with the Ram-Lak filter.

    Rows are ramp-filtered in the frequency domain (zero-padded to the next
    power of two >= 2D), back-projected pixel by pixel with linear
    interpolation on the detector, and scaled by ``pi / P``.  No clamping.
    """
    sino = np.asarray(sino, dtype=np.float64)
    if sino.shape != geom.sinogram_shape:
        raise ShapeError(f"sinogram shape {sino.shape} does not match geometry {geom.sinogram_shape}")
    if geom.n_angles < 2:
        raise ValueError("insufficient angular sampling for FBP")
    filt = ram_lak_filter(geom.detectors, geom.detector_spacing)
    size = filt.size
    spec = scipy.fft.fft(sino, n=size, axis=1, workers=fft_workers())
    filtered = np.real(scipy.fft.ifft(spec * filt, axis=1, workers=fft_workers()))[:, : geom.detectors]

    n = geom.image_size
    coords = np.arange(n) - (n - 1) / 2.0
    x1 = coords[None, :]
    x2 = coords[:, None]
    det = np.arange(geom.detectors, dtype=np.float64)
    image = np.zeros((n, n))
    for a, theta in enumerate(geom.angles):
        t = (x1 * math.cos(theta) + x2 * math.sin(theta)) / geom.detector_spacing + (geom.detectors - 1) / 2.0
        image += np.interp(t, det, filtered[a], left=0.0, right=0.0)
    # a 2*pi arc visits every line twice; the pi/P factor stays correct either way
    return image * (math.pi / geom.n_angles)


def fbp_stack(sinos, geom: DynamicGeometry) -> np.ndarray:
    data = np.asarray(sinos, dtype=np.float64)
    _check_frames(data, geom.frames, "sinogram stack")
    return np.stack([fbp_reconstruct(data[t], geom[t]) for t in range(geom.frames)])


@dataclass(frozen=True, eq=False)
class SinogramStack:
    """Per-frame sinograms sharing one angle set: ``data`` is (frames, angles, detectors)."""

    data: np.ndarray
    angles: np.ndarray
    detector_spacing: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        angles = np.array(self.angles, dtype=np.float64).ravel()
        if data.ndim != 3 or data.shape[0] < 1:
            raise ShapeError(f"sinogram stack must be (frames, angles, detectors), got {data.shape}")
        if data.shape[1] != angles.size:
            raise ShapeError(f"{data.shape[1]} sinogram rows but {angles.size} angles")
        if angles.size > 1 and np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ValueError("sinogram stack contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "angles", angles)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def detectors(self) -> int:
        return self.data.shape[2]

    def geometry(self, image_size: int) -> Geometry:
        return Geometry(image_size, self.angles, self.detectors, self.detector_spacing)

    def dynamic_geometry(self, image_size: int) -> DynamicGeometry:
        return DynamicGeometry.shared(self.geometry(image_size), self.frames)
