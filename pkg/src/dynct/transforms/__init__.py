"""Sparsifying transforms: orthonormal 2-D Haar wavelets and digital shearlets."""

from .haar import WaveletConfig, haar_forward, haar_inverse, haar_map
from .shearlet import (
    MIN_3D_SAMPLES,
    ShearletSystem,
    SubbandIndex,
    build_shearlet_system,
    frame_bounds_estimate,
    shearlet_adjoint,
    shearlet_forward,
    shearlet_map,
)

__all__ = [
    "MIN_3D_SAMPLES", "ShearletSystem", "SubbandIndex", "WaveletConfig",
    "build_shearlet_system", "frame_bounds_estimate", "haar_forward", "haar_inverse",
    "haar_map", "shearlet_adjoint", "shearlet_forward", "shearlet_map",
]
