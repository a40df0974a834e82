"""End-to-end reconstruction for the four methods: fbp, haar, sh2d, sh3d."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import LinearMap, normalize_map
from .projector import SinogramStack, block_map, fbp_stack, radon_map
from .solver import (
    CwdsConfig,
    PdfpConfig,
    SolveReport,
    combine_frames,
    frames_for_3d,
    inflate_frames,
    preset,
    run_cwds_pdfp,
    run_static_cwds_pdfp,
)
from .transforms import MIN_3D_SAMPLES, WaveletConfig, build_shearlet_system, haar_map, shearlet_map

logger = logging.getLogger(__name__)

METHODS = ("fbp", "haar", "sh2d", "sh3d")


@dataclass
class Reconstruction:
    volume: np.ndarray
    method: str
    report: SolveReport | None = None
    seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def seconds_per_iteration(self) -> float | None:
        if self.report is None or self.report.iterations == 0:
            return None
        return self.seconds / self.report.iterations


def sparsifying_transform(method: str, shape: tuple[int, ...]) -> LinearMap:
    """Transform used by ``method`` on arrays of ``shape`` (2-D frame or 3-D stack)."""
    if method == "haar":
        return haar_map(shape, WaveletConfig(levels=4))
    if method == "sh2d":
        return shearlet_map(build_shearlet_system(2, shape, 3))
    if method == "sh3d":
        return shearlet_map(build_shearlet_system(3, shape, 2))
    raise ValueError(f"no sparsifying transform for method {method!r}")


def reconstruct(sinos: SinogramStack, method: str, image_size: int, pdfp: PdfpConfig = PdfpConfig(),
                cwds: CwdsConfig | None = None, dataset: str = "digital", combine: str = "average",
                seed: int = 0, record_objective: bool = True) -> Reconstruction:
    """Reconstruct a sinogram stack with one of :data:`METHODS`.

    Solver methods normalize the projector by its estimated spectral norm
    and scale the data by the same factor, so the returned volume is in the
    units of the original data.  ``sh3d`` on fewer than 33 frames inflates
    the data in time and combines the replicates afterwards.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    start = time.perf_counter()
    notes: dict = {}
    geom = sinos.dynamic_geometry(image_size)
    if method == "fbp":
        vol = fbp_stack(sinos.data, geom)
        return Reconstruction(vol, method, None, time.perf_counter() - start, notes)

    if cwds is None:
        cwds = preset(dataset, method)
    n = image_size
    if method == "sh3d":
        data = sinos.data
        frames = sinos.frames
        if frames < MIN_3D_SAMPLES:
            target = frames_for_3d(frames, MIN_3D_SAMPLES)
            logger.info("inflating %d frames to %d for the 3D shearlet system", frames, target)
            data = inflate_frames(data, target)
            notes.update(inflated_from=frames, inflated_to=target, combine=combine)
            geom = SinogramStack(data, sinos.angles, sinos.detector_spacing).dynamic_geometry(n)
        A = normalize_map(block_map(geom), seed=seed)
        SH = sparsifying_transform("sh3d", geom.volume_shape)
        vol, report = run_cwds_pdfp(A.scale * data, A, SH, pdfp, cwds, record_objective)
        if "inflated_from" in notes:
            vol = combine_frames(vol, frames, combine)
    else:
        A = normalize_map(radon_map(geom[0]), seed=seed)
        T2D = sparsifying_transform(method, (n, n))
        vol, report = run_static_cwds_pdfp(A.scale * sinos.data, [A] * sinos.frames, T2D, pdfp, cwds,
                                           record_objective)
    notes["projector_scale"] = A.scale
    return Reconstruction(vol, method, report, time.perf_counter() - start, notes)
