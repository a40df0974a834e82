"""Digital plant-stem phantom and measurement simulation.

The phantom is a static stem cross-section (zero outside, a dense wall
ring, a textured interior) plus a handful of contrast-agent spots whose
radius and added attenuation grow linearly from nothing in the first frame
to their maximum in the last.

Measurements avoid the inverse crime: each frame is upsampled by pixel
subdivision, projected with a finer detector grid, binned back to the
coarse detector, and only then corrupted with Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ShapeError, check_volume, default_rng
from .projector import DynamicGeometry, Geometry, SinogramStack, block_forward


@dataclass(frozen=True)
class PhantomConfig:
    side: int = 256
    frames: int = 34
    spread_points: int = 5
    seed: int = 0
    background_level: float = 0.5
    ring_level: float = 1.0
    agent_peak: float = 1.0
    #: Outer stem radius, final agent radius and tissue cell size, as fractions of the side.
    stem_radius: float = 0.3
    agent_radius: float = 0.05
    cell_size: float = 0.1

    def __post_init__(self):
        if self.side < 1 or self.frames < 1 or self.spread_points < 1:
            raise ValueError("side, frames and spread_points must be positive")
        if min(self.background_level, self.ring_level, self.agent_peak) < 0:
            raise ValueError("attenuation levels must be non-negative")


@dataclass(frozen=True)
class NoiseConfig:
    sigma_rel: float = 0.01
    seed: int = 0
    #: "std": std = sigma_rel * max|y|; "variance": variance = sigma_rel * max|y|^2.
    reading: str = "std"

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be non-negative")
        if self.reading not in ("std", "variance"):
            raise ValueError("reading must be 'std' or 'variance'")

    def std(self, peak: float) -> float:
        if self.reading == "std":
            return self.sigma_rel * peak
        return math.sqrt(self.sigma_rel) * peak


@dataclass(frozen=True)
class SimulationConfig:
    geometry: Geometry
    supersample: int = 2
    bin_factor: int = 2

    def __post_init__(self):
        if self.supersample < 1 or self.bin_factor < 1:
            raise ValueError("supersample and bin_factor must be positive")

    def fine_geometry(self) -> Geometry:
        g = self.geometry
        return Geometry(g.image_size * self.supersample, g.angles, g.detectors * self.bin_factor,
                        g.detector_spacing * self.supersample / self.bin_factor)


@dataclass(frozen=True)
class _Layout:
    centre: float
    outer: float
    wall: float
    seeds: np.ndarray
    levels: np.ndarray
    spots: list = field(default_factory=list)


def _layout(cfg: PhantomConfig) -> _Layout:
    n = cfg.side
    rng = default_rng(cfg.seed)
    centre = (n - 1) / 2.0
    outer = cfg.stem_radius * n
    wall = max(1.0, 0.05 * n)
    inner = outer - wall
    r_spot = cfg.agent_radius * n
    # agent spots: non-overlapping, kept clear of the wall
    spots = []
    attempts = 0
    while len(spots) < cfg.spread_points:
        attempts += 1
        if attempts > 10000 or inner - r_spot - 1.0 <= 0:
            raise ValueError(f"side {n} is too small to place {cfg.spread_points} spreading points")
        rad = math.sqrt(rng.uniform(0.0, 1.0)) * (inner - r_spot - 1.0)
        ang = rng.uniform(0.0, 2 * math.pi)
        p = (centre + rad * math.sin(ang), centre + rad * math.cos(ang))
        if any(math.dist(p, q) < 2 * r_spot + 1.0 for q in spots):
            continue
        spots.append(p)
    # cellular tissue: Voronoi cells roughly cell_size * side across
    n_cells = max(1, int(round((inner / (cfg.cell_size * n)) ** 2 * math.pi)))
    seeds = centre + rng.uniform(-1.0, 1.0, size=(n_cells, 2)) * inner
    levels = rng.uniform(0.8, 1.0, size=n_cells)
    return _Layout(centre, outer, wall, seeds, levels, spots)


def _static_background(cfg: PhantomConfig, lay: _Layout) -> np.ndarray:
    n = cfg.side
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    dist = np.hypot(yy - lay.centre, xx - lay.centre)
    img = np.zeros((n, n))
    img[dist <= lay.outer] = cfg.ring_level
    tissue = dist <= lay.outer - lay.wall
    pts = np.stack((yy[tissue], xx[tissue]), axis=1)
    d2 = ((pts[:, None, :] - lay.seeds[None, :, :]) ** 2).sum(axis=-1)
    img[tissue] = cfg.background_level * lay.levels[np.argmin(d2, axis=1)]
    return img


def _spot_masks(cfg: PhantomConfig, lay: _Layout, radius: float) -> list[np.ndarray]:
    n = cfg.side
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    return [np.hypot(yy - cy, xx - cx) <= radius for cy, cx in lay.spots]


def _schedule(cfg: PhantomConfig) -> np.ndarray:
    if cfg.frames == 1:
        return np.zeros(1)
    return np.arange(cfg.frames) / (cfg.frames - 1)


def make_stem_phantom(cfg: PhantomConfig = PhantomConfig()) -> np.ndarray:
    """Volume stack ``(frames, side, side)`` of the stem phantom."""
    lay = _layout(cfg)
    background = _static_background(cfg, lay)
    r_max = cfg.agent_radius * cfg.side
    stack = np.empty((cfg.frames, cfg.side, cfg.side))
    for t, s in enumerate(_schedule(cfg)):
        frame = background.copy()
        if s > 0:
            for mask in _spot_masks(cfg, lay, s * r_max):
                frame[mask] += s * cfg.agent_peak
        stack[t] = frame
    return stack


def agent_region_masks(cfg: PhantomConfig = PhantomConfig()) -> list[np.ndarray]:
    """Final (last-frame) extent of each agent spot as boolean images."""
    lay = _layout(cfg)
    return _spot_masks(cfg, lay, cfg.agent_radius * cfg.side)


def upsample(stack: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbour pixel subdivision of the last two axes."""
    if factor == 1:
        return stack
    return np.repeat(np.repeat(stack, factor, axis=-2), factor, axis=-1)


def bin_detectors(sino: np.ndarray, factor: int) -> np.ndarray:
    """Average ``factor`` adjacent detector bins along the last axis."""
    if sino.shape[-1] % factor:
        raise ShapeError(f"{sino.shape[-1]} detector bins not divisible by bin_factor {factor}")
    return sino.reshape(sino.shape[:-1] + (sino.shape[-1] // factor, factor)).mean(axis=-1)


def clean_measurements(truth, sim: SimulationConfig) -> np.ndarray:
    """Noise-free binned sinograms ``(frames, angles, detectors)`` in coarse-pixel units."""
    vol = check_volume(truth)
    if vol.shape[1:] != sim.geometry.image_shape:
        raise ShapeError(f"frames are {vol.shape[1:]}, geometry expects {sim.geometry.image_shape}")
    fine = sim.fine_geometry()
    fine_sino = block_forward(upsample(vol, sim.supersample), DynamicGeometry.shared(fine, vol.shape[0]))
    # fine line integrals are measured in fine pixels
    return bin_detectors(fine_sino, sim.bin_factor) / sim.supersample


def add_noise(clean: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    std = noise.std(float(np.max(np.abs(clean))))
    if std == 0.0:
        return clean.copy()
    rng = default_rng(noise.seed)
    return clean + std * rng.standard_normal(clean.shape)


def simulate_measurements(truth, sim: SimulationConfig, noise: NoiseConfig = NoiseConfig()) -> SinogramStack:
    """Supersampled projection, detector binning, then additive Gaussian noise."""
    clean = clean_measurements(truth, sim)
    g = sim.geometry
    return SinogramStack(add_noise(clean, noise), g.angles, g.detector_spacing)


def downsample_angles(sinos: SinogramStack, keep: int) -> SinogramStack:
    """Keep ``keep`` evenly spaced angles (every ``P/keep``-th one)."""
    total = sinos.angles.size
    if keep < 1 or keep > total or total % keep:
        raise ValueError(f"cannot pick {keep} evenly spaced angles out of {total}")
    step = total // keep
    return SinogramStack(sinos.data[:, ::step].copy(), sinos.angles[::step].copy(), sinos.detector_spacing)
