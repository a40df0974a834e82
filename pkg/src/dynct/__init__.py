"""Sparse dynamic computed tomography with 3-D shearlet regularization.

Subpackages and modules:

* :mod:`dynct.core` -- linear maps, dot tests, power iteration, normalization.
* :mod:`dynct.projector` -- parallel-beam Joseph projector, block operator, FBP.
* :mod:`dynct.transforms` -- Haar wavelets, 2-D and 3-D shearlet systems.
* :mod:`dynct.solver` -- PDFP with the CWDS threshold controller.
* :mod:`dynct.phantom` -- dynamic stem phantom and measurement simulation.
* :mod:`dynct.metrics` -- relative l2 error, PSNR, HaarPSI.
* :mod:`dynct.pipeline` -- end-to-end reconstruction per method.
* :mod:`dynct.io`, :mod:`dynct.cli` -- file formats and command line.
"""

__version__ = "0.1.0"

from .core import LinearMap, ShapeError, dot_test, normalize_map, power_iteration_lambda_max
from .metrics import hpsi, psnr, rel_l2_error
from .phantom import NoiseConfig, PhantomConfig, SimulationConfig, make_stem_phantom, simulate_measurements
from .pipeline import METHODS, Reconstruction, reconstruct
from .projector import DynamicGeometry, Geometry, SinogramStack, block_map, fbp_reconstruct, radon_map, uniform_angles
from .solver import CwdsConfig, PdfpConfig, SolveReport, preset, run_cwds_pdfp, run_static_cwds_pdfp

__all__ = [
    "LinearMap", "ShapeError", "dot_test", "normalize_map", "power_iteration_lambda_max",
    "hpsi", "psnr", "rel_l2_error",
    "NoiseConfig", "PhantomConfig", "SimulationConfig", "make_stem_phantom", "simulate_measurements",
    "METHODS", "Reconstruction", "reconstruct",
    "DynamicGeometry", "Geometry", "SinogramStack", "block_map", "fbp_reconstruct", "radon_map", "uniform_angles",
    "CwdsConfig", "PdfpConfig", "SolveReport", "preset", "run_cwds_pdfp", "run_static_cwds_pdfp",
]
