"""Frames of exponentials and wavelet-type atoms on irregular grids.

Submodules
----------
geometry        point sets, regions, densities, coverings
partitions      windows and Riesz partitions of unity
fourier_frames  exponential systems, Gram matrices, frame bound estimates
atoms           atom systems on a frequency grid, analysis and synthesis
reconstruct     dual frames and reconstruction
gallery         named constructions with certificates
estimator       scikit-learn style transformer
cli             command-line front end
"""

from __future__ import annotations

from .atoms import (
    AtomSystem,
    FrequencyGrid,
    SmoothEnsemble,
    WaveletSpec,
    analysis,
    build_wavelet_frame,
    frame_ratios,
    synthesis,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    ConstructionError,
    DomainError,
    FrameError,
    NumericError,
    PreconditionError,
    ResolutionError,
    RPUHoleError,
)
from .estimator import FrameTransform
from .fourier_frames import ExponentialSystem, FrameBounds, frame_bounds_estimate, gram_matrix
from .gallery import ENTRIES, get_entry
from .geometry import PointSet, covering_index, gap, lower_density, separation, upper_density
from .partitions import RPU, rpu_bounds
from .reconstruct import dual_exponential_frame, level_duals, reconstruct_full

__version__ = "0.1.0"

__all__ = [
    "AtomSystem", "FrequencyGrid", "SmoothEnsemble", "WaveletSpec", "analysis", "build_wavelet_frame",
    "frame_ratios", "synthesis",
    "ConditioningError", "ConfigurationError", "ConstructionError", "DomainError", "FrameError",
    "NumericError", "PreconditionError", "ResolutionError", "RPUHoleError",
    "FrameTransform",
    "ExponentialSystem", "FrameBounds", "frame_bounds_estimate", "gram_matrix",
    "ENTRIES", "get_entry",
    "PointSet", "covering_index", "gap", "lower_density", "separation", "upper_density",
    "RPU", "rpu_bounds",
    "dual_exponential_frame", "level_duals", "reconstruct_full",
]
