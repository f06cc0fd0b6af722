"""Co-inversion of an acoustic obstacle and its point sources from phaseless near-field data."""

from .acquisition import AcquisitionGeometry, PhaselessDataset, add_noise, read_dataset, synthesize, write_dataset
from .estimators import ObstacleImager, SourceImager, SourceLocator
from .forward import BoundaryCondition, Discretization, Obstacle, Scene
from .geometry import ParametricCurve, Ring, SamplingGrid
from .inversion import extract_peaks, indicator_obstacle, indicator_source, normalize, recover_modulus, theta

__version__ = "0.1.0"

__all__ = [
    "AcquisitionGeometry",
    "BoundaryCondition",
    "Discretization",
    "ObstacleImager",
    "Obstacle",
    "ParametricCurve",
    "PhaselessDataset",
    "Ring",
    "SamplingGrid",
    "Scene",
    "SourceImager",
    "SourceLocator",
    "add_noise",
    "extract_peaks",
    "indicator_obstacle",
    "indicator_source",
    "normalize",
    "read_dataset",
    "recover_modulus",
    "synthesize",
    "theta",
    "write_dataset",
]
