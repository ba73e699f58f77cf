"""Dynamic Distribution Decomposition: continuous-time Markov generators
over compact density basis functions, fit to snapshot and trajectory data."""

from .basis import BasisSet, build_basis, project_coefficients
from .domain import CoefficientSeries, Dataset, SnapshotSeries, TimeGrid, TrajectorySet
from .model import FitReport, GeneratorModel
from .optimize import FitOptions, fit
from .quadrature import MassMatrix, mass_matrix

__all__ = [
    "BasisSet", "build_basis", "project_coefficients",
    "CoefficientSeries", "Dataset", "SnapshotSeries", "TimeGrid", "TrajectorySet",
    "FitReport", "GeneratorModel", "FitOptions", "fit", "MassMatrix", "mass_matrix",
]
__version__ = "0.1.0"
