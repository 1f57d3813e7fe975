"""NV-center sensing of single target spins in random thermal motion.

The package is organised as a pipeline:

``molecule``
    XYZ geometry parsing, elastic spring networks, rod-diffusion estimate.
``anm``
    Coarse-grained Langevin dynamics on the spring network and extraction
    of diffusion statistics (rotational diffusion coefficient, angle
    distributions, Ornstein-Uhlenbeck parameters).
``stochastic``
    Parametric trajectory generators (sphere diffusion, OU), the
    position -> hyperfine-vector map and estimation of the statistics
    (mean, correlations, dissipation matrix) consumed by the spin solvers.
``spins``
    Quantum dynamics of the driven NV / target pair: Hamiltonians,
    fast/moderate/slow regime solvers and the Monte Carlo reference.
``detection``
    Signal, SNR and measurement-time planning for time-resolved
    detachment detection; coupling maps over NV placement.
``cli``
    Batch front-end producing CSV/JSON artifacts with manifests.
"""

from . import anm, constants, detection, molecule, spins, stochastic
from .errors import (
    ConfigError,
    DetectionError,
    EstimationError,
    NVMotionError,
    ParseError,
    SimulationError,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "anm",
    "constants",
    "detection",
    "molecule",
    "spins",
    "stochastic",
    "NVMotionError",
    "ParseError",
    "ConfigError",
    "SimulationError",
    "EstimationError",
    "SolverError",
    "DetectionError",
    "__version__",
]
