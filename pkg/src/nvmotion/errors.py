"""Exception hierarchy shared across the package."""


class NVMotionError(Exception):
    """Base class for all package-specific errors."""


class ParseError(NVMotionError):
    """Malformed molecular geometry input."""


class ConfigError(NVMotionError):
    """Invalid run configuration (schema violation, bad value, missing file)."""


class SimulationError(NVMotionError):
    """Numerical failure during trajectory generation (instability, divergence)."""


class EstimationError(NVMotionError):
    """Statistical estimation failed (bad fit, insufficient data, negative rates)."""


class SolverError(NVMotionError):
    """Quantum solver failure (invariant violation, step-size breakdown)."""


class DetectionError(NVMotionError):
    """Detection planning failure (non-positive signal, no optimum found)."""
