"""Exception types shared across the package."""

from __future__ import annotations


class ConefreqError(Exception):
    """Base class for all package errors."""


class DomainError(ConefreqError):
    """Invalid cone-domain parameters."""


class MeshError(ConefreqError):
    """Mesh generation cannot satisfy its contract."""


class QuadratureRangeError(ConefreqError):
    """Requested radius lies outside the valid quadrature range."""


class PresetError(ConefreqError):
    """Unknown coefficient preset or invalid preset parameters."""


class AssemblyError(ConefreqError):
    """Linear system assembly or factorization failed."""


class SolverDivergedError(ConefreqError):
    """Picard iteration did not converge within the iteration budget."""

    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


class DegenerateSolutionError(ConefreqError):
    """The boundary mass H vanished, i.e. the field is trivial on a circle."""


class GammaEstimateError(ConefreqError):
    """Frequency values oscillate too wildly for a limit estimate."""


class MonotonicityFitError(ConefreqError):
    """No admissible constant restores monotonicity of the corrected weight."""


class ModeAmbiguityError(ConefreqError):
    """Two spectral projections are too close to name a dominant mode."""


class ConfigError(ConefreqError):
    """Run configuration failed to parse or validate."""
