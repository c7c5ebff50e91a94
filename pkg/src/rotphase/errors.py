"""Exception types raised across the toolkit."""


class RotPhaseError(Exception):
    """Base class for every error raised by rotphase."""


class DegenerateDrive(RotPhaseError):
    """The effective drive amplitude vanishes, so its phase is undefined."""


class UnwrapFailure(RotPhaseError):
    """Adjacent phase samples could not be made continuous."""


class OnAxis(RotPhaseError):
    """The NV sits on the wire axis, where the field direction is undefined."""


class StepTooCoarse(RotPhaseError):
    """Integrator step too large for the Hamiltonian norm."""


class NoPeak(RotPhaseError):
    """No usable spectral peak in a Rabi record."""


class NoConvergence(RotPhaseError):
    """Iterative fit failed to converge."""


class AmbiguousCalibration(RotPhaseError):
    """Two distinct azimuthal offsets explain the data equally well."""


class IllConditioned(RotPhaseError):
    """Data span too small to constrain the fit."""


class MissingOutput(RotPhaseError):
    """A manifest references an output file that does not exist."""


class ConfigError(RotPhaseError):
    """Experiment configuration failed to parse or validate."""
