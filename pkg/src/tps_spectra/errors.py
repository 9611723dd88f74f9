"""Exception types shared across the package."""


class TpsSpectraError(Exception):
    """Base class for all package-specific errors."""


class DimensionOverflowError(TpsSpectraError):
    """Dense realization would exceed the configured Hilbert-space cap."""


class NonHermitianError(TpsSpectraError):
    """An operation requiring a Hermitian operator received a non-Hermitian one."""


class DegenerateSpectrumError(TpsSpectraError):
    """The spectrum is degenerate within tolerance, so the M-matrix shortcut is invalid."""


class NotInClassError(TpsSpectraError):
    """An operator (or file) contains terms outside the requested locality class."""


class DefectivePointError(TpsSpectraError):
    """Near-defective eigenpairs make analytic eigenvalue derivatives unreliable."""


class SolverError(TpsSpectraError):
    """An eigensolver or least-squares solve failed to converge."""
