"""Exception types shared across the package.

All errors derive from ValueError so callers can catch broadly, but the
pipeline distinguishes input validation problems from computation problems
when mapping to exit codes.
"""


class ParcelTolError(ValueError):
    """Base class for all package errors."""


class ValidationError(ParcelTolError):
    """Invalid input data (geometry, file contents, foreign keys)."""


class InsufficientDataError(ParcelTolError):
    """Too few observations for the requested statistic."""


class DegenerateSampleError(ParcelTolError):
    """Sample has no spread where spread is required (e.g. zero variance)."""


class DegenerateFitError(ParcelTolError):
    """Design matrix cannot support the requested fit or test."""


class ModelSpecError(ParcelTolError):
    """Malformed model specification (unknown factor, duplicate term, ...)."""


class GenerationError(ParcelTolError):
    """Synthetic-data generation failed within the retry budget."""


class PrecisionDomainError(ParcelTolError):
    """Inconsistent precision inputs (e.g. negative critical-difference radicand).

    Carries the two squared terms so callers can see which inputs clash.
    """

    def __init__(self, message, term_reproducibility=None, term_repeatability=None):
        super().__init__(message)
        self.term_reproducibility = term_reproducibility
        self.term_repeatability = term_repeatability
