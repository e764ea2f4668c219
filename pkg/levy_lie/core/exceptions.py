"""
Error hierarchy for the library.

Every error carries a stable ``code`` so the CLI can emit a machine-readable
error document, a human ``message`` and optional structured ``details``.
"""
from typing import Any, Optional


class LevyLieError(Exception):
    """Base class for all library errors"""
    code = "levy_lie_error"

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class OutOfChart(LevyLieError):
    """A group element lies outside the logarithm chart"""
    code = "out_of_chart"


class NoConvergence(LevyLieError):
    code = "no_convergence"


class InvalidTriple(LevyLieError):
    """A triple failed validation; ``details`` holds the violation list"""
    code = "invalid_triple"


class GridMismatch(LevyLieError):
    code = "grid_mismatch"


class FRejected(LevyLieError):
    """Test function does not vanish in a neighborhood of the identity"""
    code = "f_rejected"


class NotKInvariant(LevyLieError):
    code = "not_k_invariant"


class NotIrreducible(LevyLieError):
    code = "not_irreducible"


class DriftPieceTooLarge(LevyLieError):
    code = "drift_piece_too_large"


class ConfigError(LevyLieError):
    code = "config_error"
