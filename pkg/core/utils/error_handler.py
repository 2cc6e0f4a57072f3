# core/utils/error_handler.py

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError
import numpy as np
import logging

logger = logging.getLogger(__name__)


class LaneEmdenError(Exception):
    """Base error for lattice solves with a one-line friendly message"""
    default_detail = 'The computation failed.'
    exit_code = 1

    def __init__(self, detail=None, friendly_message=None):
        if detail is None:
            detail = self.default_detail
        self.detail = detail
        self.friendly_message = friendly_message or detail
        super().__init__(detail)


class InvalidProblemError(LaneEmdenError, ValueError):
    """A parameter precondition is violated"""
    default_detail = 'The problem parameters are outside the supported range.'
    exit_code = 2


class RegimeError(InvalidProblemError):
    """A named hypothesis of the existence theory fails"""
    default_detail = 'The requested regime hypothesis does not hold.'

    def __init__(self, hypothesis, detail=None):
        self.hypothesis = hypothesis
        super().__init__(detail or f"hypothesis violated: {hypothesis}")


class ConfigError(InvalidProblemError):
    """Run configuration rejected"""
    default_detail = 'Please check the run configuration.'


class CoverageError(LaneEmdenError, IndexError):
    """Kernel table does not cover the requested points"""
    default_detail = 'The kernel table does not cover the requested points.'
    exit_code = 2


class DegenerateInputError(LaneEmdenError):
    """Input makes the operator trivial on the truncation"""
    default_detail = 'The input is degenerate on this truncation.'
    exit_code = 2


class ConvergenceError(LaneEmdenError):
    """Iteration cap reached or residual above tolerance"""
    default_detail = 'The iteration did not converge.'
    exit_code = 3

    def __init__(self, detail=None, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        if detail is None:
            detail = self.default_detail
        if residual is not None:
            detail = f"{detail} (residual {residual:.3e} after {iterations} iterations)"
        super().__init__(detail)


class MonotonicityError(ConvergenceError):
    """Monotone iteration decreased beyond the allowed slack"""
    default_detail = 'Monotone iteration lost monotonicity; kernel and truncation are inconsistent.'


class IterationCollapseError(ConvergenceError):
    """Normalized iterate collapsed to zero"""
    default_detail = 'no stable positive solution at this R'


def get_friendly_error_message(exception):
    """Map library and numerical exceptions to a one-line message"""

    if isinstance(exception, LaneEmdenError):
        return exception.friendly_message

    # DRF validation errors from config parsing
    elif isinstance(exception, ValidationError):
        detail = exception.detail
        if isinstance(detail, dict):
            messages = []
            for field, errors in detail.items():
                errors = errors if isinstance(errors, list) else [errors]
                for error in errors:
                    messages.append(f"{field}: {error}")
            return ' '.join(messages) if messages else "Please check the run configuration."
        return str(detail)

    elif isinstance(exception, np.linalg.LinAlgError):
        return "Linear algebra failure. The Dirichlet system may be singular on this truncation."

    elif isinstance(exception, FloatingPointError):
        return "Floating point overflow or invalid value during the computation."

    elif isinstance(exception, FileNotFoundError):
        return f"File not found: {exception.filename}"

    elif isinstance(exception, OSError):
        return f"Could not read or write {exception.filename or 'a file'}: {exception.strerror}"

    elif isinstance(exception, MemoryError):
        return "Out of memory. Reduce the truncation radius or the dimension."

    # Generic fallback
    return f"An unexpected error occurred: {exception}"


def exit_code_for(exception):
    if isinstance(exception, LaneEmdenError):
        return exception.exit_code
    if isinstance(exception, ValidationError):
        return ConfigError.exit_code
    if isinstance(exception, np.linalg.LinAlgError):
        return ConvergenceError.exit_code
    return 1


def command_error_from(exception):
    """
    Convert any failure into a CommandError carrying a nonzero return code.
    """
    message = get_friendly_error_message(exception)
    logger.error(f"Error: {exception}", exc_info=True)
    return CommandError(f"{exception.__class__.__name__}: {message}", returncode=exit_code_for(exception))
