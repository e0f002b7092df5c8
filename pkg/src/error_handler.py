"""
Error handling and logging for the mixlab laboratory.
Classifies failures of the subcommands and prints what to try next.
"""

import logging
import sys
import time
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .config import get_log_file, get_log_level, get_thread_count


class MixlabError(Exception):
    """Base class of the laboratory's own failures."""


class ResolutionError(MixlabError, ValueError):
    """A radius, cutoff or scale is finer than the grid can represent."""


class GridMismatchError(MixlabError, ValueError):
    """Two fields live on different grids."""


class FormatError(MixlabError, ValueError):
    """A set, move or state file does not follow its text format."""


class SearchLimitError(MixlabError, ValueError):
    """Exhaustive search requested beyond its supported size."""


class ErrorType(Enum):
    """Types of errors that can occur."""
    VALIDATION = "validation"
    RESOLUTION = "resolution"
    FILE_FORMAT = "file_format"
    FILE_NOT_FOUND = "file_not_found"
    PERMISSION = "permission"
    CONFIGURATION = "configuration"
    NUMERICAL = "numerical"
    UNKNOWN = "unknown"


class ErrorHandler:
    """Handles errors with clear, actionable messages."""

    def __init__(self):
        self.logger = logging.getLogger('mixlab')
        self._configured = False
        self._started: Dict[str, float] = {}

    def setup_logging(self):
        """Setup logging configuration."""
        if self._configured:
            return
        handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
        log_file = get_log_file()
        if log_file:
            handlers.append(logging.FileHandler(log_file))
        logging.basicConfig(
            level=getattr(logging, get_log_level(), logging.INFO),
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=handlers
        )
        self._configured = True

    def handle_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
        """Handle an error with appropriate logging and user messaging."""
        error_type = self._classify_error(error)

        # Log the full error for debugging
        self.logger.debug(f"Error occurred: {str(error)}", exc_info=True)

        user_message = self._get_user_message(error, error_type)
        print(f"\n❌ {user_message}", file=sys.stderr)

        if context:
            print("\n📋 Context:", file=sys.stderr)
            for key, value in context.items():
                print(f"   {key}: {value}", file=sys.stderr)

        troubleshooting = self._get_troubleshooting_tips(error_type)
        if troubleshooting:
            print("\n💡 Troubleshooting:", file=sys.stderr)
            for tip in troubleshooting:
                print(f"   • {tip}", file=sys.stderr)

        sys.exit(1)

    def _classify_error(self, error: Exception) -> ErrorType:
        """Classify the type of error."""
        if isinstance(error, ResolutionError):
            return ErrorType.RESOLUTION
        if isinstance(error, FormatError):
            return ErrorType.FILE_FORMAT
        if isinstance(error, FileNotFoundError):
            return ErrorType.FILE_NOT_FOUND
        if isinstance(error, PermissionError):
            return ErrorType.PERMISSION
        if isinstance(error, (ValidationError, GridMismatchError, SearchLimitError)):
            return ErrorType.VALIDATION
        if isinstance(error, (FloatingPointError, OverflowError, ZeroDivisionError)):
            return ErrorType.NUMERICAL

        error_str = str(error).lower()
        if any(word in error_str for word in ['environment', 'mixlab_threads', 'local.env']):
            return ErrorType.CONFIGURATION
        elif any(word in error_str for word in ['invalid', 'must be', 'required']):
            return ErrorType.VALIDATION
        elif any(word in error_str for word in ['nan', 'overflow', 'did not converge']):
            return ErrorType.NUMERICAL
        else:
            return ErrorType.UNKNOWN

    def _get_user_message(self, error: Exception, error_type: ErrorType) -> str:
        """Get a user-friendly error message."""
        base_message = str(error)

        if error_type == ErrorType.VALIDATION:
            return f"Validation error: {base_message}\n\nPlease check your input parameters and try again."

        elif error_type == ErrorType.RESOLUTION:
            return f"Grid too coarse: {base_message}\n\nThis usually means:\n• eps or a radius is below one cell width\n• The grid size N is too small for the requested levels"

        elif error_type == ErrorType.FILE_FORMAT:
            return f"Malformed input file: {base_message}\n\nThis usually means:\n• The header line is missing or misspelled\n• A row has the wrong length or characters"

        elif error_type == ErrorType.FILE_NOT_FOUND:
            return f"File not found: {base_message}"

        elif error_type == ErrorType.PERMISSION:
            return f"Permission denied: {base_message}"

        elif error_type == ErrorType.CONFIGURATION:
            return f"Configuration error: {base_message}\n\nThis usually means:\n• An environment variable in local.env has a bad value"

        elif error_type == ErrorType.NUMERICAL:
            return f"Numerical failure: {base_message}\n\nPlease check the logs for more details."

        else:
            return f"An unexpected error occurred: {base_message}\n\nPlease check the logs for more details."

    def _get_troubleshooting_tips(self, error_type: ErrorType) -> list:
        """Get troubleshooting tips based on error type."""
        tips = []

        if error_type == ErrorType.VALIDATION:
            tips.extend([
                "Run `mixlab <subcommand> --help` to see valid options",
                "Grid sizes must be powers of two (N >= 4)",
                "kappa must lie in (0, 1/2), eps in (0, 1/8)"
            ])

        elif error_type == ErrorType.RESOLUTION:
            tips.extend([
                "Increase --N or increase --eps",
                "Singular forms need eps >= 2/N"
            ])

        elif error_type == ErrorType.FILE_FORMAT:
            tips.extend([
                "Set files start with `mixlab-set v1`, move files with `mixlab-moves v1`",
                "Rows use only the characters 0 and 1 and LF line endings"
            ])

        elif error_type == ErrorType.FILE_NOT_FOUND:
            tips.extend([
                "Check the path passed to --set / --moves",
            ])

        elif error_type == ErrorType.CONFIGURATION:
            tips.extend([
                "Check MIXLAB_THREADS, MIXLAB_LOG_FILE and MIXLAB_LOG_LEVEL in `local.env`",
            ])

        tips.append("Set MIXLAB_LOG_LEVEL=DEBUG for the full traceback")
        return tips

    def validate_environment(self) -> bool:
        """Check the environment variables read from local.env."""
        try:
            get_thread_count()
        except ValueError as e:
            print(f"\n❌ Configuration error: {e}", file=sys.stderr)
            print("\n💡 Troubleshooting:", file=sys.stderr)
            print("   • Set MIXLAB_THREADS to a positive integer or remove it", file=sys.stderr)
            return False
        level = get_log_level()
        if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            print(f"\n❌ Configuration error: invalid MIXLAB_LOG_LEVEL {level!r}", file=sys.stderr)
            return False
        return True

    def log_operation_start(self, operation: str, context: Dict[str, Any] = None):
        """Log the start of a subcommand and remember when it began."""
        self._started[operation] = time.perf_counter()
        details = ' '.join(f"{key}={value}" for key, value in (context or {}).items())
        self.logger.info(f"▶ {operation} {details}".rstrip())

    def log_operation_success(self, operation: str, result: Any = None):
        """Log completion with the wall time since log_operation_start."""
        elapsed = self._elapsed(operation)
        message = f"✔ {operation} finished in {elapsed:.3f}s"
        if result:
            message += f": {result}"
        self.logger.info(message)

    def log_operation_failure(self, operation: str, error: Exception):
        elapsed = self._elapsed(operation)
        self.logger.error(f"✖ {operation} failed after {elapsed:.3f}s: {type(error).__name__}: {error}")

    def _elapsed(self, operation: str) -> float:
        started = self._started.pop(operation, None)
        return 0.0 if started is None else time.perf_counter() - started


# Global error handler instance
error_handler = ErrorHandler()
