"""
Tests for error classification and operation logging.
"""

import logging

import pytest
from pydantic import ValidationError

from .error_handler import (
    ErrorHandler,
    ErrorType,
    FormatError,
    GridMismatchError,
    ResolutionError,
    SearchLimitError,
)
from .torus_grid import GridSpec


def validation_error() -> ValidationError:
    try:
        GridSpec(N=6)
    except ValidationError as e:
        return e
    raise AssertionError("GridSpec accepted N=6")


class TestClassification:

    def setup_method(self):
        self.handler = ErrorHandler()

    @pytest.mark.parametrize("error,expected", [
        (ResolutionError("eps 0.01 is below the cell width 1/32"), ErrorType.RESOLUTION),
        (FormatError("x.txt: line 1 must be 'mixlab-set v1'"), ErrorType.FILE_FORMAT),
        (FileNotFoundError("Input file not found: x.txt"), ErrorType.FILE_NOT_FOUND),
        (PermissionError("x.csv"), ErrorType.PERMISSION),
        (GridMismatchError("N=16 and N=32"), ErrorType.VALIDATION),
        (SearchLimitError("n=3 is too large"), ErrorType.VALIDATION),
        (ZeroDivisionError("division by zero"), ErrorType.NUMERICAL),
        (ValueError("Invalid MIXLAB_THREADS environment value: 'zero'"), ErrorType.CONFIGURATION),
        (ValueError("Invalid radius ratio rho=1: must be > 1"), ErrorType.VALIDATION),
        (RuntimeError("quadrature did not converge"), ErrorType.NUMERICAL),
        (RuntimeError("boom"), ErrorType.UNKNOWN),
    ])
    def test_classify(self, error, expected):
        assert self.handler._classify_error(error) == expected

    def test_pydantic_errors_are_validation(self):
        assert self.handler._classify_error(validation_error()) == ErrorType.VALIDATION

    def test_domain_errors_are_value_errors(self):
        for cls in (ResolutionError, GridMismatchError, FormatError, SearchLimitError):
            assert issubclass(cls, ValueError)


class TestHandleError:

    def test_exits_with_status_one(self, capsys):
        handler = ErrorHandler()
        with pytest.raises(SystemExit) as info:
            handler.handle_error(ResolutionError("eps 0.01 is below the cell width 1/32"), {"N": 32})
        assert info.value.code == 1
        err = capsys.readouterr().err
        assert "Grid too coarse" in err
        assert "N: 32" in err
        assert "MIXLAB_LOG_LEVEL=DEBUG" in err

    def test_every_type_has_tips(self):
        handler = ErrorHandler()
        for error_type in ErrorType:
            assert handler._get_troubleshooting_tips(error_type)


class TestOperationLog:

    def test_success_reports_elapsed_time(self, caplog):
        handler = ErrorHandler()
        with caplog.at_level(logging.INFO, logger='mixlab'):
            handler.log_operation_start("seminorm", {"eps": 0.0625})
            handler.log_operation_success("seminorm", {"value": 1.5})
        messages = [record.getMessage() for record in caplog.records]
        assert messages[0] == "▶ seminorm eps=0.0625"
        assert messages[1].startswith("✔ seminorm finished in ")
        assert messages[1].endswith(": {'value': 1.5}")

    def test_failure_without_start(self, caplog):
        handler = ErrorHandler()
        with caplog.at_level(logging.INFO, logger='mixlab'):
            handler.log_operation_failure("ledger", FormatError("bad header"))
        assert caplog.records[-1].getMessage() == "✖ ledger failed after 0.000s: FormatError: bad header"
