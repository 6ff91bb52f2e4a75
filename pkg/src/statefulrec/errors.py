"""Exception hierarchy shared by every statefulrec module.

The CLI maps these onto exit codes, so each class carries the code it
should surface as.
"""

from __future__ import annotations


class StatefulRecError(Exception):
    exit_code = 1


class InvalidConfigurationError(StatefulRecError):
    exit_code = 2


class InvalidParameterError(StatefulRecError, ValueError):
    exit_code = 2


class InvalidInputError(StatefulRecError, ValueError):
    exit_code = 3


class InsufficientHistoryError(StatefulRecError):
    exit_code = 3


class ContractViolationError(StatefulRecError, ValueError):
    exit_code = 3


class MissingStateError(StatefulRecError, LookupError):
    exit_code = 3


class StaleEventError(StatefulRecError):
    exit_code = 3


class CorruptStoreError(StatefulRecError):
    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BackendError(StatefulRecError):
    exit_code = 4

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message if status is None else f"{message} (status {status})")


class BatchError(BackendError):
    """Raised by batch calls when some items failed.

    ``results`` keeps the successful outputs in input order (``None`` at
    failing positions) so callers can salvage partial work.
    """

    def __init__(self, failures: dict[int, Exception], results: list):
        self.failures = failures
        self.results = results
        idx = ", ".join(str(i) for i in sorted(failures))
        super().__init__(f"{len(failures)} of {len(results)} batch items failed at indices [{idx}]")


class DegenerateSampleError(StatefulRecError, ArithmeticError):
    exit_code = 5
