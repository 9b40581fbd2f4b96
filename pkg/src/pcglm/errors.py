"""Exception hierarchy.

Every error carries a short machine code, a process exit code used by the
CLI, and an optional ``context`` dict that ends up in the JSON error payload.
"""


class PcglmError(Exception):
    code = "error"
    exit_code = 1

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def payload(self):
        return {"code": self.code, "message": self.message, "context": self.context}


# data / schema problems -> exit 3
class DataError(PcglmError):
    code = "data_error"
    exit_code = 3


class ShapeError(DataError):
    code = "shape_error"


class InsufficientDataError(DataError):
    code = "insufficient_data"


class DegenerateInputError(DataError):
    code = "degenerate_input"


class SchemaError(DataError):
    code = "schema_error"


class ParseError(DataError):
    code = "parse_error"


class RowError(DataError):
    code = "row_error"


class EmptyInputError(DataError):
    code = "empty_input"


class JoinError(DataError):
    code = "join_error"


class DuplicateIdError(DataError):
    code = "duplicate_id"


class LevelError(DataError):
    code = "level_error"


class ConfigError(DataError):
    code = "config_error"


class InvalidFitError(DataError):
    code = "invalid_fit"


# numerical failures -> exit 4
class NumericalError(PcglmError):
    code = "numerical_error"
    exit_code = 4


class ConvergenceError(NumericalError):
    code = "convergence_error"


class SingularMatrixError(NumericalError):
    code = "singular_matrix"

    def __init__(self, message, pivot=None, **context):
        super().__init__(message, pivot=pivot, **context)
        self.pivot = pivot


class SeparationError(NumericalError):
    code = "separation"


class EliminationError(NumericalError):
    code = "elimination_error"

    def __init__(self, message, trace=(), **context):
        super().__init__(message, trace=[list(t) for t in trace], **context)
        self.trace = list(trace)


# file system -> exit 5
class ModelIOError(PcglmError):
    code = "io_error"
    exit_code = 5
