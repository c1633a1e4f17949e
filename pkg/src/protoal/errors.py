"""Exception hierarchy shared across the package.

Every domain error derives from ProtoALError so callers (and the CLI exit-code
mapping) can distinguish our failures from programming errors.
"""


class ProtoALError(Exception):
    """Base class for all protoal domain errors."""


class DegenerateVector(ProtoALError):
    """Vector has (near-)zero norm and cannot be normalized."""


class DimensionMismatch(ProtoALError):
    """Operands have incompatible lengths or shapes."""


class InvalidLabel(ProtoALError):
    """Class index is out of range for the model."""


class NonFiniteLoss(ProtoALError):
    """Training loss became NaN or infinite; training is aborted."""


class TooFewClasses(ProtoALError):
    """The operation needs more classes than the probability row has."""


class BudgetExceedsPool(ProtoALError):
    """A selection budget is larger than the available pool."""


class OracleUnavailable(ProtoALError):
    """A label was requested but no label source can provide it."""


class ParseError(ProtoALError):
    """A data file could not be parsed; message carries the line number."""


class SchemaError(ProtoALError):
    """Parsed data or config violates the documented schema."""


class DuplicateId(ProtoALError):
    """Two samples in one dataset share an id."""


class CorruptSnapshot(ProtoALError):
    """A persisted session snapshot is unreadable; refuse to serve from it."""
