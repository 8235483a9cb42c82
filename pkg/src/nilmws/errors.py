"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI and the HTTP service can map
failures consistently: 2 for configuration problems, 3 for data problems and
4 for numeric failures.
"""


class NilmError(Exception):
    exit_code = 1
    kind = "error"


class ConfigError(NilmError, ValueError):
    exit_code = 2
    kind = "config"


class DataError(NilmError):
    exit_code = 3
    kind = "data"


class NumericError(NilmError, ArithmeticError):
    exit_code = 4
    kind = "numeric"


# signal / features
class SizeError(DataError, ValueError):
    """Input length violates a size precondition (empty, not a power of two...)."""


class DegenerateInputError(NumericError, ValueError):
    """Input carries no usable energy (zero power, flat voltage, null fundamental)."""


class MalformedSignalError(DataError, ValueError):
    """Waveform lacks the structure an operation relies on, e.g. zero crossings."""


# ingest
class CorpusLoadError(DataError):
    pass


class MissingHeaderError(CorpusLoadError):
    pass


class InconsistentLengthError(CorpusLoadError):
    pass


class ParseError(CorpusLoadError):
    def __init__(self, path, row, text):
        super().__init__(f"{path}: cannot parse row {row}: {text!r}")
        self.path = path
        self.row = row


class VersionMismatchError(DataError):
    pass


class ConcurrentWriteError(DataError):
    pass


# events
class BoundaryError(DataError, IndexError):
    """An event sits too close to the edge of the stream to extract a signature."""


# learn
class TrainingStalledError(NumericError):
    pass


class InputScalingError(NumericError):
    pass


# simulate
class StateError(DataError):
    pass


# bench
class InsufficientDataError(DataError):
    pass
