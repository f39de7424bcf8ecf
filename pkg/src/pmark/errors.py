"""Exception hierarchy shared by all pmark modules."""


class PMarkError(Exception):
    """Base class for every error raised by this package."""


class ZeroVectorError(PMarkError, ValueError):
    """A vector with (near-)zero norm cannot be normalized."""


class DimMismatchError(PMarkError, ValueError):
    """Vectors or key material with incompatible dimensions."""


class InvalidShapeError(PMarkError, ValueError):
    """Requested more orthogonal channels than the space admits, or similar."""


class DomainError(PMarkError, ValueError):
    """Scalar argument outside its mathematical domain."""


class ChannelOutOfRangeError(PMarkError, IndexError):
    """Channel index outside 1..b."""


class EmptyInputError(PMarkError, ValueError):
    """An operation that needs at least one element got none."""


class OddSetSizeError(PMarkError, ValueError):
    """Median partition requires an even number of candidates."""


class BudgetNotDivisibleError(PMarkError, ValueError):
    """Online selection requires the sample budget divisible by 2**channels."""


class EmptyCandidateSetError(PMarkError, ValueError):
    """Selection over an empty candidate set."""


class InvalidCountError(PMarkError, ValueError):
    """Evidence count outside [0, total]."""


class MissingResampleError(PMarkError, ValueError):
    """Online detection is missing resampled candidates for some sentence."""


class SeedCoverageError(PMarkError, KeyError):
    """Channel seed bits do not cover every (sentence, channel) cell."""


class ZeroGreenMassError(PMarkError, ValueError):
    """A green set with zero probability mass."""


class EnumerationTooLargeError(PMarkError, ValueError):
    """Exact subset enumeration requested beyond the guard size."""


class BudgetOutOfRangeError(PMarkError, ValueError):
    """Attack cosine-distance budget outside [0, 2]."""


class EmptyScoreSetError(PMarkError, ValueError):
    """ROC metrics need at least one score on each side."""


class EndpointUnavailableError(PMarkError, RuntimeError):
    """Completion/embedding endpoint failed after all retries."""


class EmptyCompletionError(PMarkError, RuntimeError):
    """The model returned a completion with no usable sentence."""


class ConfigError(PMarkError, ValueError):
    """Malformed configuration file or incompatible option values."""
