"""Enumerations for permnet."""

from enum import Enum, IntEnum


class NetKind(str, Enum):
    """Architecture families that can be built."""

    INVARIANT_SUM = "invariant_sum"
    INVARIANT_TENSOR = "invariant_tensor"
    STAB_INVARIANT = "stab_invariant"
    EQUIVARIANT = "equivariant"


class ArchitectureMode(str, Enum):
    """Width/depth regime of the phi and rho lanes."""

    WIDE = "wide"
    DEEP = "deep"


class StabNetKind(str, Enum):
    """How a stabilizer-invariant component is realized."""

    SUM = "sum"
    SYMMETRIZED = "symmetrized"


class EncoderKind(str, Enum):
    """How the per-coordinate phi lane of a sum net is realized."""

    TRAINABLE = "trainable"
    EXACT = "exact"


class OptimizerKind(str, Enum):
    """Optimizers supported by the trainer."""

    SGD = "sgd"
    ADAM = "adam"


class Activation(str, Enum):
    """Layer activations."""

    RELU = "relu"
    IDENTITY = "identity"


class CheckStatus(str, Enum):
    """Outcome of one verification property."""

    PASS = "pass"
    FAIL = "fail"


class ExitCode(IntEnum):
    """CLI exit codes."""

    SUCCESS = 0
    PROPERTY_FAILURE = 1
    USAGE_ERROR = 2
    RUNTIME_ABORT = 3


# Default values
DEFAULT_CLOSURE_CAP = 10080  # covers S_7 (order 5040)
DEFAULT_ACTION_INDEX_CAP = 4096
DEFAULT_BASIS_SIZE_CAP = 4096
DEFAULT_GRID_POINT_CAP = 10**6
ZERO_ORBIT = -1  # sharing-pattern sentinel for entries constrained to zero
