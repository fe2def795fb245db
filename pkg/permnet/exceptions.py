"""Custom exceptions for permnet."""

from typing import Any, Dict, Optional


class PermNetError(Exception):
    """Base exception for permnet."""

    def __init__(
        self,
        message: str,
        code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.code = code
        self.details = details


class ConfigurationError(PermNetError):
    """Raised when there's a configuration error."""
    pass


class GroupError(PermNetError):
    """Raised when a permutation or group operation is invalid."""
    pass


class DegreeMismatchError(GroupError):
    """Raised when permutations of different degrees are combined."""
    pass


class NotAPermutationError(GroupError):
    """Raised when an image table is not a bijection."""
    pass


class ClosureCapExceededError(GroupError):
    """Raised when group closure grows past the configured cap."""
    pass


class NotInGroupError(GroupError):
    """Raised when an element is not a member of the group."""
    pass


class IndexOutOfRangeError(GroupError):
    """Raised when a point index is outside 0..degree-1."""
    pass


class CosetInvariantError(GroupError):
    """Raised when coset representatives cannot be found for an orbit point."""
    pass


class ActionError(PermNetError):
    """Raised when a group action cannot be built or applied."""
    pass


class IndexCapExceededError(ActionError):
    """Raised when an action would exceed the flat index cap."""
    pass


class GroupMismatchError(ActionError):
    """Raised when two actions are not over the same group."""
    pass


class PatternError(PermNetError):
    """Raised when a sharing pattern or tied layer is inconsistent."""
    pass


class ShapeMismatchError(PermNetError):
    """Raised when vector or matrix shapes do not line up."""
    pass


class NetworkBuildError(PermNetError):
    """Raised when a network spec cannot be wired."""
    pass


class BoundViolationError(NetworkBuildError):
    """Raised when a narrow-deep or wide-shallow build breaks its width/depth regime."""
    pass


class TrainingError(PermNetError):
    """Raised when training fails."""
    pass


class DivergenceError(TrainingError):
    """Raised when activations, loss or gradients become non-finite."""
    pass


class GridCapExceededError(TrainingError):
    """Raised when an evaluation grid exceeds the configured point cap."""
    pass


class SpecParseError(PermNetError):
    """Raised when a JSON spec or cycle-notation string cannot be parsed."""
    pass
