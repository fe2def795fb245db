"""Version information for permnet."""

__title__ = "permnet"
__description__ = "Finite-group invariant and equivariant ReLU networks with orbit weight tying"
__version__ = "0.1.0"
__version_info__ = tuple(int(i) for i in __version__.split("."))

__all__ = ["__title__", "__description__", "__version__", "__version_info__"]
