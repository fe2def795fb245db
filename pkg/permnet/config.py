"""Configuration for permnet."""

import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

from .enums import (
    DEFAULT_ACTION_INDEX_CAP,
    DEFAULT_BASIS_SIZE_CAP,
    DEFAULT_CLOSURE_CAP,
    DEFAULT_GRID_POINT_CAP,
)
from .exceptions import ConfigurationError


@dataclass
class PermNetConfig:
    """Library-wide limits and tolerances."""

    # Size caps
    closure_cap: int = DEFAULT_CLOSURE_CAP
    action_index_cap: int = DEFAULT_ACTION_INDEX_CAP
    basis_size_cap: int = DEFAULT_BASIS_SIZE_CAP
    grid_point_cap: int = DEFAULT_GRID_POINT_CAP

    # Randomness
    default_seed: int = 0

    # Tolerances
    equivariance_tolerance: float = 1e-9
    naive_tolerance: float = 1e-12

    # Domain box K = [domain_low, domain_high]^n
    domain_low: float = 0.0
    domain_high: float = 1.0

    log_level: str = "WARNING"

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        for name in ("closure_cap", "action_index_cap", "basis_size_cap", "grid_point_cap"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be positive", code="bad_cap")
        if self.equivariance_tolerance < 0 or self.naive_tolerance < 0:
            raise ConfigurationError("Tolerances must be non-negative", code="bad_tolerance")
        if not self.domain_low < self.domain_high:
            raise ConfigurationError(
                "domain_low must be smaller than domain_high", code="bad_domain"
            )

    @property
    def domain(self) -> "tuple[float, float]":
        """Get the (low, high) bounds of the domain box."""
        return (self.domain_low, self.domain_high)

    @classmethod
    def from_env(cls, **kwargs: Any) -> "PermNetConfig":
        """Create config from environment variables.

        Environment variables:
        - PERMNET_CLOSURE_CAP: group closure cap
        - PERMNET_ACTION_INDEX_CAP: flat index cap for actions
        - PERMNET_SEED: default seed
        - PERMNET_LOG_LEVEL: logging level name for the CLI
        """
        config_dict: Dict[str, Any] = {}
        env_map = {
            "PERMNET_CLOSURE_CAP": ("closure_cap", int),
            "PERMNET_ACTION_INDEX_CAP": ("action_index_cap", int),
            "PERMNET_SEED": ("default_seed", int),
            "PERMNET_LOG_LEVEL": ("log_level", str),
        }
        for env_name, (field_name, cast) in env_map.items():
            raw = os.getenv(env_name)
            if raw is None or raw == "":
                continue
            try:
                config_dict[field_name] = cast(raw)
            except ValueError as e:
                raise ConfigurationError(f"Invalid {env_name}: {raw!r}") from e

        # Override with any provided kwargs
        config_dict.update(kwargs)

        return cls(**config_dict)


# Global configuration instance
_global_config: Optional[PermNetConfig] = None


def set_config(config: PermNetConfig) -> None:
    """Set global configuration."""
    global _global_config
    _global_config = config


def get_config() -> PermNetConfig:
    """Get global configuration, reading ``PERMNET_*`` variables on first use."""
    global _global_config
    if _global_config is None:
        _global_config = PermNetConfig.from_env()
    return _global_config
