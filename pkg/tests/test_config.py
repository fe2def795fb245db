"""Tests for configuration."""

import pytest

from permnet.config import PermNetConfig, get_config, set_config
from permnet.enums import DEFAULT_ACTION_INDEX_CAP, DEFAULT_CLOSURE_CAP, DEFAULT_GRID_POINT_CAP
from permnet.exceptions import ConfigurationError


class TestPermNetConfig:
    """Test library configuration."""

    @pytest.mark.unit
    def test_config_defaults(self):
        """Test default caps and tolerances."""
        config = PermNetConfig()

        assert config.closure_cap == DEFAULT_CLOSURE_CAP == 10080
        assert config.action_index_cap == DEFAULT_ACTION_INDEX_CAP == 4096
        assert config.grid_point_cap == DEFAULT_GRID_POINT_CAP == 10**6
        assert config.default_seed == 0
        assert config.equivariance_tolerance == 1e-9
        assert config.domain == (0.0, 1.0)

    @pytest.mark.unit
    def test_config_custom(self):
        """Test overriding fields."""
        config = PermNetConfig(closure_cap=24, domain_low=-1.0, domain_high=2.0)

        assert config.closure_cap == 24
        assert config.domain == (-1.0, 2.0)

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"closure_cap": 0},
            {"grid_point_cap": -5},
            {"equivariance_tolerance": -1e-9},
            {"domain_low": 1.0, "domain_high": 1.0},
        ],
    )
    def test_config_validation(self, kwargs):
        """Test invalid values are rejected."""
        with pytest.raises(ConfigurationError):
            PermNetConfig(**kwargs)

    @pytest.mark.unit
    def test_config_from_env(self, env_vars):
        """Test creating config from environment variables."""
        config = PermNetConfig.from_env()

        assert config.closure_cap == 5040
        assert config.action_index_cap == 2048
        assert config.default_seed == 7
        assert config.log_level == "DEBUG"

    @pytest.mark.unit
    def test_config_from_env_with_overrides(self, env_vars):
        """Test keyword arguments win over the environment."""
        config = PermNetConfig.from_env(default_seed=11)

        assert config.default_seed == 11
        assert config.closure_cap == 5040

    @pytest.mark.unit
    def test_config_from_env_invalid(self, monkeypatch):
        """Test a non-integer cap in the environment."""
        monkeypatch.setenv("PERMNET_CLOSURE_CAP", "lots")

        with pytest.raises(ConfigurationError, match="PERMNET_CLOSURE_CAP"):
            PermNetConfig.from_env()

    @pytest.mark.unit
    def test_config_from_env_ignores_empty(self, monkeypatch):
        """Test empty variables fall back to defaults."""
        monkeypatch.setenv("PERMNET_SEED", "")

        assert PermNetConfig.from_env().default_seed == 0


class TestGlobalConfig:
    """Test global configuration functions."""

    @pytest.mark.unit
    def test_get_config_creates_default(self):
        """Test the first call builds a default config."""
        config = get_config()

        assert isinstance(config, PermNetConfig)
        assert get_config() is config

    @pytest.mark.unit
    def test_set_and_get_config(self):
        """Test setting and getting global config."""
        config = PermNetConfig(basis_size_cap=64)
        set_config(config)

        assert get_config() is config
        assert get_config().basis_size_cap == 64

    @pytest.mark.unit
    def test_get_config_reads_environment(self, env_vars):
        """Test the first call picks up PERMNET_* variables."""
        config = get_config()

        assert config.closure_cap == 5040
        assert config.default_seed == 7
        assert config.log_level == "DEBUG"
