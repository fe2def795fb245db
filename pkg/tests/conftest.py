"""Pytest configuration and shared fixtures."""

import json
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pytest

import permnet
from permnet.perm_group import (
    Permutation,
    PermutationGroup,
    cyclic_group,
    dihedral_group,
    generate,
    symmetric_group,
)


@pytest.fixture
def s2() -> PermutationGroup:
    return symmetric_group(2)


@pytest.fixture
def s3() -> PermutationGroup:
    return symmetric_group(3)


@pytest.fixture
def s4() -> PermutationGroup:
    return symmetric_group(4)


@pytest.fixture
def c4() -> PermutationGroup:
    return cyclic_group(4)


@pytest.fixture
def d4() -> PermutationGroup:
    return dihedral_group(4)


@pytest.fixture
def s2_in_s3() -> PermutationGroup:
    """``S_2`` acting on the first two of three points; orbits ``{0, 1}`` and ``{2}``."""
    return generate(3, [Permutation.transposition(3, 0, 1)], name="S2<S3")


@pytest.fixture(params=["S2", "S3", "S4", "C4", "D4", "S2<S3"])
def fixture_group(request) -> PermutationGroup:
    """Every group of the fixture set in turn."""
    builders = {
        "S2": lambda: symmetric_group(2),
        "S3": lambda: symmetric_group(3),
        "S4": lambda: symmetric_group(4),
        "C4": lambda: cyclic_group(4),
        "D4": lambda: dihedral_group(4),
        "S2<S3": lambda: generate(3, [Permutation.transposition(3, 0, 1)], name="S2<S3"),
    }
    return builders[request.param]()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def sum_net_spec() -> Dict[str, Any]:
    """Wide invariant sum net on three coordinates."""
    return {
        "kind": "invariant_sum",
        "degree": 3,
        "phi": {"widths": [1, 8, 4]},
        "rho": {"widths": [4, 8, 1]},
    }


@pytest.fixture
def equivariant_net_spec() -> Dict[str, Any]:
    """Wide S3-equivariant net built from sum-form stabilizer nets."""
    return {
        "kind": "equivariant",
        "group": {"degree": 3, "cycles": ["(0 1)", "(0 1 2)"]},
        "phi": {"widths": [1, 8, 4]},
        "rho": {"widths": [5, 8, 1]},
    }


@pytest.fixture
def write_json(tmp_path: Path):
    """Write a JSON document under ``tmp_path`` and return its path."""

    def _write(name: str, data: Any) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return _write


@pytest.fixture(autouse=True)
def reset_global_config():
    """Reset global configuration after each test."""
    yield
    # Reset global config
    if hasattr(permnet.config, "_global_config"):
        permnet.config._global_config = None


@pytest.fixture
def env_vars(monkeypatch):
    """Set environment variables for testing."""
    env = {
        "PERMNET_CLOSURE_CAP": "5040",
        "PERMNET_ACTION_INDEX_CAP": "2048",
        "PERMNET_SEED": "7",
        "PERMNET_LOG_LEVEL": "DEBUG",
    }
    for key, value in env.items():
        monkeypatch.setenv(key, value)
    return env
