"""Tests for version information."""

import re

import pytest

import permnet
from permnet.__version__ import __description__, __title__, __version__, __version_info__
from permnet.cli import build_parser


class TestVersionInfo:
    """Test version information."""

    @pytest.mark.unit
    def test_version_format(self):
        """Test version follows semantic versioning."""
        assert re.match(r"^\d+\.\d+\.\d+$", __version__)

    @pytest.mark.unit
    def test_version_info_tuple(self):
        """Test version info tuple matches version string."""
        assert __version_info__ == tuple(int(p) for p in __version__.split("."))

    @pytest.mark.unit
    def test_package_metadata(self):
        assert __title__ == "permnet"
        assert __description__

    @pytest.mark.unit
    def test_parser_uses_metadata(self):
        """Test the command line is named and described from the metadata."""
        parser = build_parser()

        assert parser.prog == __title__
        assert parser.description == __description__

    @pytest.mark.unit
    def test_version_imported_in_main_module(self):
        assert permnet.__version__ == __version__
