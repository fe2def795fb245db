"""Tests for the command-line driver."""

import csv
import json
import sys

import pytest
from freezegun import freeze_time

from permnet.__version__ import __version__
from permnet.cli import _main, action_from_name, main, parse_group_text
from permnet.enums import ExitCode
from permnet.exceptions import SpecParseError
from permnet.perm_group import dihedral_group, group_from_spec, symmetric_group


@pytest.fixture
def net_file(write_json, sum_net_spec):
    return write_json("net.json", sum_net_spec)


@pytest.fixture
def equivariant_net_file(write_json, equivariant_net_spec):
    return write_json("equivariant.json", equivariant_net_spec)


@pytest.fixture
def train_file(write_json):
    return write_json(
        "train.json",
        {"max_epochs": 2, "sample_count": 32, "batch_size": 16, "grid_points_per_axis": 3},
    )


def run(capsys, *argv):
    code = _main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


class TestGroupParsing:
    """Test the inline group syntax."""

    @pytest.mark.unit
    def test_named_groups(self):
        assert group_from_spec(parse_group_text("S3")) == symmetric_group(3)
        assert group_from_spec(parse_group_text("D4")) == dihedral_group(4)
        assert group_from_spec(parse_group_text("trivial2")).order == 1

    @pytest.mark.unit
    def test_cycle_syntax(self):
        spec = parse_group_text("4:(0 1 2 3);(1 3)")

        assert group_from_spec(spec) == dihedral_group(4)

    @pytest.mark.unit
    @pytest.mark.parametrize("text", ["X7", "S", "four:(0 1)", "3:(0 5)"])
    def test_rejects_bad_text(self, text):
        with pytest.raises(SpecParseError):
            parse_group_text(text)

    @pytest.mark.unit
    def test_action_names(self, s3):
        assert action_from_name(s3, "natural").point_count == 3
        assert action_from_name(s3, "star").point_count == 9
        assert action_from_name(s3, "tensor:2:2").point_count == 18
        assert action_from_name(s3, "union:2").point_count == 6
        with pytest.raises(SpecParseError):
            action_from_name(s3, "tensor:x")
        with pytest.raises(SpecParseError):
            action_from_name(s3, "cube")


class TestVerifyCommand:
    """Test ``permnet verify``."""

    @pytest.mark.integration
    def test_s3_passes(self, capsys):
        code, summary = run(capsys, "verify", "--group", "S3", "--seed", "0")

        assert code == ExitCode.SUCCESS
        assert summary["passed"] is True
        assert summary["group"]["degree"] == 3

    @pytest.mark.integration
    def test_corrupt_tying_exits_one(self, capsys):
        code, summary = run(capsys, "verify", "--group", "S3", "--corrupt-tying")

        assert code == ExitCode.PROPERTY_FAILURE
        failed = [p for p in summary["properties"] if p["status"] == "fail"]
        assert "tied_layer_equivariance" in [p["name"] for p in failed]

    @pytest.mark.integration
    def test_group_file(self, capsys, write_json, tmp_path):
        path = write_json("group.json", {"degree": 3, "cycles": ["(0 1)", "(0 1 2)"]})
        code, _ = run(capsys, "verify", "--group", str(path), "--out", str(tmp_path / "run"))

        assert code == ExitCode.SUCCESS
        assert (tmp_path / "run" / "verification.json").is_file()

    @pytest.mark.unit
    def test_empty_group_file(self, capsys, tmp_path):
        path = tmp_path / "group.json"
        path.write_text("")

        code, summary = run(capsys, "verify", "--group", str(path))
        assert code == ExitCode.USAGE_ERROR
        assert summary is None

    @pytest.mark.unit
    def test_invalid_json(self, capsys, tmp_path):
        path = tmp_path / "group.json"
        path.write_text("{degree: 3")

        assert run(capsys, "verify", "--group", str(path))[0] == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_missing_group_file(self, capsys, tmp_path):
        code, _ = run(capsys, "verify", "--group", str(tmp_path / "missing.json"))

        assert code == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_not_a_permutation(self, capsys, write_json):
        path = write_json("group.json", {"degree": 3, "generators": [[0, 0, 1]]})

        assert run(capsys, "verify", "--group", str(path))[0] == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_group_required(self, capsys):
        assert run(capsys, "verify")[0] == ExitCode.USAGE_ERROR


class TestExportPattern:
    """Test ``permnet export-pattern``."""

    @pytest.mark.unit
    def test_s4_natural(self, capsys):
        code, pattern = run(capsys, "export-pattern", "--group", "S4")

        assert code == ExitCode.SUCCESS
        assert pattern["M"] == pattern["N"] == 4
        assert len({i for row in pattern["weight_orbit_id"] for i in row}) == 2
        assert pattern["free_params"] == 3

    @pytest.mark.unit
    def test_reexport_is_byte_identical(self, capsys, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run(capsys, "export-pattern", "--group", "S4", "--out", str(first))
        run(capsys, "export-pattern", "--group", "S4", "--out", str(second))

        assert (first / "pattern.json").read_bytes() == (second / "pattern.json").read_bytes()

    @pytest.mark.unit
    def test_inline_dihedral(self, capsys):
        _, pattern = run(capsys, "export-pattern", "--group", "4:(0 1 2 3);(1 3)")

        # diagonal, neighbours, opposite corners
        assert len({i for row in pattern["weight_orbit_id"] for i in row}) == 3

    @pytest.mark.unit
    def test_tensor_target(self, capsys):
        _, pattern = run(
            capsys, "export-pattern", "--group", "S3", "--out-action", "tensor:2"
        )

        assert pattern["N"] == 9
        assert pattern["free_params"] == 5 + 2

    @pytest.mark.unit
    def test_bad_action(self, capsys):
        code, _ = run(capsys, "export-pattern", "--group", "S3", "--in-action", "cube")

        assert code == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    @freeze_time("2026-01-02 03:04:05")
    def test_metadata_sidecar(self, capsys, tmp_path):
        run(capsys, "export-pattern", "--group", "S3", "--out", str(tmp_path))
        metadata = json.loads((tmp_path / "metadata.json").read_text())

        assert metadata["command"] == "export-pattern"
        assert metadata["timestamp"] == "2026-01-02T03:04:05+00:00"
        assert metadata["version"] == __version__


class TestNetCommands:
    """Test the commands that build nets from a spec file."""

    @pytest.mark.unit
    def test_build_writes_checkpoint(self, capsys, net_file, tmp_path):
        out = tmp_path / "build"
        code, summary = run(capsys, "build", "--net", str(net_file), "--out", str(out))

        assert code == ExitCode.SUCCESS
        assert summary["net"]["parameter_count"] == 101
        assert summary["bounds"]["depth"] == 3
        checkpoint = json.loads((out / "checkpoint.json").read_text())
        assert checkpoint["header"]["sharing_hash"] == summary["net"]["sharing_hash"]

    @pytest.mark.unit
    def test_config_hash_ignores_paths(self, capsys, net_file, tmp_path):
        _, first = run(capsys, "build", "--net", str(net_file), "--out", str(tmp_path / "a"))
        _, second = run(capsys, "build", "--net", str(net_file), "--out", str(tmp_path / "b"))
        _, reseeded = run(capsys, "build", "--net", str(net_file), "--seed", "5")

        assert first["config_hash"] == second["config_hash"]
        assert first["config_hash"] != reseeded["config_hash"]

    @pytest.mark.unit
    def test_group_override(self, capsys, equivariant_net_file):
        code, summary = run(
            capsys, "build", "--net", str(equivariant_net_file), "--group", "S4"
        )

        assert code == ExitCode.SUCCESS
        assert summary["net"]["kind"] == "equivariant"
        assert summary["net"]["degree"] == 4

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "group,expected", [("S4", ExitCode.SUCCESS), ("C4", ExitCode.USAGE_ERROR)]
    )
    def test_transposition_cosets_need_transpositions(
        self, capsys, write_json, equivariant_net_spec, group, expected
    ):
        path = write_json("net.json", {**equivariant_net_spec, "transposition_cosets": True})
        code, _ = run(capsys, "build", "--net", str(path), "--group", group)

        assert code == expected

    @pytest.mark.unit
    def test_invalid_spec(self, capsys, write_json):
        path = write_json("net.json", {"kind": "invariant_sum", "degree": 3})

        assert run(capsys, "build", "--net", str(path))[0] == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_deep_mode_violation_is_a_usage_error(self, capsys, net_file):
        # phi is 8 wide, above the deep-mode lane bound of n + 1
        code, _ = run(capsys, "report-bounds", "--net", str(net_file), "--mode", "deep")

        assert code == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_report_bounds(self, capsys, equivariant_net_file):
        code, summary = run(capsys, "report-bounds", "--net", str(equivariant_net_file))

        assert code == ExitCode.SUCCESS
        assert summary["bounds"]["depth_bound"] == 3
        assert summary["bounds"]["passed"] is True

    @pytest.mark.unit
    def test_count_params(self, capsys, equivariant_net_file):
        code, summary = run(capsys, "count-params", "--net", str(equivariant_net_file))

        assert code == ExitCode.SUCCESS
        assert summary["untied"]["parameters"] > summary["tied"]["parameters"]
        assert summary["parameter_bound"]["exact_tied_count"] == summary["tied"]["weights"]


class TestTrainCommand:
    """Test ``permnet train``."""

    @pytest.mark.integration
    def test_zero_epochs(self, capsys, net_file, tmp_path):
        code, summary = run(
            capsys, "train", "--net", str(net_file), "--epochs", "0", "--out", str(tmp_path)
        )

        assert code == ExitCode.SUCCESS
        assert [e["epoch"] for e in summary["training"]["epochs"]] == [0]
        with open(tmp_path / "training_log.csv", newline="") as handle:
            assert len(list(csv.DictReader(handle))) == 1
        assert (tmp_path / "checkpoint.json").is_file()

    @pytest.mark.integration
    def test_untied_baseline(self, capsys, equivariant_net_file, write_json, tmp_path):
        train_file = write_json(
            "train.json",
            {
                "target": "square_plus_sum",
                "max_epochs": 2,
                "sample_count": 32,
                "batch_size": 16,
                "grid_points_per_axis": 3,
            },
        )
        code, summary = run(
            capsys,
            "train",
            "--net",
            str(equivariant_net_file),
            "--train",
            str(train_file),
            "--untied-baseline",
            "--out",
            str(tmp_path),
        )

        assert code == ExitCode.SUCCESS
        assert summary["baseline"]["net"]["parameter_count"] > summary["net"]["parameter_count"]
        assert (tmp_path / "baseline_log.csv").is_file()
        tied = summary["training"]["epochs"]
        assert all(e["equivariance_residual"] < 1e-9 for e in tied)

    @pytest.mark.integration
    def test_target_width_must_match(self, capsys, equivariant_net_file, train_file):
        # prod_plus_sumsq is scalar, the equivariant net has three outputs
        code, summary = run(
            capsys, "train", "--net", str(equivariant_net_file), "--train", str(train_file)
        )

        assert code == ExitCode.USAGE_ERROR
        assert summary is None

    @pytest.mark.integration
    def test_unknown_target(self, capsys, net_file, write_json):
        train_path = write_json("train.json", {"target": "cubes"})
        code, _ = run(capsys, "train", "--net", str(net_file), "--train", str(train_path))

        assert code == ExitCode.RUNTIME_ABORT


class TestEntryPoint:
    """Test argument handling and exit codes."""

    @pytest.mark.unit
    def test_unknown_command(self, capsys):
        assert _main(["frobnicate"]) == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_version(self, capsys):
        assert _main(["--version"]) == ExitCode.SUCCESS
        assert __version__ in capsys.readouterr().out

    @pytest.mark.unit
    def test_bad_log_level(self, capsys):
        assert _main(["verify", "--group", "S2", "--log-level", "LOUD"]) == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_log_level_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("PERMNET_LOG_LEVEL", "LOUD")

        assert _main(["verify", "--group", "S2"]) == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_invalid_environment_is_a_usage_error(self, capsys, monkeypatch):
        monkeypatch.setenv("PERMNET_CLOSURE_CAP", "many")

        assert _main(["verify", "--group", "S2"]) == ExitCode.USAGE_ERROR

    @pytest.mark.unit
    def test_seed_from_environment(self, capsys, monkeypatch, net_file):
        _, explicit = run(capsys, "build", "--net", str(net_file), "--seed", "5")
        monkeypatch.setattr("permnet.config._global_config", None)
        monkeypatch.setenv("PERMNET_SEED", "5")
        _, from_env = run(capsys, "build", "--net", str(net_file))

        assert from_env["config_hash"] == explicit["config_hash"]

    @pytest.mark.unit
    def test_main_exits(self, capsys, monkeypatch):
        monkeypatch.setattr(sys, "argv", ["permnet", "export-pattern", "--group", "S2"])

        with pytest.raises(SystemExit) as exc_info:
            main()
        assert exc_info.value.code == ExitCode.SUCCESS
