"""Command-line driver.

Usage::

    permnet verify --group S3 --out runs/s3
    permnet build --net net.json --seed 1 --out runs/net
    permnet train --net net.json --train train.json --out runs/train --epochs 50
    permnet export-pattern --group S4 --in-action natural --out-action natural
    permnet report-bounds --net net.json --mode deep
    permnet count-params --net net.json

Every command prints a JSON summary on stdout; with ``--out`` the summary and
any artifacts are also written there, next to a ``metadata.json`` sidecar
that holds the only timestamp.
"""

import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

from pydantic import ValidationError

from .__version__ import __description__, __title__, __version__
from .actions import (
    GroupAction,
    group_spec,
    induced_star_action,
    natural_action,
    tensor_action,
    union_of_permutations,
)
from .config import get_config
from .enums import ArchitectureMode, ExitCode
from .equi_linear import pair_orbits
from .exceptions import (
    ConfigurationError,
    NetworkBuildError,
    NotInGroupError,
    PermNetError,
    ShapeMismatchError,
    SpecParseError,
)
from .models import ExperimentConfig, GroupSpec, NetworkSpec, TrainConfig
from .nets import (
    Network,
    build_network,
    build_untied_baseline,
    net_parameter_bound,
    report_bounds,
)
from .perm_group import (
    PermutationGroup,
    coset_system,
    cyclic_group,
    dihedral_group,
    group_from_spec,
    symmetric_group,
    trivial_group,
)
from .trainer import get_target, make_dataset, train, write_training_log
from .utils import content_hash, parse_cycles, stable_json_dumps, utc_timestamp
from .verification import run_suite

logger = logging.getLogger(__name__)

_NAMED_GROUP_RE = re.compile(r"^(S|C|D|trivial)(\d+)$")
_NAMED_GROUPS: Dict[str, Callable[[int], PermutationGroup]] = {
    "S": symmetric_group,
    "C": cyclic_group,
    "D": dihedral_group,
    "trivial": trivial_group,
}


# -- Loading ---------------------------------------------------------------------------


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecParseError(f"Cannot read {path}: {e}", code="io") from e
    if not text.strip():
        raise SpecParseError(f"{path} is empty", code="empty_file")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecParseError(f"{path} is not valid JSON: {e}", code="json") from e


def _validate(model: Any, data: Any, source: str) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise SpecParseError(f"Invalid {source}: {e}", code="validation") from e


def parse_group_text(text: str) -> GroupSpec:
    """Inline group: ``S3``, ``C4``, ``D4``, ``trivial2`` or ``4:(0 1 2 3);(0 2)``."""
    match = _NAMED_GROUP_RE.match(text.strip())
    if match:
        group = _NAMED_GROUPS[match.group(1)](int(match.group(2)))
        return group_spec(group)
    degree, sep, cycles = text.partition(":")
    if not sep or not degree.strip().isdigit():
        raise SpecParseError(f"Cannot parse group {text!r}", code="group_syntax")
    n = int(degree)
    generators = [parse_cycles(c, n) for c in cycles.split(";") if c.strip()]
    return _validate(GroupSpec, {"degree": n, "generators": generators}, "group")


def load_group(config: ExperimentConfig) -> Optional[GroupSpec]:
    if config.group_path is not None:
        data = _read_json(config.group_path)
        return _validate(GroupSpec, data, f"group file {config.group_path}")
    if config.group_inline is not None:
        return parse_group_text(config.group_inline)
    return None


def load_network_spec(config: ExperimentConfig) -> NetworkSpec:
    """Net spec from ``--net`` with ``--group`` and ``--mode`` applied on top."""
    if config.net_path is None:
        raise SpecParseError(f"{config.command} needs --net", code="missing_net")
    data = _read_json(config.net_path)
    if not isinstance(data, dict):
        raise SpecParseError(f"{config.net_path} must hold a JSON object", code="json")
    group = load_group(config)
    if group is not None:
        data["group"] = group.model_dump(mode="json", exclude_none=True)
        data.pop("degree", None)
    if config.mode is not None:
        data["mode"] = config.mode.value
    spec = _validate(NetworkSpec, data, f"net spec {config.net_path}")
    if spec.transposition_cosets and spec.group is not None:
        try:
            coset_system(group_from_spec(spec.group), transpositions=True)
        except NotInGroupError as e:
            raise SpecParseError(
                f"transposition_cosets needs every (base k) in the group: {e.message}",
                code="transposition_cosets",
            ) from e
    return spec


def load_train_config(config: ExperimentConfig) -> TrainConfig:
    data = _read_json(config.train_path) if config.train_path is not None else {}
    train_config = _validate(TrainConfig, data, "train config")
    updates: Dict[str, Any] = {"seed": config.seed}
    if config.epochs is not None:
        updates["max_epochs"] = config.epochs
    return train_config.model_copy(update=updates)


def action_from_name(group: PermutationGroup, name: str) -> GroupAction:
    """``natural``, ``star``, ``tensor:k[:a]`` or ``union:copies``."""
    kind, _, rest = name.partition(":")
    try:
        args = [int(v) for v in rest.split(":")] if rest else []
    except ValueError as e:
        raise SpecParseError(f"Bad action {name!r}", code="action_syntax") from e
    if kind == "natural" and not args:
        return natural_action(group)
    if kind == "star" and not args:
        return induced_star_action(group)
    if kind == "tensor" and 1 <= len(args) <= 2:
        return tensor_action(group, *args)
    if kind == "union" and len(args) == 1:
        return union_of_permutations(group.degree, args[0], group)
    raise SpecParseError(f"Unknown action {name!r}", code="action_syntax")


def config_hash(config: ExperimentConfig, **inputs: Any) -> str:
    """Hash of the invocation and the resolved contents of its input files."""
    payload = config.model_dump(
        mode="json", exclude={"group_path", "net_path", "train_path", "out_dir"}
    )
    payload.update(
        {k: v.model_dump(mode="json") if hasattr(v, "model_dump") else v for k, v in inputs.items()}
    )
    return content_hash(payload)


# -- Output ---------------------------------------------------------------------------


def _emit(config: ExperimentConfig, summary: Dict[str, Any], name: str = "summary.json") -> None:
    text = stable_json_dumps(summary)
    sys.stdout.write(text)
    if config.out_dir is None:
        return
    config.out_dir.mkdir(parents=True, exist_ok=True)
    (config.out_dir / name).write_text(text)
    metadata = {
        "command": config.command,
        "config_hash": summary.get("config_hash"),
        "timestamp": utc_timestamp(),
        "version": __version__,
    }
    (config.out_dir / "metadata.json").write_text(stable_json_dumps(metadata))


def _net_summary(net: Network) -> Dict[str, Any]:
    return {
        "kind": net.kind.value,
        "name": net.name,
        "degree": net.degree,
        "in_features": net.in_features,
        "out_features": net.out_features,
        "parameter_count": net.parameter_count,
        "weight_count": net.weight_count,
        "hidden_widths": net.hidden_widths(),
        "sharing_hash": net.sharing_hash(),
    }


# -- Commands ------------------------------------------------------------------------------


def cmd_build(config: ExperimentConfig) -> int:
    spec = load_network_spec(config)
    net = build_network(spec, config.seed)
    summary = {
        "config_hash": config_hash(config, net=spec),
        "net": _net_summary(net),
        "bounds": report_bounds(net).model_dump(mode="json"),
    }
    if config.out_dir is not None:
        config.out_dir.mkdir(parents=True, exist_ok=True)
        net.save_checkpoint(config.out_dir / "checkpoint.json")
    _emit(config, summary)
    return ExitCode.SUCCESS


def cmd_verify(config: ExperimentConfig) -> int:
    """Run the property suite; exit code 1 when any property fails."""
    spec = load_group(config)
    if spec is None:
        raise SpecParseError("verify needs --group", code="missing_group")
    group = group_from_spec(spec)
    report = run_suite(group, seed=config.seed, corrupt_tying=config.corrupt_tying)
    summary = report.model_dump(mode="json")
    summary["passed"] = report.passed
    _emit(config, summary, "verification.json")
    for result in report.properties:
        if not result.passed:
            logger.error("Property %s failed: witness %s", result.name, result.witness)
    return ExitCode.SUCCESS if report.passed else ExitCode.PROPERTY_FAILURE


def cmd_train(config: ExperimentConfig) -> int:
    """Train the net (and optionally its untied twin); write log, checkpoint and summary."""
    spec = load_network_spec(config)
    train_config = load_train_config(config)
    net = build_network(spec, config.seed)
    target = get_target(train_config.target)
    dataset = make_dataset(
        target,
        net.in_features,
        train_config.sample_count,
        seed=train_config.seed,
        domain=spec.domain,
        group=net.group if train_config.symmetrized_sampling else None,
    )

    report = train(net, dataset, train_config, target=target, domain=spec.domain)
    summary: Dict[str, Any] = {
        "config_hash": config_hash(config, net=spec, train=train_config),
        "net": _net_summary(net),
        "bounds": report_bounds(net).model_dump(mode="json"),
        "parameter_bound": net_parameter_bound(net).model_dump(mode="json"),
        "training": report.model_dump(mode="json"),
    }
    if config.out_dir is not None:
        config.out_dir.mkdir(parents=True, exist_ok=True)
        write_training_log(report.epochs, config.out_dir / "training_log.csv")
        net.save_checkpoint(config.out_dir / "checkpoint.json")

    diverged = report.diverged
    if config.untied_baseline:
        baseline = build_untied_baseline(net, config.seed)
        baseline_report = train(baseline, dataset, train_config, target=target, domain=spec.domain)
        summary["baseline"] = {
            "net": _net_summary(baseline),
            "training": baseline_report.model_dump(mode="json"),
        }
        if config.out_dir is not None:
            write_training_log(baseline_report.epochs, config.out_dir / "baseline_log.csv")
        diverged = diverged or baseline_report.diverged

    _emit(config, summary)
    return ExitCode.RUNTIME_ABORT if diverged else ExitCode.SUCCESS


def cmd_export_pattern(config: ExperimentConfig) -> int:
    """Write the tied pattern between ``--in-action`` and ``--out-action`` of ``--group``."""
    spec = load_group(config)
    if spec is None:
        raise SpecParseError("export-pattern needs --group", code="missing_group")
    group = group_from_spec(spec)
    pattern = pair_orbits(
        action_from_name(group, config.in_action), action_from_name(group, config.out_action)
    )
    export = pattern.to_export().model_dump(mode="json", by_alias=True)
    _emit(config, export, "pattern.json")
    return ExitCode.SUCCESS


def cmd_report_bounds(config: ExperimentConfig) -> int:
    spec = load_network_spec(config)
    net = build_network(spec, config.seed)
    bounds = report_bounds(net)
    summary = {
        "config_hash": config_hash(config, net=spec),
        "bounds": bounds.model_dump(mode="json"),
    }
    _emit(config, summary, "bounds.json")
    return ExitCode.SUCCESS if bounds.passed else ExitCode.PROPERTY_FAILURE


def cmd_count_params(config: ExperimentConfig) -> int:
    """Tied versus untied parameter counts next to the theoretical bound."""
    spec = load_network_spec(config)
    net = build_network(spec, config.seed)
    baseline = build_untied_baseline(net, config.seed)
    bound = net_parameter_bound(net)
    summary = {
        "config_hash": config_hash(config, net=spec),
        "tied": {"parameters": net.parameter_count, "weights": net.weight_count},
        "untied": {"parameters": baseline.parameter_count, "weights": baseline.weight_count},
        "parameter_bound": bound.model_dump(mode="json"),
    }
    _emit(config, summary, "params.json")
    return ExitCode.SUCCESS


HANDLERS: Dict[str, Callable[[ExperimentConfig], int]] = {
    "build": cmd_build,
    "verify": cmd_verify,
    "train": cmd_train,
    "export-pattern": cmd_export_pattern,
    "report-bounds": cmd_report_bounds,
    "count-params": cmd_count_params,
}


# -- Entry point --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=__title__, description=__description__
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--group",
        help="Group JSON file, a name (S3, C4, D4, trivial2) or 'n:(cycles);(cycles)'.",
    )
    common.add_argument("--out", type=Path, help="Output directory.")
    common.add_argument("--seed", type=int, default=None, help="Seed for all randomness.")
    common.add_argument(
        "--log-level", default=None, help="Logging level (default from PERMNET_LOG_LEVEL)."
    )

    net_args = argparse.ArgumentParser(add_help=False)
    net_args.add_argument("--net", type=Path, required=True, help="Network spec JSON file.")
    net_args.add_argument(
        "--mode", choices=[m.value for m in ArchitectureMode], help="Override the spec's mode."
    )

    subparsers.add_parser(
        "build", parents=[common, net_args], help="Build a net and write its checkpoint."
    )

    verify = subparsers.add_parser("verify", parents=[common], help="Run the property suite.")
    verify.add_argument(
        "--corrupt-tying", action="store_true", help="Untie one weight as a negative control."
    )

    train_parser = subparsers.add_parser("train", parents=[common, net_args], help="Train a net.")
    train_parser.add_argument("--train", type=Path, help="Train config JSON file.")
    train_parser.add_argument("--epochs", type=int, help="Override max_epochs.")
    train_parser.add_argument(
        "--untied-baseline", action="store_true", help="Also train the untied twin."
    )

    export = subparsers.add_parser(
        "export-pattern", parents=[common], help="Export a sharing pattern."
    )
    for flag in ("--in-action", "--out-action"):
        export.add_argument(flag, default="natural", help="natural, star, tensor:k[:a] or union:c.")

    subparsers.add_parser(
        "report-bounds", parents=[common, net_args], help="Width/depth report."
    )
    subparsers.add_parser(
        "count-params", parents=[common, net_args], help="Tied vs untied parameters."
    )
    return parser


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    group_path = group_inline = None
    if args.group is not None:
        if Path(args.group).suffix == ".json" or Path(args.group).is_file():
            group_path = Path(args.group)
        else:
            group_inline = args.group
    data = {
        "command": args.command,
        "group_path": group_path,
        "group_inline": group_inline,
        "net_path": getattr(args, "net", None),
        "train_path": getattr(args, "train", None),
        "out_dir": args.out,
        "seed": args.seed if args.seed is not None else get_config().default_seed,
        "mode": getattr(args, "mode", None),
        "untied_baseline": getattr(args, "untied_baseline", False),
        "epochs": getattr(args, "epochs", None),
        "corrupt_tying": getattr(args, "corrupt_tying", False),
        "in_action": getattr(args, "in_action", "natural"),
        "out_action": getattr(args, "out_action", "natural"),
    }
    return _validate(ExperimentConfig, data, "command line")


def _main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return ExitCode.SUCCESS if e.code == 0 else ExitCode.USAGE_ERROR

    try:
        defaults = get_config()
    except ConfigurationError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{e.message}\n")
        return ExitCode.USAGE_ERROR
    level = (args.log_level or defaults.log_level).upper()
    if not isinstance(logging.getLevelName(level), int):
        parser.print_usage(sys.stderr)
        return ExitCode.USAGE_ERROR
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )

    try:
        config = _experiment_config(args)
        return int(HANDLERS[config.command](config))
    except (SpecParseError, ConfigurationError, ShapeMismatchError, NetworkBuildError) as e:
        logger.error("%s", e.message)
        return ExitCode.USAGE_ERROR
    except PermNetError as e:
        logger.error("%s: %s", type(e).__name__, e.message)
        return ExitCode.RUNTIME_ABORT


def main() -> None:
    raise SystemExit(_main())


if __name__ == "__main__":
    main()
