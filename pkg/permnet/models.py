"""Pydantic models for permnet's JSON inputs and reports."""

from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)

from .enums import (
    Activation,
    ArchitectureMode,
    CheckStatus,
    EncoderKind,
    NetKind,
    OptimizerKind,
    StabNetKind,
)
from .utils import parse_cycles


class PermNetModel(BaseModel):
    """Base model with common configuration."""

    model_config = ConfigDict(
        populate_by_name=True,
        str_strip_whitespace=True,
        extra="forbid",
    )


class GroupSpec(PermNetModel):
    """Group given by generators, as image tables or cycle strings.

    ``{"degree": 3, "generators": [[1, 0, 2], [0, 2, 1]]}`` and
    ``{"degree": 3, "cycles": ["(0 1)", "(1 2)"]}`` describe the same group.
    """

    degree: int = Field(..., ge=1)
    generators: List[List[int]] = Field(default_factory=list)
    cycles: Optional[List[str]] = None
    name: Optional[str] = None

    @model_validator(mode="after")
    def merge_cycles(self) -> "GroupSpec":
        """Convert cycle strings to image tables and validate every generator."""
        if self.cycles:
            self.generators = list(self.generators) + [
                parse_cycles(text, self.degree) for text in self.cycles
            ]
            self.cycles = None
        for images in self.generators:
            if sorted(images) != list(range(self.degree)):
                raise ValueError(f"Generator {images} is not a permutation of 0..{self.degree - 1}")
        return self


class ActionExport(PermNetModel):
    """Explicit action tables for cross-checking by external tools."""

    group: GroupSpec
    points: int = Field(..., ge=1)
    tables: List[List[int]]


class SharingPatternExport(PermNetModel):
    """Orbit-id tables of a tied layer (the "tying compiler" output)."""

    in_size: int = Field(..., alias="M", ge=1)
    out_size: int = Field(..., alias="N", ge=1)
    weight_orbit_id: List[List[int]]
    bias_orbit_id: List[int]
    free_params: int = Field(..., ge=0)

    @model_validator(mode="after")
    def check_shapes(self) -> "SharingPatternExport":
        if len(self.weight_orbit_id) != self.out_size or any(
            len(row) != self.in_size for row in self.weight_orbit_id
        ):
            raise ValueError("weight_orbit_id must be an N x M table")
        if len(self.bias_orbit_id) != self.out_size:
            raise ValueError("bias_orbit_id must have N entries")
        return self


class MLPSpec(PermNetModel):
    """Plain ReLU MLP ``d_0 -> d_1 -> ... -> d_H``.

    ``activations[k]`` follows affine map ``k``; when omitted, hidden maps get
    ReLU and the final map is linear.
    """

    widths: List[int] = Field(..., min_length=2)
    activations: Optional[List[Activation]] = None

    @field_validator("widths")
    @classmethod
    def validate_widths(cls, v: List[int]) -> List[int]:
        if any(w < 1 for w in v):
            raise ValueError("Layer widths must be positive")
        return v

    @model_validator(mode="after")
    def validate_activations(self) -> "MLPSpec":
        if self.activations is not None:
            if len(self.activations) != len(self.widths) - 1:
                raise ValueError("Need exactly one activation per affine map")
            if self.activations[-1] != Activation.IDENTITY:
                raise ValueError("The last activation must be identity")
        return self

    @property
    def depth(self) -> int:
        """Number of affine maps ``H``."""
        return len(self.widths) - 1

    @property
    def max_width(self) -> int:
        return max(self.widths)

    @property
    def in_features(self) -> int:
        return self.widths[0]

    @property
    def out_features(self) -> int:
        return self.widths[-1]

    def resolved_activations(self) -> List[Activation]:
        if self.activations is not None:
            return list(self.activations)
        return [Activation.RELU] * (self.depth - 1) + [Activation.IDENTITY]


class TensorLayerSpec(PermNetModel):
    """Tensor action ``(order k, channels a)`` of one hidden representation."""

    order: int = Field(1, ge=1)
    channels: int = Field(1, ge=1)


class NetworkSpec(PermNetModel):
    """Architecture description, loadable from JSON.

    Example:
        >>> NetworkSpec(kind="invariant_sum", degree=3,
        ...             phi={"widths": [1, 16, 4]}, rho={"widths": [4, 16, 1]})
    """

    kind: NetKind
    mode: ArchitectureMode = ArchitectureMode.WIDE
    group: Optional[GroupSpec] = None
    degree: Optional[int] = Field(None, ge=1)
    domain: Tuple[float, float] = (0.0, 1.0)
    phi: Optional[MLPSpec] = None
    rho: Optional[MLPSpec] = None
    mlp: Optional[MLPSpec] = None
    stab_kind: Optional[StabNetKind] = None
    tensor_layers: List[TensorLayerSpec] = Field(default_factory=list)
    encoder: EncoderKind = EncoderKind.TRAINABLE
    base: int = Field(0, ge=0)
    transposition_cosets: bool = False

    @field_validator("domain")
    @classmethod
    def validate_domain(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not v[0] < v[1]:
            raise ValueError("domain must satisfy low < high")
        return v

    @model_validator(mode="after")
    def resolve_degree(self) -> "NetworkSpec":
        if self.group is not None:
            if self.degree is not None and self.degree != self.group.degree:
                raise ValueError("degree disagrees with group.degree")
            self.degree = self.group.degree
        if self.degree is None:
            raise ValueError("Either degree or group is required")
        if self.kind in (NetKind.INVARIANT_TENSOR, NetKind.EQUIVARIANT) and self.group is None:
            raise ValueError(f"kind {self.kind.value} requires a group")
        return self


class TrainConfig(PermNetModel):
    """Optimizer and experiment protocol for one training run."""

    optimizer: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = Field(1e-2, gt=0)
    batch_size: int = Field(64, ge=1)
    max_epochs: int = Field(2000, ge=0)
    seed: int = 0
    target: str = "prod_plus_sumsq"
    target_sup_error: float = Field(0.05, gt=0)
    patience: int = Field(300, ge=1)
    lr_factor: float = Field(0.5, gt=0, lt=1)
    lr_patience: Optional[int] = Field(25, ge=1)
    min_learning_rate: float = Field(1e-5, gt=0)
    time_budget: Optional[float] = Field(None, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    grid_points_per_axis: int = Field(21, ge=2)
    sample_count: int = Field(2048, ge=1)
    symmetrized_sampling: bool = False

    @field_validator("betas")
    @classmethod
    def validate_betas(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in v):
            raise ValueError("betas must lie in [0, 1)")
        return v


class ExperimentConfig(PermNetModel):
    """Resolved command-line invocation."""

    command: str
    group_path: Optional[Path] = None
    group_inline: Optional[str] = None
    net_path: Optional[Path] = None
    train_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    seed: int = 0
    mode: Optional[ArchitectureMode] = None
    untied_baseline: bool = False
    epochs: Optional[int] = Field(None, ge=0)
    corrupt_tying: bool = False
    in_action: str = "natural"
    out_action: str = "natural"

    @field_validator("command")
    @classmethod
    def validate_command(cls, v: str) -> str:
        allowed = ("build", "verify", "train", "export-pattern", "report-bounds", "count-params")
        if v not in allowed:
            raise ValueError(f"Unknown command {v!r}")
        return v

    @field_validator("group_path", "net_path", "train_path")
    @classmethod
    def validate_exists(cls, v: Optional[Path]) -> Optional[Path]:
        if v is not None and not v.is_file():
            raise ValueError(f"File not found: {v}")
        return v

    @model_validator(mode="after")
    def check_group_source(self) -> "ExperimentConfig":
        if self.group_path is not None and self.group_inline is not None:
            raise ValueError("Give the group either as a file or inline, not both")
        return self

    @field_serializer("group_path", "net_path", "train_path", "out_dir")
    def serialize_path(self, v: Optional[Path]) -> Optional[str]:
        return None if v is None else v.as_posix()


# -- Reports ------------------------------------------------------------------


class BoundsReport(PermNetModel):
    """Measured width/depth of a built net next to the applicable bounds."""

    kind: NetKind
    mode: ArchitectureMode
    degree: int
    width: int
    depth: int
    width_bound: Optional[int] = None
    depth_bound: Optional[int] = None
    lane_width_bound: Optional[int] = None
    passed: bool


class ParameterBound(PermNetModel):
    """``M^(2D) * (2/n^2)^d`` next to the usual and the exact tied counts."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    widths: List[int]
    degree: int
    depth: int
    max_width: int
    equivariant_layers: int
    usual_count: int
    bound: Fraction
    exact_tied_count: Optional[int] = None
    within_bound: Optional[bool] = None
    exceeds_float: bool = False

    @field_serializer("bound")
    def serialize_bound(self, v: Fraction) -> str:
        return str(v)


class PropertyResult(PermNetModel):
    """One row of the verification report."""

    name: str
    status: CheckStatus
    max_residual: float = 0.0
    tolerance: Optional[float] = None
    cases: int = 0
    detail: Optional[str] = None
    witness: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.status == CheckStatus.PASS


class VerificationReport(PermNetModel):
    group: GroupSpec
    seed: int
    config_hash: str
    properties: List[PropertyResult]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)


class EpochRecord(PermNetModel):
    epoch: int
    train_mse: float
    grid_sup_error: Optional[float] = None
    equivariance_residual: Optional[float] = None


class TrainingReport(PermNetModel):
    """Loss curve and final metrics of one run."""

    seed: int
    parameter_count: int
    epochs: List[EpochRecord] = Field(default_factory=list)
    final_train_mse: float
    final_sup_error: Optional[float] = None
    best_sup_error: Optional[float] = None
    best_epoch: int = 0
    stopped_early: bool = False
    reached_target: bool = False
    out_of_time: bool = False
    diverged: bool = False


class CheckpointHeader(PermNetModel):
    """Header stored in front of a flat parameter array."""

    kind: str
    parameter_count: int
    sharing_hash: str
    version: str
