"""
permnet

Invariant and equivariant ReLU networks for finite permutation groups, with
weight tying derived from orbits.

Basic Usage:
    >>> import permnet
    >>> s3 = permnet.symmetric_group(3)
    >>> nat = permnet.natural_action(s3)
    >>> pattern = permnet.pair_orbits(nat, nat)
    >>> pattern.weight_count
    2
    >>> report = permnet.run_suite(s3, seed=0)
    >>> report.passed
    True
"""

from . import utils
from .__version__ import __version__
from .actions import (
    GroupAction,
    IndexScheme,
    apply,
    extend_with_trivial_channels,
    induced_star_action,
    is_free,
    is_union_of_permutations,
    natural_action,
    sigma_tilde,
    tensor_action,
    tuple_action,
    union_of_permutations,
)
from .config import PermNetConfig, get_config, set_config
from .enums import (
    Activation,
    ArchitectureMode,
    CheckStatus,
    EncoderKind,
    ExitCode,
    NetKind,
    OptimizerKind,
    StabNetKind,
)
from .equi_linear import (
    SharingPattern,
    TiedLinearLayer,
    brute_force_equivariant_basis,
    count_free_params,
    dense_pattern,
    equivariant_nullspace_dimension,
    pair_orbits,
    lambda_gamma_basis,
    parameter_bound,
    realize,
    star_intertwiner_counts,
)
from .exceptions import (
    ActionError,
    BoundViolationError,
    ClosureCapExceededError,
    ConfigurationError,
    CosetInvariantError,
    DegreeMismatchError,
    DivergenceError,
    GridCapExceededError,
    GroupError,
    GroupMismatchError,
    IndexCapExceededError,
    IndexOutOfRangeError,
    NetworkBuildError,
    NotAPermutationError,
    NotInGroupError,
    PatternError,
    PermNetError,
    ShapeMismatchError,
    SpecParseError,
    TrainingError,
)
from .models import (
    GroupSpec,
    MLPSpec,
    NetworkSpec,
    TrainConfig,
    TrainingReport,
    VerificationReport,
)
from .nets import (
    Network,
    build_equivariant_net,
    build_invariant_sum_net,
    build_invariant_tensor_net,
    build_network,
    build_stab_invariant_net,
    build_untied_baseline,
    first_layer_g,
    ka_encoder,
    report_bounds,
    symmetrize,
)
from .perm_group import (
    CosetDecomposition,
    Permutation,
    PermutationGroup,
    compose,
    coset_decomposition,
    coset_system,
    cyclic_group,
    dihedral_group,
    generate,
    identity,
    inverse,
    orbit,
    orbit_decomposition,
    stabilizer,
    symmetric_group,
    trivial_group,
)
from .trainer import grid_sup_error, make_dataset, train
from .verification import run_suite

# Public API
__all__ = [
    "__version__",
    "utils",
    # Groups
    "Permutation",
    "PermutationGroup",
    "CosetDecomposition",
    "compose",
    "coset_decomposition",
    "coset_system",
    "cyclic_group",
    "dihedral_group",
    "generate",
    "identity",
    "inverse",
    "orbit",
    "orbit_decomposition",
    "stabilizer",
    "symmetric_group",
    "trivial_group",
    # Actions
    "GroupAction",
    "IndexScheme",
    "apply",
    "extend_with_trivial_channels",
    "induced_star_action",
    "is_free",
    "is_union_of_permutations",
    "natural_action",
    "sigma_tilde",
    "tensor_action",
    "tuple_action",
    "union_of_permutations",
    # Tied layers
    "SharingPattern",
    "TiedLinearLayer",
    "brute_force_equivariant_basis",
    "count_free_params",
    "dense_pattern",
    "equivariant_nullspace_dimension",
    "pair_orbits",
    "lambda_gamma_basis",
    "parameter_bound",
    "realize",
    "star_intertwiner_counts",
    # Networks
    "Network",
    "build_equivariant_net",
    "build_invariant_sum_net",
    "build_invariant_tensor_net",
    "build_network",
    "build_stab_invariant_net",
    "build_untied_baseline",
    "first_layer_g",
    "ka_encoder",
    "report_bounds",
    "symmetrize",
    # Training and verification
    "grid_sup_error",
    "make_dataset",
    "train",
    "run_suite",
    # Configuration
    "PermNetConfig",
    "set_config",
    "get_config",
    # Enums
    "Activation",
    "ArchitectureMode",
    "CheckStatus",
    "EncoderKind",
    "ExitCode",
    "NetKind",
    "OptimizerKind",
    "StabNetKind",
    # Models
    "GroupSpec",
    "MLPSpec",
    "NetworkSpec",
    "TrainConfig",
    "TrainingReport",
    "VerificationReport",
    # Exceptions
    "PermNetError",
    "ConfigurationError",
    "GroupError",
    "DegreeMismatchError",
    "NotAPermutationError",
    "ClosureCapExceededError",
    "NotInGroupError",
    "IndexOutOfRangeError",
    "CosetInvariantError",
    "ActionError",
    "IndexCapExceededError",
    "GroupMismatchError",
    "PatternError",
    "ShapeMismatchError",
    "NetworkBuildError",
    "BoundViolationError",
    "TrainingError",
    "DivergenceError",
    "GridCapExceededError",
    "SpecParseError",
]
