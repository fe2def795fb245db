"""Invariant and equivariant network architectures."""

from .bounds import enforce_bounds, net_parameter_bound, report_bounds
from .builders import (
    build_equivariant_net,
    build_invariant_sum_net,
    build_invariant_tensor_net,
    build_mlp,
    build_network,
    build_stab_invariant_net,
    build_untied_baseline,
    default_stab_kind,
    first_layer_g,
    init_params,
    ka_encoder,
    stab_equivariant_layer,
    symmetrize,
    symmetrize_block,
)
from .layers import (
    Block,
    Branch,
    Gather,
    Identity,
    LaneMap,
    PowerEncoder,
    ReLU,
    Sequential,
    SumLanes,
    TiedAffine,
)
from .network import Network, naive_forward

__all__ = [
    # Builders
    "build_equivariant_net",
    "build_invariant_sum_net",
    "build_invariant_tensor_net",
    "build_mlp",
    "build_network",
    "build_stab_invariant_net",
    "build_untied_baseline",
    "default_stab_kind",
    "first_layer_g",
    "init_params",
    "ka_encoder",
    "stab_equivariant_layer",
    "symmetrize",
    "symmetrize_block",
    # Blocks
    "Block",
    "Branch",
    "Gather",
    "Identity",
    "LaneMap",
    "PowerEncoder",
    "ReLU",
    "Sequential",
    "SumLanes",
    "TiedAffine",
    # Network
    "Network",
    "naive_forward",
    # Bounds
    "enforce_bounds",
    "net_parameter_bound",
    "report_bounds",
]
