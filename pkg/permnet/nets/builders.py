"""Builders for the invariant and equivariant architectures."""

import logging
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ..actions import (
    GroupAction,
    apply,
    induced_star_action,
    natural_action,
    tensor_action,
)
from ..enums import Activation, ArchitectureMode, EncoderKind, NetKind, StabNetKind
from ..equi_linear import SharingPattern, dense_pattern, is_equivariant_layer, pair_orbits
from ..exceptions import BoundViolationError, NetworkBuildError, PatternError, ShapeMismatchError
from ..models import MLPSpec, NetworkSpec
from ..perm_group import (
    CosetSystem,
    PermutationGroup,
    coset_system,
    group_from_spec,
    inverse,
    stabilizer,
    symmetric_group,
)
from .bounds import enforce_bounds
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
from .network import Network

logger = logging.getLogger(__name__)

RandomSource = Union[None, int, np.random.Generator]


def _rng(seed: RandomSource) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_params(pattern: SharingPattern, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights from the realized fan; biases start at zero.

    Each free weight is drawn once from ``U(−a, a)`` with
    ``a = sqrt(6 / (M + N))`` of the realized ``N×M`` matrix, so tied layers
    start at the same scale as dense ones.
    """
    limit = np.sqrt(6.0 / (pattern.in_size + pattern.out_size))
    params = np.zeros(pattern.free_param_count)
    params[: pattern.weight_count] = rng.uniform(-limit, limit, pattern.weight_count)
    return params


def ka_encoder(x: Union[float, np.ndarray], degree: int) -> np.ndarray:
    """Moment vector ``(1, x, x², …, xⁿ)``.

    Array input gains a trailing axis of length ``degree + 1``.

    Example:
        >>> ka_encoder(0.5, 3)
        array([1.   , 0.5  , 0.25 , 0.125])
    """
    return np.asarray(x, dtype=np.float64)[..., None] ** np.arange(degree + 1)


def build_mlp(spec: MLPSpec, seed: RandomSource = None) -> Sequential:
    """Dense ReLU MLP following ``spec``."""
    rng = _rng(seed)
    blocks: List[Block] = []
    for (m, n), activation in zip(zip(spec.widths, spec.widths[1:]), spec.resolved_activations()):
        pattern = dense_pattern(m, n)
        blocks.append(TiedAffine(pattern, init_params(pattern, rng)))
        if activation == Activation.RELU:
            blocks.append(ReLU(n))
    return Sequential(blocks)


def _check_lanes(
    degree: int,
    mode: ArchitectureMode,
    phi: Optional[MLPSpec],
    rho: MLPSpec,
) -> None:
    """Structural width/depth rules for the phi and rho lanes."""
    lanes = {"rho": (rho, degree + 2)}
    if phi is not None:
        lanes["phi"] = (phi, degree + 1)
    for name, (spec, lane_bound) in lanes.items():
        hidden = spec.widths[1:-1]
        if mode == ArchitectureMode.WIDE and len(hidden) != 1:
            raise BoundViolationError(
                f"Wide mode needs exactly one hidden layer in {name}, got {len(hidden)}",
                code="wide_depth",
            )
        if mode == ArchitectureMode.DEEP and any(w > lane_bound for w in hidden):
            raise BoundViolationError(
                f"Deep mode limits {name} hidden width to {lane_bound}, got {max(hidden)}",
                code="deep_width",
                details={"lane": name, "bound": lane_bound},
            )


def _phi_block(
    degree: int, phi: Optional[MLPSpec], encoder: EncoderKind, rng: np.random.Generator
) -> Block:
    if encoder == EncoderKind.EXACT:
        return PowerEncoder(degree)
    if phi is None:
        raise ShapeMismatchError("A trainable encoder needs a phi spec")
    if phi.in_features != 1:
        raise ShapeMismatchError(f"phi must take one coordinate, got {phi.in_features}")
    return build_mlp(phi, rng)


def build_invariant_sum_net(
    degree: int,
    phi: Optional[MLPSpec],
    rho: MLPSpec,
    mode: ArchitectureMode = ArchitectureMode.WIDE,
    encoder: EncoderKind = EncoderKind.TRAINABLE,
    seed: RandomSource = None,
) -> Network:
    """``ρ(Σᵢ φ(xᵢ))`` with one φ shared by all coordinates; ``S_n``-invariant.

    Args:
        degree: Number of input coordinates ``n``.
        phi: Per-coordinate MLP ``ℝ → ℝ^L`` (ignored for the exact encoder,
            where ``L = n + 1``).
        rho: MLP ``ℝ^L → ℝ``.
        mode: Wide (one hidden layer per lane) or deep (lane widths ``n+1``/``n+2``).
        encoder: Trainable φ or the fixed monomial encoder.
        seed: Seed or generator for the initial parameters.

    Raises:
        ShapeMismatchError: If the lane shapes do not chain.
        BoundViolationError: If the lanes break the mode's structural rules.
    """
    rng = _rng(seed)
    phi_block = _phi_block(degree, phi, encoder, rng)
    latent = phi_block.out_features
    if rho.in_features != latent or rho.out_features != 1:
        raise ShapeMismatchError(
            f"rho must map R^{latent} to R, got {rho.in_features} -> {rho.out_features}"
        )
    _check_lanes(degree, mode, phi if encoder == EncoderKind.TRAINABLE else None, rho)
    root = Sequential(
        [LaneMap(phi_block, degree), SumLanes(degree, latent), build_mlp(rho, rng)]
    )
    net = Network(root, NetKind.INVARIANT_SUM, degree, mode=mode)
    enforce_bounds(net)
    return net


def build_invariant_tensor_net(
    group: PermutationGroup,
    layers: Optional[Sequence[GroupAction]] = None,
    seed: RandomSource = None,
    orders: Optional[Sequence[tuple]] = None,
) -> Network:
    """``Σ ∘ L_H ∘ ReLU ∘ … ∘ L_1`` with every ``L_i`` tied between tensor actions.

    Args:
        group: The group ``G``.
        layers: Actions of the hidden representations, in order; the input
            is always the natural action.
        seed: Seed or generator for the initial parameters.
        orders: Alternative to ``layers``: ``(k, a)`` pairs for
            :func:`~permnet.actions.tensor_action`.

    Raises:
        NetworkBuildError: If an action belongs to another group.
    """
    rng = _rng(seed)
    if layers is None:
        layers = [tensor_action(group, k, a) for k, a in (orders or [])]
    chain = [natural_action(group)] + list(layers)
    for action in chain[1:]:
        if action.group != group:
            raise NetworkBuildError(f"{action!r} does not act by {group!r}", code="action_chain")

    blocks: List[Block] = []
    for k, (src, dst) in enumerate(zip(chain, chain[1:])):
        if k:
            blocks.append(ReLU(src.point_count))
        pattern = pair_orbits(src, dst)
        blocks.append(TiedAffine(pattern, init_params(pattern, rng)))
    blocks.append(SumLanes(chain[-1].point_count, 1))
    logger.debug("Invariant tensor net over %r with %d tied layers", group, len(chain) - 1)
    return Network(
        Sequential(blocks),
        NetKind.INVARIANT_TENSOR,
        group.degree,
        group=group,
        in_action=chain[0],
    )


def _stab_sum_block(
    degree: int,
    base: int,
    phi: Optional[MLPSpec],
    rho: MLPSpec,
    mode: ArchitectureMode,
    encoder: EncoderKind,
    rng: np.random.Generator,
) -> Block:
    if degree < 2:
        raise NetworkBuildError("A stabilizer sum net needs at least two coordinates")
    if not 0 <= base < degree:
        raise ShapeMismatchError(f"Base point {base} out of range for degree {degree}")
    phi_block = _phi_block(degree, phi, encoder, rng)
    latent = phi_block.out_features
    if rho.in_features != 1 + latent or rho.out_features != 1:
        raise ShapeMismatchError(
            f"rho must map R^{1 + latent} to R, got {rho.in_features} -> {rho.out_features}"
        )
    _check_lanes(degree, mode, phi if encoder == EncoderKind.TRAINABLE else None, rho)
    rest = degree - 1
    order = [base] + [i for i in range(degree) if i != base]
    pooled = Sequential([LaneMap(phi_block, rest), SumLanes(rest, latent)])
    return Sequential(
        [
            Gather(order, degree),
            Branch([(0, 1, Identity(1)), (1, degree, pooled)], degree),
            build_mlp(rho, rng),
        ]
    )


def symmetrize_block(inner: Block, subgroup: PermutationGroup) -> Block:
    """``x ↦ (1/|H|) Σ_h inner(h·x)``, exactly ``H``-invariant in exact arithmetic."""
    if inner.in_features != subgroup.degree:
        raise ShapeMismatchError(
            f"Inner block takes {inner.in_features} inputs, need {subgroup.degree}"
        )
    action = natural_action(subgroup)
    index = action.pull_array.reshape(-1)
    lanes = subgroup.order
    return Sequential(
        [
            Gather(index, subgroup.degree),
            LaneMap(inner, lanes),
            SumLanes(lanes, inner.out_features, scale=1.0 / lanes),
        ]
    )


def build_stab_invariant_net(
    degree: int,
    rho: Optional[MLPSpec],
    phi: Optional[MLPSpec],
    base: int = 0,
    mode: ArchitectureMode = ArchitectureMode.WIDE,
    encoder: EncoderKind = EncoderKind.TRAINABLE,
    seed: RandomSource = None,
    stab_kind: StabNetKind = StabNetKind.SUM,
    group: Optional[PermutationGroup] = None,
    mlp: Optional[MLPSpec] = None,
) -> Network:
    """Net invariant under the stabilizer of ``base``.

    The sum form is ``ρ(x_base, Σ_{i≠base} φ(xᵢ))`` and so ``ρ`` takes
    ``1 + L`` inputs. The symmetrized form averages ``mlp`` over
    ``Stab_G(base)`` and works for any ``group``.
    """
    rng = _rng(seed)
    parent = group if group is not None else symmetric_group(degree)
    stab = stabilizer(parent, base)
    if stab_kind == StabNetKind.SUM:
        if rho is None:
            raise ShapeMismatchError("The sum form needs a rho spec")
        root = _stab_sum_block(degree, base, phi, rho, mode, encoder, rng)
    else:
        if mlp is None or mlp.in_features != degree or mlp.out_features != 1:
            raise ShapeMismatchError(f"The symmetrized form needs an MLP R^{degree} -> R")
        root = symmetrize_block(build_mlp(mlp, rng), stab)
    net = Network(
        root,
        NetKind.STAB_INVARIANT,
        degree,
        mode=mode,
        group=stab,
        in_action=natural_action(stab),
    )
    enforce_bounds(net)
    return net


def default_stab_kind(group: PermutationGroup) -> StabNetKind:
    """Sum form for the full symmetric group, symmetrized form otherwise."""
    full = 1
    for k in range(2, group.degree + 1):
        full *= k
    return StabNetKind.SUM if group.order == full else StabNetKind.SYMMETRIZED


def build_equivariant_net(
    group: PermutationGroup,
    cosets: Optional[CosetSystem] = None,
    stab_nets: Optional[Sequence[Block]] = None,
    phi: Optional[MLPSpec] = None,
    rho: Optional[MLPSpec] = None,
    mlp: Optional[MLPSpec] = None,
    stab_kind: Optional[StabNetKind] = None,
    mode: ArchitectureMode = ArchitectureMode.WIDE,
    encoder: EncoderKind = EncoderKind.TRAINABLE,
    seed: RandomSource = None,
) -> Network:
    """Equivariant net whose coordinate ``p`` is ``f_j(τ_p · x)``.

    One stabilizer-invariant scalar net ``f_j`` per orbit is shared by all
    coordinates of that orbit; ``τ_p`` is the coset representative with
    ``τ_p⁻¹(base_j) = p``.

    Args:
        group: The group ``G``.
        cosets: Coset representatives; canonical ones when omitted.
        stab_nets: Ready-made ``f_j`` blocks, one per orbit. When omitted
            they are built from ``phi``/``rho`` (sum form) or ``mlp``
            (symmetrized form).
        stab_kind: Form of the generated ``f_j``; chosen from the group when omitted.

    Raises:
        NetworkBuildError: If the number of supplied nets does not match the orbits.
    """
    rng = _rng(seed)
    n = group.degree
    cosets = cosets if cosets is not None else coset_system(group)
    if cosets.group != group:
        raise NetworkBuildError("Coset system belongs to a different group", code="coset_group")
    decompositions = cosets.decompositions
    if stab_nets is not None and len(stab_nets) != len(decompositions):
        raise NetworkBuildError(
            f"Expected {len(decompositions)} stabilizer nets, got {len(stab_nets)}",
            code="orbit_mismatch",
        )
    kind = stab_kind if stab_kind is not None else default_stab_kind(group)

    parts = []
    layout: List[int] = []
    for j, decomposition in enumerate(decompositions):
        if stab_nets is not None:
            f_j = stab_nets[j]
            if f_j.in_features != n or f_j.out_features != 1:
                raise ShapeMismatchError(f"Stabilizer net {j} must map R^{n} to R")
        elif kind == StabNetKind.SUM:
            if rho is None:
                raise ShapeMismatchError("The sum form needs a rho spec")
            f_j = _stab_sum_block(n, decomposition.base, phi, rho, mode, encoder, rng)
        else:
            if mlp is None or mlp.in_features != n or mlp.out_features != 1:
                raise ShapeMismatchError(f"The symmetrized form needs an MLP R^{n} -> R")
            f_j = symmetrize_block(build_mlp(mlp, rng), decomposition.subgroup)
        pulls = np.concatenate(
            [inverse(tau).as_array() for tau in decomposition.representatives]
        )
        lanes = len(decomposition.orbit_points)
        parts.append((0, n, Sequential([Gather(pulls, n), LaneMap(f_j, lanes)])))
        layout.extend(decomposition.orbit_points)

    position = np.empty(n, dtype=np.int64)
    position[np.asarray(layout)] = np.arange(n)
    root = Sequential([Branch(parts, n), Gather(position, n)])
    action = natural_action(group)
    logger.debug("Equivariant net over %r with %d orbit nets (%s)", group, len(parts), kind.value)
    net = Network(
        root,
        NetKind.EQUIVARIANT,
        n,
        mode=mode,
        group=group,
        in_action=action,
        out_action=action,
        cosets=cosets,
    )
    enforce_bounds(net)
    return net


def stab_equivariant_layer(
    group: PermutationGroup,
    cosets: Optional[CosetSystem] = None,
    seed: RandomSource = None,
) -> TiedAffine:
    """Random affine map ``ℝⁿ → ℝⁿ`` tied for the stabilizer of the base point."""
    rng = _rng(seed)
    cosets = cosets if cosets is not None else coset_system(group)
    stab = cosets.decompositions[0].subgroup
    restricted = natural_action(group).restrict(stab)
    pattern = pair_orbits(restricted, restricted)
    params = rng.standard_normal(pattern.free_param_count)
    return TiedAffine(pattern, params)


def first_layer_g(
    layer: TiedAffine,
    group: PermutationGroup,
    cosets: Optional[CosetSystem] = None,
) -> Network:
    """Stack ``ReLU(l(τ_p · x))`` over all points ``p``: a map ``ℝⁿ → ℝ^{n²}``.

    Equivariant from the natural action to the induced "∗" action when ``l``
    is equivariant for the stabilizer of the base point.

    Raises:
        NetworkBuildError: If the natural action of ``group`` is not transitive.
        PatternError: If ``l`` is not stabilizer-equivariant.
    """
    n = group.degree
    cosets = cosets if cosets is not None else coset_system(group)
    if len(cosets.decompositions) != 1:
        raise NetworkBuildError("first_layer_g needs a transitive group", code="not_transitive")
    if layer.in_features != n or layer.out_features != n:
        raise ShapeMismatchError(f"l must map R^{n} to R^{n}")
    decomposition = cosets.decompositions[0]
    restricted = natural_action(group).restrict(decomposition.subgroup)
    weight, bias = layer.realize()
    if not is_equivariant_layer(weight, bias, restricted, restricted):
        raise PatternError("l is not equivariant for the stabilizer of the base point")

    reps = cosets.representatives_by_point()
    pulls = np.concatenate([inverse(tau).as_array() for tau in reps])
    root = Sequential([Gather(pulls, n), LaneMap(Sequential([layer, ReLU(n)]), n)])
    return Network(
        root,
        NetKind.EQUIVARIANT,
        n,
        group=group,
        in_action=natural_action(group),
        out_action=induced_star_action(group, cosets),
        cosets=cosets,
        name="first_layer_g",
    )


def symmetrize(
    fn: Callable[[np.ndarray], np.ndarray],
    group: PermutationGroup,
    action: Optional[GroupAction] = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Reynolds average ``x ↦ (1/|H|) Σ_h fn(h·x)`` of a batch function."""
    action = action if action is not None else natural_action(group)

    def averaged(x: np.ndarray) -> np.ndarray:
        total = None
        for h in group.elements:
            value = np.asarray(fn(apply(action, h, x)), dtype=np.float64)
            total = value if total is None else total + value
        return total / group.order

    return averaged


def build_network(spec: NetworkSpec, seed: RandomSource = None) -> Network:
    """Build any architecture from a :class:`~permnet.models.NetworkSpec`."""
    rng = _rng(seed)
    degree = spec.degree
    assert degree is not None
    group = group_from_spec(spec.group) if spec.group is not None else None

    if spec.kind == NetKind.INVARIANT_SUM:
        if spec.rho is None:
            raise ShapeMismatchError("invariant_sum needs a rho spec")
        net = build_invariant_sum_net(degree, spec.phi, spec.rho, spec.mode, spec.encoder, rng)
    elif spec.kind == NetKind.INVARIANT_TENSOR:
        assert group is not None
        orders = [(layer.order, layer.channels) for layer in spec.tensor_layers]
        net = build_invariant_tensor_net(group, orders=orders, seed=rng)
    elif spec.kind == NetKind.STAB_INVARIANT:
        net = build_stab_invariant_net(
            degree,
            spec.rho,
            spec.phi,
            base=spec.base,
            mode=spec.mode,
            encoder=spec.encoder,
            seed=rng,
            stab_kind=spec.stab_kind or StabNetKind.SUM,
            group=group,
            mlp=spec.mlp,
        )
    else:
        assert group is not None
        cosets = coset_system(group, transpositions=spec.transposition_cosets)
        net = build_equivariant_net(
            group,
            cosets=cosets,
            phi=spec.phi,
            rho=spec.rho,
            mlp=spec.mlp,
            stab_kind=spec.stab_kind,
            mode=spec.mode,
            encoder=spec.encoder,
            seed=rng,
        )
    net.spec = spec
    return net


def build_untied_baseline(net: Network, seed: RandomSource = None) -> Network:
    """Dense ReLU MLP with the same input, hidden and output widths as ``net``."""
    widths = [net.in_features] + net.hidden_widths() + [net.out_features]
    root = build_mlp(MLPSpec(widths=widths), seed)
    return Network(root, net.kind, net.degree, mode=net.mode, tied=False, name="untied")
