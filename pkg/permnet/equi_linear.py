"""Equivariant affine maps by orbit tying.

A layer between two actions of the same group is parametrized by one free
value per orbit of the product action on ``(out, in)`` index pairs, plus one
bias value per orbit of the output action. Tied entries are copies, so every
realized map is exactly equivariant.
"""

import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .actions import (
    GroupAction,
    extend_with_trivial_channels,
    induced_star_action,
    natural_action,
)
from .config import get_config
from .enums import ZERO_ORBIT
from .exceptions import GroupMismatchError, IndexCapExceededError, PatternError, ShapeMismatchError
from .models import ParameterBound, SharingPatternExport
from .perm_group import PermutationGroup, symmetric_group
from .utils import content_hash

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SharingPattern:
    """Orbit id of every weight and bias entry of an ``N×M`` affine map.

    Weight ids run ``0 … weight_count − 1`` and bias ids continue from
    ``weight_count``, so both index one flat parameter vector. Entries equal to
    ``ZERO_ORBIT`` are held at zero.
    """

    in_size: int
    out_size: int
    weight_orbit_id: np.ndarray
    bias_orbit_id: np.ndarray
    weight_count: int
    bias_count: int

    def __post_init__(self) -> None:
        if self.weight_orbit_id.shape != (self.out_size, self.in_size):
            raise PatternError(
                f"weight_orbit_id has shape {self.weight_orbit_id.shape}, "
                f"expected {(self.out_size, self.in_size)}"
            )
        if self.bias_orbit_id.shape != (self.out_size,):
            raise PatternError(f"bias_orbit_id has shape {self.bias_orbit_id.shape}")
        w = self.weight_orbit_id[self.weight_orbit_id != ZERO_ORBIT]
        b = self.bias_orbit_id[self.bias_orbit_id != ZERO_ORBIT]
        if w.size and (w.min() < 0 or w.max() >= self.weight_count):
            raise PatternError("Weight orbit ids out of range")
        if b.size and (b.min() < self.weight_count or b.max() >= self.free_param_count):
            raise PatternError("Bias orbit ids out of range")
        self.weight_orbit_id.setflags(write=False)
        self.bias_orbit_id.setflags(write=False)

    @property
    def free_param_count(self) -> int:
        return self.weight_count + self.bias_count

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.out_size, self.in_size)

    def reduce_gradient(self, grad_weight: np.ndarray, grad_bias: np.ndarray) -> np.ndarray:
        """Sum entry gradients into orbit gradients.

        The gradient of a shared parameter is the sum over all of its placements.
        """
        ids = np.concatenate([self.weight_orbit_id.ravel(), self.bias_orbit_id])
        values = np.concatenate([grad_weight.ravel(), grad_bias])
        keep = ids != ZERO_ORBIT
        return np.bincount(ids[keep], weights=values[keep], minlength=self.free_param_count)

    def to_export(self) -> SharingPatternExport:
        return SharingPatternExport(
            M=self.in_size,
            N=self.out_size,
            weight_orbit_id=self.weight_orbit_id.tolist(),
            bias_orbit_id=self.bias_orbit_id.tolist(),
            free_params=self.free_param_count,
        )

    def content_hash(self) -> str:
        return content_hash(self.to_export().model_dump(by_alias=True))

    @classmethod
    def from_export(cls, data: SharingPatternExport) -> "SharingPattern":
        weights = np.asarray(data.weight_orbit_id, dtype=np.int64)
        weights = weights.reshape(data.out_size, data.in_size)
        bias = np.asarray(data.bias_orbit_id, dtype=np.int64)
        used = weights[weights != ZERO_ORBIT]
        weight_count = int(used.max()) + 1 if used.size else 0
        return cls(
            data.in_size,
            data.out_size,
            weights,
            bias,
            weight_count,
            data.free_params - weight_count,
        )


def _first_appearance_labels(labels: np.ndarray) -> Tuple[np.ndarray, int]:
    """Renumber component labels in order of first appearance."""
    _, first, inverse_ = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse_].astype(np.int64), len(first)


def _components(size: int, edges: List[Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, int]:
    if not edges or size == 0:
        return np.arange(size, dtype=np.int64), size
    src = np.concatenate([e[0] for e in edges])
    dst = np.concatenate([e[1] for e in edges])
    graph = coo_matrix((np.ones(src.size), (src, dst)), shape=(size, size))
    _, labels = connected_components(graph, directed=True, connection="weak")
    return _first_appearance_labels(labels)


def dense_pattern(in_size: int, out_size: int, bias: bool = True) -> SharingPattern:
    """Pattern with every entry free (the trivial-group case)."""
    weights = np.arange(out_size * in_size, dtype=np.int64).reshape(out_size, in_size)
    count = out_size * in_size
    biases = (
        np.arange(out_size, dtype=np.int64) + count
        if bias
        else np.full(out_size, ZERO_ORBIT, dtype=np.int64)
    )
    return SharingPattern(in_size, out_size, weights, biases, count, out_size if bias else 0)


def pair_orbits(
    in_action: GroupAction, out_action: GroupAction, bias: bool = True
) -> SharingPattern:
    """Tie weights along orbits of ``(i, j) ↦ (φ_out(σ)(i), φ_in(σ)(j))``.

    Orbits are the connected components of the graph whose edges are the
    generator moves. Ids are numbered by first appearance in row-major order,
    so for ``S_n`` on both sides the diagonal gets id 0 and the off-diagonal id 1.

    Args:
        in_action: Action on the ``M`` input coordinates.
        out_action: Action on the ``N`` output coordinates.
        bias: Whether to include tied bias orbits.

    Raises:
        GroupMismatchError: If the actions are of different groups.
    """
    if in_action.group != out_action.group:
        raise GroupMismatchError(
            f"Cannot tie {in_action!r} to {out_action!r}: different groups", code="group_mismatch"
        )
    m, n = in_action.point_count, out_action.point_count
    group = in_action.group
    flat = np.arange(n * m, dtype=np.int64)
    rows, cols = np.divmod(flat, m)

    weight_edges = []
    bias_edges = []
    for g in group.generators:
        k = group.index(g)
        out_t = out_action.forward_array[k]
        in_t = in_action.forward_array[k]
        weight_edges.append((flat, out_t[rows] * m + in_t[cols]))
        bias_edges.append((np.arange(n), out_t))

    weights, weight_count = _components(n * m, weight_edges)
    if bias:
        biases, bias_count = _components(n, bias_edges)
        biases = biases + weight_count
    else:
        biases, bias_count = np.full(n, ZERO_ORBIT, dtype=np.int64), 0
    logger.debug(
        "pair_orbits %s -> %s: %d weight orbits, %d bias orbits",
        in_action.name,
        out_action.name,
        weight_count,
        bias_count,
    )
    return SharingPattern(m, n, weights.reshape(n, m), biases, weight_count, bias_count)


class TiedLinearLayer:
    """A sharing pattern together with its free-parameter vector.

    Example:
        >>> layer = TiedLinearLayer(pair_orbits(nat, nat), np.array([2.0, 0.5, 0.1]))
        >>> W, b = layer.realize()
    """

    def __init__(self, pattern: SharingPattern, params: Optional[np.ndarray] = None) -> None:
        self.pattern = pattern
        if params is None:
            params = np.zeros(pattern.free_param_count)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (pattern.free_param_count,):
            raise ShapeMismatchError(
                f"Expected {pattern.free_param_count} parameters, got shape {params.shape}",
                code="param_count",
            )
        self.params = params.copy()

    @property
    def in_size(self) -> int:
        return self.pattern.in_size

    @property
    def out_size(self) -> int:
        return self.pattern.out_size

    def realize(self) -> Tuple[np.ndarray, np.ndarray]:
        """Build ``W`` and ``b`` by copying each orbit's value into its entries."""
        return realize(self.pattern, self.params)

    def read_params(self, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
        """Parameters that :meth:`realize` would turn into ``(weight, bias)``.

        Reads the first placement of each orbit.
        """
        p = self.pattern
        values = np.zeros(p.free_param_count)
        ids = np.concatenate([p.weight_orbit_id.ravel(), p.bias_orbit_id])
        entries = np.concatenate([np.asarray(weight).ravel(), np.asarray(bias)])
        keep = ids != ZERO_ORBIT
        unique_ids, first = np.unique(ids[keep], return_index=True)
        values[unique_ids] = entries[keep][first]
        return values


def realize(pattern: SharingPattern, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``W[i][j] = params[weight_orbit_id[i][j]]`` and likewise for ``b``.

    Raises:
        ShapeMismatchError: If ``params`` does not have ``free_param_count`` entries.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (pattern.free_param_count,):
        raise ShapeMismatchError(
            f"Expected {pattern.free_param_count} parameters, got shape {params.shape}"
        )
    padded = np.append(params, 0.0)  # ZERO_ORBIT (-1) reads the trailing zero
    return padded[pattern.weight_orbit_id], padded[pattern.bias_orbit_id]


def count_free_params(pattern: SharingPattern) -> int:
    """Number of free weight parameters (biases are counted separately)."""
    return pattern.weight_count


def brute_force_equivariant_basis(in_action: GroupAction, out_action: GroupAction) -> np.ndarray:
    """Orthonormal basis of ``{W : P_out(σ) W = W P_in(σ) ∀σ}`` by group averaging.

    Every elementary matrix ``E_ij`` is averaged over the group; the distinct
    non-zero averages span the equivariant space.

    Returns:
        Array of shape ``(dim, N, M)``.

    Raises:
        IndexCapExceededError: If ``N·M`` exceeds the configured basis cap.
    """
    if in_action.group != out_action.group:
        raise GroupMismatchError("Actions belong to different groups")
    m, n = in_action.point_count, out_action.point_count
    cap = get_config().basis_size_cap
    if n * m > cap:
        raise IndexCapExceededError(f"Basis size {n * m} exceeds cap {cap}", code="basis_cap")

    order = in_action.group.order
    out_f = out_action.forward_array
    in_f = in_action.forward_array
    seen: Dict[bytes, np.ndarray] = {}
    for i in range(n):
        for j in range(m):
            averaged = np.zeros((n, m))
            np.add.at(averaged, (out_f[:, i], in_f[:, j]), 1.0 / order)
            key = np.round(averaged * order).astype(np.int64).tobytes()
            if key not in seen:
                seen[key] = averaged / np.linalg.norm(averaged)
    basis = np.stack(list(seen.values())) if seen else np.zeros((0, n, m))
    rank = np.linalg.matrix_rank(basis.reshape(len(basis), -1)) if len(basis) else 0
    if rank != len(basis):
        raise PatternError(f"Averaged basis is degenerate: rank {rank} of {len(basis)}")
    return basis


def equivariant_nullspace_dimension(in_action: GroupAction, out_action: GroupAction) -> int:
    """Dimension of the equivariant space by solving the linear constraints.

    Each generator contributes ``W[i, k] − W[φ_out(σ)(i), φ_in(σ)(k)] = 0``.
    """
    m, n = in_action.point_count, out_action.point_count
    cap = get_config().basis_size_cap
    if n * m > cap:
        raise IndexCapExceededError(f"Constraint size {n * m} exceeds cap {cap}", code="basis_cap")
    group = in_action.group
    flat = np.arange(n * m)
    rows, cols = np.divmod(flat, m)
    blocks = []
    for g in group.generators:
        k = group.index(g)
        moved = out_action.forward_array[k][rows] * m + in_action.forward_array[k][cols]
        constraint = np.zeros((n * m, n * m))
        constraint[flat, flat] += 1.0
        constraint[flat, moved] -= 1.0
        blocks.append(constraint)
    if not blocks:
        return n * m
    return int(null_space(np.vstack(blocks)).shape[1])


def union_pattern_count(degree: int, in_copies: int, out_copies: int) -> int:
    """``2MN/n²`` for union-of-permutation actions with ``M = in_copies·n``."""
    m, n = in_copies * degree, out_copies * degree
    return 2 * m * n // (degree * degree)


def parameter_bound(
    widths: Sequence[int],
    degree: int,
    equivariant_layers: int,
    exact_tied_count: Optional[int] = None,
    equivariant: bool = False,
) -> ParameterBound:
    """``M^(2D)·(2/n²)^d`` for a depth-``D`` net of maximal width ``M``.

    With ``equivariant=True`` every layer is tied and the exponent is ``D``.
    The value is an exact :class:`~fractions.Fraction`; ``exceeds_float`` flags
    results that no longer fit a double.

    Example:
        >>> parameter_bound([4, 4], degree=4, equivariant_layers=1).bound
        Fraction(2, 1)
    """
    if len(widths) < 2:
        raise ShapeMismatchError("Need at least an input and an output width")
    depth = len(widths) - 1
    max_width = max(widths)
    d = depth if equivariant else equivariant_layers
    if not 0 <= d <= depth:
        raise ShapeMismatchError(f"Equivariant layer count {d} not in 0..{depth}")
    usual = max_width ** (2 * depth)
    bound = Fraction(usual) * Fraction(2, degree * degree) ** d
    exceeds = bound > Fraction(sys.float_info.max)
    if exceeds:
        logger.warning("Parameter bound exceeds double range (M=%d, D=%d)", max_width, depth)
    return ParameterBound(
        widths=list(widths),
        degree=degree,
        depth=depth,
        max_width=max_width,
        equivariant_layers=d,
        usual_count=usual,
        bound=bound,
        exact_tied_count=exact_tied_count,
        within_bound=None if exact_tied_count is None else Fraction(exact_tied_count) <= bound,
        exceeds_float=exceeds,
    )


def lambda_gamma_basis(weight: np.ndarray) -> Tuple[float, float, float]:
    """Express a square matrix as ``λ'I + γ'11ᵀ`` by least squares.

    Returns:
        ``(λ', γ', max_abs_reconstruction_error)``. For a tied ``S_n`` block
        with diagonal ``λ`` and off-diagonal ``γ`` this is ``(λ − γ, γ, 0)``.
    """
    weight = np.asarray(weight, dtype=np.float64)
    n = weight.shape[0]
    if weight.shape != (n, n):
        raise ShapeMismatchError(f"Expected a square matrix, got {weight.shape}")
    design = np.stack([np.eye(n).ravel(), np.ones(n * n)], axis=1)
    (lam, gam), *_ = np.linalg.lstsq(design, weight.ravel(), rcond=None)
    error = float(np.max(np.abs(lam * np.eye(n) + gam - weight))) if n else 0.0
    return float(lam), float(gam), error


@dataclass(frozen=True)
class StarIntertwinerCounts:
    """Orbit-derived weight counts around the "∗" action next to the stated ones."""

    degree: int
    natural_to_star: int
    star_to_star: int
    claimed_natural_to_star: int
    claimed_star_to_star: int
    in_channels: int
    out_channels: int

    @property
    def natural_to_star_agrees(self) -> bool:
        return self.natural_to_star == self.claimed_natural_to_star

    @property
    def star_to_star_agrees(self) -> bool:
        return self.star_to_star == self.claimed_star_to_star


def star_intertwiner_counts(
    degree: int,
    in_channels: int = 1,
    out_channels: int = 1,
    group: Optional[PermutationGroup] = None,
) -> StarIntertwinerCounts:
    """Count tied weights for ``natural → ∗`` and ``∗⊗V → ∗⊗W``.

    The claimed values are 5 and ``15·dim V·dim W``; both are reported next
    to the counts, never assumed.
    """
    group = group if group is not None else symmetric_group(degree)
    star = induced_star_action(group)
    natural_count = pair_orbits(natural_action(group), star).weight_count
    star_in = extend_with_trivial_channels(star, in_channels)
    star_out = extend_with_trivial_channels(star, out_channels)
    star_count = pair_orbits(star_in, star_out).weight_count
    counts = StarIntertwinerCounts(
        degree=degree,
        natural_to_star=natural_count,
        star_to_star=star_count,
        claimed_natural_to_star=5,
        claimed_star_to_star=15 * in_channels * out_channels,
        in_channels=in_channels,
        out_channels=out_channels,
    )
    if not (counts.natural_to_star_agrees and counts.star_to_star_agrees):
        logger.info(
            "Star intertwiner counts for n=%d: natural->star %d (claimed 5), "
            "star->star %d (claimed %d)",
            degree,
            natural_count,
            star_count,
            counts.claimed_star_to_star,
        )
    return counts


def is_equivariant_layer(
    weight: np.ndarray,
    bias: np.ndarray,
    in_action: GroupAction,
    out_action: GroupAction,
) -> bool:
    """Exact check of ``W P_in(σ) = P_out(σ) W`` and ``P_out(σ) b = b`` on generators."""
    group = in_action.group
    for g in group.generators:
        k = group.index(g)
        out_t = out_action.forward_array[k]
        in_t = in_action.forward_array[k]
        if not np.array_equal(weight[np.ix_(out_t, in_t)], weight):
            return False
        if not np.array_equal(bias[out_t], bias):
            return False
    return True
