"""Concrete group actions on flat index sets.

Every action is stored as one forward image table per group element
(``φ(σ)`` as a :class:`~permnet.perm_group.Permutation` of the flat index
set). Vectors transform by ``(σ·x)_i = x_{φ(σ)⁻¹(i)}``.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import get_config
from .exceptions import (
    GroupMismatchError,
    IndexCapExceededError,
    IndexOutOfRangeError,
    NotInGroupError,
    ShapeMismatchError,
)
from .models import ActionExport, GroupSpec
from .perm_group import (
    CosetSystem,
    Permutation,
    PermutationGroup,
    coset_system,
    compose,
    inverse,
    symmetric_group,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexScheme:
    """Row-major bijection between flat indices and structured indices.

    Attributes:
        shape: Extent of each structured axis.
        labels: Axis names, for display only.
    """

    shape: Tuple[int, ...]
    labels: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def flatten(self, index: Sequence[int]) -> int:
        if len(index) != len(self.shape):
            raise ShapeMismatchError(f"Index {tuple(index)} does not match shape {self.shape}")
        for value, extent in zip(index, self.shape):
            if not 0 <= value < extent:
                raise IndexOutOfRangeError(f"Index {tuple(index)} out of range for {self.shape}")
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def unflatten(self, flat: int) -> Tuple[int, ...]:
        if not 0 <= flat < self.size:
            raise IndexOutOfRangeError(f"Flat index {flat} out of range for {self.shape}")
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))


class GroupAction:
    """Homomorphism ``φ: G → S_m`` stored as explicit tables.

    Args:
        group: The acting group.
        point_count: Size ``m`` of the index set.
        tables: ``φ(g)`` for each ``g`` in ``group.elements`` order.
        name: Short description used in logs and exports.
        scheme: Optional structured view of the flat indices.
    """

    def __init__(
        self,
        group: PermutationGroup,
        point_count: int,
        tables: Sequence[Permutation],
        name: str = "action",
        scheme: Optional[IndexScheme] = None,
    ) -> None:
        if len(tables) != group.order:
            raise ShapeMismatchError(
                f"Expected {group.order} tables, got {len(tables)}", code="table_count"
            )
        for table in tables:
            if table.degree != point_count:
                raise ShapeMismatchError(
                    f"Table of degree {table.degree} in an action on {point_count} points"
                )
        self.group = group
        self.point_count = point_count
        self.tables: Tuple[Permutation, ...] = tuple(tables)
        self.name = name
        self.scheme = scheme
        self._forward = np.array([t.images for t in self.tables], dtype=np.int64).reshape(
            group.order, point_count
        )
        self._pull = np.argsort(self._forward, axis=1)
        self._forward.setflags(write=False)
        self._pull.setflags(write=False)

    def __repr__(self) -> str:
        return f"<GroupAction {self.name} of {self.group!r} on {self.point_count} points>"

    @classmethod
    def from_array(
        cls,
        group: PermutationGroup,
        forward: np.ndarray,
        name: str,
        scheme: Optional[IndexScheme] = None,
    ) -> "GroupAction":
        return cls(
            group,
            int(forward.shape[1]),
            [Permutation(tuple(row)) for row in forward.tolist()],
            name=name,
            scheme=scheme,
        )

    def table(self, element: Permutation) -> Permutation:
        return self.tables[self.group.index(element)]

    @property
    def forward_array(self) -> np.ndarray:
        """``forward_array[k, p] = φ(g_k)(p)``."""
        return self._forward

    @property
    def pull_array(self) -> np.ndarray:
        """``pull_array[k, p] = φ(g_k)⁻¹(p)``, the gather index used by :func:`apply`."""
        return self._pull

    def pull_index(self, element: Permutation) -> np.ndarray:
        return self._pull[self.group.index(element)]

    def generator_tables(self) -> List[np.ndarray]:
        return [self._forward[self.group.index(g)] for g in self.group.generators]

    def homomorphism_witness(self) -> Optional[Tuple[Permutation, Permutation]]:
        """First pair ``(g, h)`` with ``φ(gh) != φ(g)φ(h)``, or ``None``."""
        elements = self.group.elements
        for a, g in enumerate(elements):
            fg = self._forward[a]
            for b, h in enumerate(elements):
                gh = self.group.index(compose(g, h))
                if not np.array_equal(self._forward[gh], fg[self._forward[b]]):
                    return g, h
        return None

    def is_homomorphism(self) -> bool:
        return self.homomorphism_witness() is None

    def is_injective(self) -> bool:
        return len({t.images for t in self.tables}) == len(self.tables)

    def restrict(self, subgroup: PermutationGroup) -> "GroupAction":
        """The same action seen as an action of ``subgroup``."""
        rows = [self.group.index(h) for h in subgroup.elements]
        return GroupAction(
            subgroup,
            self.point_count,
            [self.tables[r] for r in rows],
            name=f"{self.name}|{subgroup.name or 'H'}",
            scheme=self.scheme,
        )

    def orbits(self) -> List[List[int]]:
        """Orbits of the index set under the action."""
        seen = np.full(self.point_count, False)
        found = []
        for p in range(self.point_count):
            if seen[p]:
                continue
            members = sorted({int(v) for v in self._forward[:, p]})
            seen[members] = True
            found.append(members)
        return found

    def export(self) -> ActionExport:
        return ActionExport(
            group=group_spec(self.group),
            points=self.point_count,
            tables=[list(t.images) for t in self.tables],
        )


def group_spec(group: PermutationGroup) -> GroupSpec:
    """Serializable description of ``group`` (its generators)."""
    return GroupSpec(
        degree=group.degree,
        generators=[list(g.images) for g in group.generators],
        name=group.name,
    )


def _check_group(group: PermutationGroup, element: Permutation) -> None:
    if element not in group:
        raise NotInGroupError(f"{element} is not an element of {group!r}")


def _check_cap(points: int) -> None:
    cap = get_config().action_index_cap
    if points > cap:
        raise IndexCapExceededError(
            f"Action on {points} points exceeds the index cap of {cap}",
            code="index_cap",
            details={"points": points, "cap": cap},
        )


def apply(action: GroupAction, element: Permutation, x: np.ndarray) -> np.ndarray:
    """Act on ``x`` (last axis of length ``m``) by a pure index shuffle.

    Raises:
        ShapeMismatchError: If the last axis of ``x`` is not ``point_count``.
        NotInGroupError: If ``element`` is not in the acting group.

    Example:
        >>> apply(natural_action(s3), Permutation.from_cycles("(0 1)", 3), np.array([1., 2., 3.]))
        array([2., 1., 3.])
    """
    x = np.asarray(x)
    if x.shape[-1:] != (action.point_count,):
        raise ShapeMismatchError(
            f"Vector of shape {x.shape} does not match action on {action.point_count} points"
        )
    return x[..., action.pull_index(element)]


def natural_action(group: PermutationGroup) -> GroupAction:
    return GroupAction(
        group,
        group.degree,
        group.elements,
        name="natural",
        scheme=IndexScheme((group.degree,), ("i",)),
    )


def tensor_action(group: PermutationGroup, order: int, channels: int = 1) -> GroupAction:
    """Action on ``(ℝⁿ)^{⊗k} ⊗ ℝᵃ`` by permuting every tensor slot.

    Index ``(i₁, …, i_k, j)`` is sent to ``(σ(i₁), …, σ(i_k), j)``, flattened
    row-major with the channel ``j`` fastest.

    Raises:
        IndexCapExceededError: If ``n^k · a`` exceeds the configured cap.
    """
    if order < 1 or channels < 1:
        raise ShapeMismatchError("Tensor order and channel count must be positive")
    n = group.degree
    shape = (n,) * order + (channels,)
    points = n**order * channels
    _check_cap(points)

    grid = np.indices(shape).reshape(order + 1, -1)
    elements = group.as_array()
    forward = np.empty((group.order, points), dtype=np.int64)
    for k in range(group.order):
        moved = tuple(elements[k][grid[a]] for a in range(order)) + (grid[order],)
        forward[k] = np.ravel_multi_index(moved, shape)
    labels = tuple(f"i{a + 1}" for a in range(order)) + ("j",)
    logger.debug("Built tensor action k=%d a=%d on %d points", order, channels, points)
    return GroupAction.from_array(
        group, forward, name=f"tensor(k={order},a={channels})", scheme=IndexScheme(shape, labels)
    )


def tuple_action(group: Union[int, PermutationGroup], dim: int) -> GroupAction:
    """Permutation of ``n`` stacked ``dim``-vectors; ``group`` may be a degree (``S_n``)."""
    if isinstance(group, int):
        group = symmetric_group(group)
    action = tensor_action(group, 1, dim)
    action.name = f"tuple(D={dim})"
    return action


def _resolve_cosets(group: PermutationGroup, cosets: Optional[CosetSystem]) -> CosetSystem:
    if cosets is None:
        return coset_system(group)
    if cosets.group != group:
        raise GroupMismatchError("Coset system belongs to a different group")
    return cosets


def sigma_tilde(
    group: Union[PermutationGroup, CosetSystem], sigma: Permutation, point: int
) -> Permutation:
    """Stabilizer element ``σ̃_p = τ_p ∘ σ ∘ τ_{σ⁻¹(p)}⁻¹``.

    Equivalently ``τ_p σ = σ̃_p τ_{σ⁻¹(p)}``. With transposition
    representatives on ``S_n`` this is ``(0 p) σ (0 σ⁻¹(p))``.

    Args:
        group: The group, or a coset system fixing the representatives.
        sigma: Element of the group.
        point: Any point; its orbit's base point is stabilized.

    Raises:
        NotInGroupError: If ``sigma`` is not in the group.
    """
    cosets = group if isinstance(group, CosetSystem) else coset_system(group)
    _check_group(cosets.group, sigma)
    tau_p = cosets.representative(point)
    tau_q = cosets.representative(inverse(sigma)(point))
    return compose(compose(tau_p, sigma), inverse(tau_q))


def star_scheme(degree: int) -> IndexScheme:
    """``ℝ^{n²}`` as ``n`` blocks of length ``n``: flat index ``block·n + entry``."""
    return IndexScheme((degree, degree), ("block", "entry"))


def induced_star_action(
    group: PermutationGroup, cosets: Optional[CosetSystem] = None
) -> GroupAction:
    """The induced "∗" action on ``ℝ^{n²}``.

    Block ``p`` of ``σ∗X`` is ``σ̃_p · (block σ⁻¹(p) of X)``, so the forward
    table sends ``(b, a)`` (block, entry) to ``(σ(b), σ̃_{σ(b)}(a))``.
    Non-transitive groups use each orbit's own representatives.
    """
    cosets = _resolve_cosets(group, cosets)
    n = group.degree
    _check_cap(n * n)
    reps = cosets.representatives_by_point()
    forward = np.empty((group.order, n * n), dtype=np.int64)
    entries = np.arange(n)
    for k, sigma in enumerate(group.elements):
        for b in range(n):
            target = sigma(b)
            tilde = compose(compose(reps[target], sigma), inverse(reps[b]))
            forward[k, b * n : (b + 1) * n] = target * n + tilde.as_array()[entries]
    return GroupAction.from_array(group, forward, name="star", scheme=star_scheme(n))


def extend_with_trivial_channels(action: GroupAction, channels: int) -> GroupAction:
    """``action ⊗ ℝᶜ``: channel ``v`` occupies flat indices ``v·m … v·m + m − 1``."""
    if channels < 1:
        raise ShapeMismatchError("Channel count must be positive")
    m = action.point_count
    _check_cap(m * channels)
    offsets = (np.arange(channels) * m)[:, None]
    forward = (action.forward_array[:, None, :] + offsets[None]).reshape(action.group.order, -1)
    return GroupAction.from_array(
        action.group,
        forward,
        name=f"{action.name}x{channels}",
        scheme=IndexScheme((channels, m), ("channel", "point")),
    )


def union_of_permutations(
    degree: int, copies: int, group: Optional[PermutationGroup] = None
) -> GroupAction:
    """``copies`` blocks of the natural action, block ``b`` on ``b·n … b·n + n − 1``."""
    group = group if group is not None else symmetric_group(degree)
    if group.degree != degree:
        raise GroupMismatchError(f"Group has degree {group.degree}, expected {degree}")
    action = extend_with_trivial_channels(natural_action(group), copies)
    action.name = f"union(n={degree},copies={copies})"
    return action


def is_free(action: GroupAction) -> bool:
    """True when no non-identity element fixes any point."""
    fixed = action.forward_array == np.arange(action.point_count)[None, :]
    return not fixed[1:].any()


def is_union_of_permutations(action: GroupAction, degree: Optional[int] = None) -> bool:
    """Whether every orbit is a copy of the natural action on ``degree`` points.

    An orbit ``O`` qualifies when some bijection ``β: {0..n-1} → O`` satisfies
    ``φ(σ)(β(i)) = β(σ(i))`` for all ``σ`` and ``i``.
    """
    group = action.group
    n = degree if degree is not None else group.degree
    if n != group.degree:
        return False
    forward = action.forward_array
    elements = group.as_array()
    for members in action.orbits():
        if len(members) != n:
            return False
        o = members[0]
        stab_o = forward[:, o] == o
        match = None
        for i0 in range(n):
            if np.array_equal(elements[:, i0] == i0, stab_o):
                match = i0
                break
        if match is None:
            return False
        beta = np.empty(n, dtype=np.int64)
        beta[elements[:, match]] = forward[:, o]
        if not np.array_equal(forward[:, beta], beta[elements]):
            return False
    return True

