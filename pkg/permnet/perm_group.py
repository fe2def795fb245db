"""Finite permutation groups: closure, orbits, stabilizers, cosets.

Conventions used throughout the package:

- Points are 0-based.
- A :class:`Permutation` stores its image table, ``p(i) == p.images[i]``.
- ``compose(p, q)`` is ``p ∘ q``: apply ``q`` first, then ``p``.
- A group element acts on a vector by ``(σ·x)_i = x_{σ⁻¹(i)}``; with the
  composition rule above this is a left action, ``(gh)·x = g·(h·x)``.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import get_config
from .exceptions import (
    ClosureCapExceededError,
    CosetInvariantError,
    DegreeMismatchError,
    IndexOutOfRangeError,
    NotAPermutationError,
    NotInGroupError,
)
from .utils import format_cycles, parse_cycles

if TYPE_CHECKING:
    from .actions import GroupAction
    from .models import GroupSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Permutation:
    """Bijection of ``{0, ..., n-1}`` stored as an image table.

    Ordering compares image tables lexicographically.
    """

    images: Tuple[int, ...]

    def __post_init__(self) -> None:
        images = tuple(int(v) for v in self.images)
        if sorted(images) != list(range(len(images))):
            raise NotAPermutationError(
                f"Image table {list(images)} is not a bijection of 0..{len(images) - 1}"
            )
        object.__setattr__(self, "images", images)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, point: int) -> int:
        return self.images[point]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __str__(self) -> str:
        return format_cycles(self.images)

    def __repr__(self) -> str:
        return f"Permutation({list(self.images)})"

    @property
    def is_identity(self) -> bool:
        return all(i == v for i, v in enumerate(self.images))

    def inverse(self) -> "Permutation":
        return inverse(self)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.images, dtype=np.int64)

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls(tuple(range(degree)))

    @classmethod
    def transposition(cls, degree: int, i: int, j: int) -> "Permutation":
        """Swap ``i`` and ``j``; ``i == j`` gives the identity."""
        for point in (i, j):
            if not 0 <= point < degree:
                raise IndexOutOfRangeError(f"Point {point} out of range for degree {degree}")
        images = list(range(degree))
        images[i], images[j] = j, i
        return cls(tuple(images))

    @classmethod
    def from_cycles(cls, text: str, degree: int) -> "Permutation":
        """Build from cycle notation, e.g. ``Permutation.from_cycles("(0 1)(2 3)", 4)``."""
        return cls(tuple(parse_cycles(text, degree)))


def identity(degree: int) -> Permutation:
    """Identity permutation of the given degree."""
    return Permutation.identity(degree)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return ``p ∘ q``, the bijection ``i ↦ p(q(i))``.

    Raises:
        DegreeMismatchError: If the degrees differ.
    """
    if p.degree != q.degree:
        raise DegreeMismatchError(
            f"Cannot compose permutations of degree {p.degree} and {q.degree}"
        )
    return Permutation(tuple(p.images[v] for v in q.images))


def inverse(p: Permutation) -> Permutation:
    """Inverse permutation."""
    images = [0] * p.degree
    for i, v in enumerate(p.images):
        images[v] = i
    return Permutation(tuple(images))


class PermutationGroup:
    """A finite permutation group with its full element list.

    Elements are sorted by image table, so the identity is always element 0
    and the list does not depend on the generators chosen.

    Example:
        >>> s3 = generate(3, [Permutation.transposition(3, 0, 1),
        ...                   Permutation.transposition(3, 1, 2)])
        >>> s3.order
        6
    """

    def __init__(
        self,
        degree: int,
        generators: Sequence[Permutation],
        elements: Sequence[Permutation],
        name: Optional[str] = None,
    ) -> None:
        self.degree = degree
        self.generators: Tuple[Permutation, ...] = tuple(generators)
        self.elements: Tuple[Permutation, ...] = tuple(sorted(elements))
        self.name = name
        self._index: Dict[Tuple[int, ...], int] = {
            g.images: k for k, g in enumerate(self.elements)
        }
        self._array: Optional[np.ndarray] = None

    identity_index = 0

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def identity(self) -> Permutation:
        return self.elements[0]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.elements)

    def __contains__(self, item: object) -> bool:
        return isinstance(item, Permutation) and item.images in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PermutationGroup):
            return NotImplemented
        return self.degree == other.degree and self.elements == other.elements

    def __hash__(self) -> int:
        return hash((self.degree, self.elements))

    def __repr__(self) -> str:
        label = self.name or "PermutationGroup"
        return f"<{label} degree={self.degree} order={self.order}>"

    def index(self, element: Permutation) -> int:
        """Position of ``element`` in :attr:`elements`.

        Raises:
            NotInGroupError: If the element is not in the group.
        """
        try:
            return self._index[element.images]
        except KeyError:
            raise NotInGroupError(f"{element} is not an element of {self!r}") from None

    def as_array(self) -> np.ndarray:
        """Element image tables as an ``(order, degree)`` integer array."""
        if self._array is None:
            self._array = np.array([g.images for g in self.elements], dtype=np.int64)
            self._array.setflags(write=False)
        return self._array

    def is_transitive(self) -> bool:
        return len(orbit(self, 0)) == self.degree if self.degree else True

    def is_subgroup_of(self, other: "PermutationGroup") -> bool:
        return self.degree == other.degree and all(g in other for g in self.elements)


def _closure(
    degree: int, generators: Sequence[Permutation], cap: int
) -> List[Permutation]:
    ident = Permutation.identity(degree)
    seen = {ident.images}
    found = [ident]
    queue = deque([ident])
    while queue:
        current = queue.popleft()
        for gen in generators:
            product = compose(gen, current)
            if product.images in seen:
                continue
            seen.add(product.images)
            found.append(product)
            if len(found) > cap:
                raise ClosureCapExceededError(
                    f"Group closure exceeded cap of {cap} elements",
                    code="closure_cap",
                    details={"degree": degree, "cap": cap},
                )
            queue.append(product)
    return found


def generate(
    degree: int,
    generators: Iterable[Permutation],
    cap: Optional[int] = None,
    name: Optional[str] = None,
) -> PermutationGroup:
    """Smallest group containing ``generators`` (breadth-first products).

    Args:
        degree: Number of points.
        generators: Generating permutations, all of degree ``degree``.
        cap: Maximum group order; defaults to the configured ``closure_cap``.
        name: Optional display name.

    Raises:
        DegreeMismatchError: If a generator has the wrong degree.
        ClosureCapExceededError: If the closure grows past ``cap``.
    """
    gens = tuple(generators)
    for gen in gens:
        if gen.degree != degree:
            raise DegreeMismatchError(
                f"Generator {gen!r} has degree {gen.degree}, expected {degree}"
            )
    limit = cap if cap is not None else get_config().closure_cap
    elements = _closure(degree, gens, limit)
    logger.debug("Generated group of degree %d with order %d", degree, len(elements))
    return PermutationGroup(degree, gens, elements, name=name)


def _subgroup(group: PermutationGroup, members: Sequence[Permutation]) -> PermutationGroup:
    """Wrap a subset known to be a subgroup, picking a small generating set."""
    chosen: List[Permutation] = []
    span = {group.identity.images}
    for g in sorted(members):
        if g.images in span:
            continue
        chosen.append(g)
        span = {h.images for h in _closure(group.degree, chosen, len(members))}
    return PermutationGroup(group.degree, chosen, members)


# -- Standard groups ----------------------------------------------------------


def trivial_group(degree: int) -> PermutationGroup:
    return generate(degree, [], name=f"1_{degree}")


def symmetric_group(degree: int, cap: Optional[int] = None) -> PermutationGroup:
    gens = []
    if degree >= 2:
        gens.append(Permutation.transposition(degree, 0, 1))
    if degree >= 3:
        gens.append(Permutation(tuple(list(range(1, degree)) + [0])))
    return generate(degree, gens, cap=cap, name=f"S{degree}")


def cyclic_group(degree: int) -> PermutationGroup:
    """Rotations ``i ↦ i+1 mod n``."""
    gens = [Permutation(tuple((i + 1) % degree for i in range(degree)))] if degree > 1 else []
    return generate(degree, gens, name=f"C{degree}")


def dihedral_group(degree: int) -> PermutationGroup:
    """Symmetries of the regular ``degree``-gon (order ``2·degree``)."""
    rotation = Permutation(tuple((i + 1) % degree for i in range(degree)))
    reflection = Permutation(tuple((-i) % degree for i in range(degree)))
    return generate(degree, [rotation, reflection], name=f"D{degree}")


def group_from_spec(spec: "GroupSpec", cap: Optional[int] = None) -> PermutationGroup:
    """Build a group from a parsed :class:`~permnet.models.GroupSpec`."""
    gens = [Permutation(tuple(images)) for images in spec.generators]
    return generate(spec.degree, gens, cap=cap, name=spec.name)


# -- Orbits and stabilizers ---------------------------------------------------


def _check_point(group: PermutationGroup, point: int) -> None:
    if not 0 <= point < group.degree:
        raise IndexOutOfRangeError(
            f"Point {point} out of range for degree {group.degree}", code="point_range"
        )


def orbit(group: PermutationGroup, point: int) -> List[int]:
    """Sorted orbit ``{σ⁻¹(i) : σ ∈ G}`` of ``point``.

    Raises:
        IndexOutOfRangeError: If ``point`` is not in ``0..degree-1``.
    """
    _check_point(group, point)
    return sorted({int(v) for v in group.as_array()[:, point]})


@dataclass(frozen=True)
class OrbitDecomposition:
    """Partition of the points into orbits.

    Attributes:
        orbits: Orbits sorted by their minimal point, each sorted ascending.
        base_points: Minimal point of each orbit.
        reordering: Permutation sending each point to its position when the
            orbits are laid out one after another (contiguous orbits).
    """

    orbits: Tuple[Tuple[int, ...], ...]
    base_points: Tuple[int, ...]
    reordering: Permutation

    def orbit_index(self, point: int) -> int:
        for j, members in enumerate(self.orbits):
            if point in members:
                return j
        raise IndexOutOfRangeError(f"Point {point} is not covered by the decomposition")

    @property
    def is_contiguous(self) -> bool:
        return self.reordering.is_identity

    def relabel(self, group: PermutationGroup) -> PermutationGroup:
        """Conjugate ``group`` by :attr:`reordering` so every orbit is contiguous."""
        r = self.reordering
        r_inv = inverse(r)
        gens = [compose(compose(r, g), r_inv) for g in group.generators]
        elements = [compose(compose(r, g), r_inv) for g in group.elements]
        return PermutationGroup(group.degree, gens, elements, name=group.name)


def orbit_decomposition(group: PermutationGroup) -> OrbitDecomposition:
    """Orbits of the natural action, found as connected components of the generator graph."""
    n = group.degree
    if group.generators:
        src = np.tile(np.arange(n), len(group.generators))
        dst = np.concatenate([g.as_array() for g in group.generators])
        graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
        _, labels = connected_components(graph, directed=True, connection="weak")
    else:
        labels = np.arange(n)

    buckets: Dict[int, List[int]] = {}
    for point, label in enumerate(labels):
        buckets.setdefault(int(label), []).append(point)
    orbits = tuple(sorted(tuple(sorted(b)) for b in buckets.values()))
    layout = [p for members in orbits for p in members]
    images = [0] * n
    for position, point in enumerate(layout):
        images[point] = position
    logger.debug("Orbit decomposition of %r: %d orbits", group, len(orbits))
    return OrbitDecomposition(
        orbits=orbits,
        base_points=tuple(members[0] for members in orbits),
        reordering=Permutation(tuple(images)),
    )


def stabilizer(group: PermutationGroup, point: int) -> PermutationGroup:
    """Subgroup of elements fixing ``point``."""
    _check_point(group, point)
    members = [g for g in group.elements if g(point) == point]
    sub = _subgroup(group, members)
    sub.name = f"Stab({point})" if group.name is None else f"Stab_{group.name}({point})"
    return sub


# -- Cosets ---------------------------------------------------------------------


@dataclass(frozen=True)
class CosetDecomposition:
    """Right cosets ``G = ⨆ₖ Stab_G(base)·τ_k``.

    ``representatives[k]`` satisfies ``τ_k⁻¹(base) == orbit_points[k]``; for a
    contiguous orbit starting at ``base`` that is ``base + k``.
    """

    group: PermutationGroup
    subgroup: PermutationGroup
    base: int
    orbit_points: Tuple[int, ...]
    representatives: Tuple[Permutation, ...]

    def position(self, point: int) -> int:
        try:
            return self.orbit_points.index(point)
        except ValueError:
            raise IndexOutOfRangeError(
                f"Point {point} is not in the orbit of {self.base}"
            ) from None

    def representative(self, point: int) -> Permutation:
        """The τ with ``τ⁻¹(base) == point``."""
        return self.representatives[self.position(point)]

    def coset_index(self, element: Permutation) -> int:
        """The ``k`` with ``element ∈ Stab·τ_k``."""
        if element not in self.group:
            raise NotInGroupError(f"{element} is not an element of {self.group!r}")
        return self.position(inverse(element)(self.base))

    def cosets(self) -> List[List[Permutation]]:
        """Elements of each coset ``Stab·τ_k``."""
        return [[compose(h, tau) for h in self.subgroup.elements] for tau in self.representatives]

    @classmethod
    def from_transpositions(cls, group: PermutationGroup, base: int) -> "CosetDecomposition":
        """Representatives ``(base k)``, the choice used for ``S_n``.

        Raises:
            NotInGroupError: If a required transposition is not in ``group``.
        """
        points = tuple(orbit(group, base))
        reps = tuple(Permutation.transposition(group.degree, base, p) for p in points)
        for tau in reps:
            if tau not in group:
                raise NotInGroupError(f"Transposition {tau} is not in {group!r}")
        return cls(group, stabilizer(group, base), base, points, reps)


def coset_decomposition(group: PermutationGroup, base: int) -> CosetDecomposition:
    """Coset decomposition by ``Stab_G(base)`` with canonical representatives.

    For each orbit point ``o_k`` the representative is the lexicographically
    smallest image table among the elements with ``τ⁻¹(base) == o_k``.

    Raises:
        CosetInvariantError: If ``base`` is not the minimal point of its orbit,
            or if some orbit point has no candidate.
    """
    points = tuple(orbit(group, base))
    if points[0] != base:
        raise CosetInvariantError(
            f"Base point {base} is not the minimal point of its orbit {list(points)}",
            code="base_not_minimal",
        )
    if points != tuple(range(base, base + len(points))):
        logger.debug("Orbit of %d is not contiguous; representatives follow orbit order", base)

    table = group.as_array()
    reps = []
    for point in points:
        # τ⁻¹(base) == point  <=>  τ(point) == base; elements are already sorted
        candidates = np.flatnonzero(table[:, point] == base)
        if candidates.size == 0:
            raise CosetInvariantError(f"No coset representative for orbit point {point}")
        reps.append(group.elements[int(candidates[0])])
    return CosetDecomposition(group, stabilizer(group, base), base, points, tuple(reps))


@dataclass(frozen=True)
class CosetSystem:
    """One coset decomposition per orbit, addressable by any point."""

    group: PermutationGroup
    decompositions: Tuple[CosetDecomposition, ...]

    def decomposition_for(self, point: int) -> CosetDecomposition:
        for decomposition in self.decompositions:
            if point in decomposition.orbit_points:
                return decomposition
        raise IndexOutOfRangeError(f"Point {point} is not covered by the coset system")

    def representative(self, point: int) -> Permutation:
        return self.decomposition_for(point).representative(point)

    def representatives_by_point(self) -> List[Permutation]:
        return [self.representative(p) for p in range(self.group.degree)]


def coset_system(group: PermutationGroup, transpositions: bool = False) -> CosetSystem:
    """Coset decompositions at every orbit base point.

    Args:
        group: The group.
        transpositions: Use ``(base k)`` representatives instead of the
            canonical lexicographic choice.
    """
    build = CosetDecomposition.from_transpositions if transpositions else coset_decomposition
    decomposition = orbit_decomposition(group)
    return CosetSystem(group, tuple(build(group, base) for base in decomposition.base_points))


def cayley_embedding(group: PermutationGroup) -> "GroupAction":
    """Left-multiplication action of ``group`` on its own element list.

    Element ``g`` maps point ``index(h)`` to ``index(g ∘ h)``.
    """
    from .actions import GroupAction

    tables = []
    for g in group.elements:
        tables.append(Permutation(tuple(group.index(compose(g, h)) for h in group.elements)))
    return GroupAction(group, group.order, tables, name="cayley")
