"""Property suite run by ``permnet verify``.

Every check returns a :class:`~permnet.models.PropertyResult` with the
largest residual it saw and, on failure, a witness.
"""

import logging
from math import factorial
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .actions import (
    GroupAction,
    apply,
    extend_with_trivial_channels,
    group_spec,
    induced_star_action,
    natural_action,
    sigma_tilde,
    tensor_action,
    union_of_permutations,
)
from .config import get_config
from .enums import ZERO_ORBIT, ArchitectureMode, CheckStatus, NetKind, StabNetKind
from .equi_linear import (
    SharingPattern,
    brute_force_equivariant_basis,
    equivariant_nullspace_dimension,
    pair_orbits,
    lambda_gamma_basis,
    parameter_bound,
    realize,
    star_intertwiner_counts,
    union_pattern_count,
)
from .exceptions import IndexCapExceededError
from .models import MLPSpec, PropertyResult, VerificationReport
from .nets.builders import (
    build_equivariant_net,
    build_invariant_sum_net,
    build_invariant_tensor_net,
    build_mlp,
    build_stab_invariant_net,
    first_layer_g,
    stab_equivariant_layer,
    symmetrize_block,
)
from .nets.layers import TiedAffine
from .nets.network import Network
from .perm_group import (
    PermutationGroup,
    cayley_embedding,
    compose,
    coset_system,
    inverse,
    orbit,
    stabilizer,
)
from .utils import content_hash

logger = logging.getLogger(__name__)

Check = Callable[["SuiteContext"], PropertyResult]


class SuiteContext:
    """Shared state of one suite run."""

    def __init__(self, group: PermutationGroup, seed: int, samples: int, corrupt_tying: bool):
        self.group = group
        self.seed = seed
        self.samples = samples
        self.corrupt_tying = corrupt_tying
        self.rng = np.random.default_rng(seed)
        self.tolerance = get_config().equivariance_tolerance
        self.cosets = coset_system(group)

    @property
    def degree(self) -> int:
        return self.group.degree

    @property
    def is_symmetric(self) -> bool:
        return self.group.order == factorial(self.degree)

    @property
    def is_transitive(self) -> bool:
        return len(self.cosets.decompositions) == 1

    def inputs(self) -> np.ndarray:
        lo, hi = get_config().domain
        return self.rng.uniform(lo, hi, size=(self.samples, self.degree))


def _result(
    name: str,
    ok: bool,
    residual: float = 0.0,
    tolerance: Optional[float] = None,
    cases: int = 0,
    detail: Optional[str] = None,
    witness: Optional[Dict[str, Any]] = None,
) -> PropertyResult:
    return PropertyResult(
        name=name,
        status=CheckStatus.PASS if ok else CheckStatus.FAIL,
        max_residual=residual,
        tolerance=tolerance,
        cases=cases,
        detail=detail,
        witness=None if ok else witness,
    )


def corrupt_pattern(
    pattern: SharingPattern, params: np.ndarray
) -> Tuple[SharingPattern, np.ndarray]:
    """Untie one entry of the largest weight orbit and give it a different value."""
    ids = pattern.weight_orbit_id.copy()
    counts = np.bincount(ids[ids != ZERO_ORBIT], minlength=pattern.weight_count)
    if counts.size == 0 or counts.max() < 2:
        return pattern, params
    target = int(np.argmax(counts))
    row, col = np.argwhere(ids == target)[0]
    # the moved entry becomes the last weight id; bias ids shift up by one
    ids[row, col] = pattern.weight_count
    bias = pattern.bias_orbit_id.copy()
    bias[bias != ZERO_ORBIT] += 1
    corrupted = SharingPattern(
        pattern.in_size, pattern.out_size, ids, bias, pattern.weight_count + 1, pattern.bias_count
    )
    weights = params[: pattern.weight_count]
    values = np.concatenate(
        [weights, [weights[target] + 1.0], params[pattern.weight_count :]]
    )
    return corrupted, values


def _equivariance(
    net: Network, x: np.ndarray, name: str, tol: float
) -> PropertyResult:
    residual, witness = net.equivariance_residual(x)
    return _result(name, residual <= tol, residual, tol, len(x) * net.group.order, witness=witness)


# -- perm_group ---------------------------------------------------------------------


def check_group_axioms(ctx: SuiteContext) -> PropertyResult:
    g = ctx.group
    elements = g.elements
    ok = g.identity.is_identity and all(inverse(a) in g for a in elements)
    pairs = 0
    for a in elements[:120]:
        for b in elements[:120]:
            pairs += 1
            if compose(a, b) not in g:
                return _result("group_axioms", False, 1.0, cases=pairs,
                               witness={"g": list(a.images), "h": list(b.images)})
    for _ in range(50):
        a, b, c = (elements[int(k)] for k in ctx.rng.integers(0, g.order, 3))
        ok &= compose(compose(a, b), c) == compose(a, compose(b, c))
    ok &= factorial(g.degree) % g.order == 0
    return _result("group_axioms", ok, cases=pairs + 50)


def check_orbit_stabilizer(ctx: SuiteContext) -> PropertyResult:
    g = ctx.group
    for i in range(g.degree):
        if len(orbit(g, i)) * stabilizer(g, i).order != g.order:
            return _result("orbit_stabilizer", False, 1.0, cases=i + 1, witness={"point": i})
    return _result("orbit_stabilizer", True, cases=g.degree)


def check_coset_partition(ctx: SuiteContext) -> PropertyResult:
    cases = 0
    for decomposition in ctx.cosets.decompositions:
        members = [h.images for coset in decomposition.cosets() for h in coset]
        cases += len(members)
        if len(members) != len(set(members)) or set(members) != {e.images for e in ctx.group}:
            return _result("coset_partition", False, 1.0, cases=cases,
                           witness={"base": decomposition.base})
        for k, tau in enumerate(decomposition.representatives):
            if inverse(tau)(decomposition.base) != decomposition.orbit_points[k]:
                return _result("coset_partition", False, 1.0, cases=cases,
                               witness={"base": decomposition.base, "k": k})
        for element in ctx.group:
            k = decomposition.coset_index(element)
            h = compose(element, inverse(decomposition.representatives[k]))
            if h not in decomposition.subgroup:
                return _result("coset_partition", False, 1.0, cases=cases,
                               witness={"g": list(element.images)})
    return _result("coset_partition", True, cases=cases)


def check_cayley_embedding(ctx: SuiteContext) -> PropertyResult:
    if ctx.group.order > 120:
        return _result("cayley_embedding", True, detail="skipped: order above 120")
    action = cayley_embedding(ctx.group)
    ok = action.is_injective() and action.is_homomorphism()
    return _result("cayley_embedding", ok, 0.0 if ok else 1.0, cases=ctx.group.order**2)


# -- actions ----------------------------------------------------------------------------


def _actions(ctx: SuiteContext) -> Dict[str, GroupAction]:
    g = ctx.group
    built = {"natural": natural_action(g), "star": induced_star_action(g, ctx.cosets)}
    for name, factory in (
        ("tensor(k=2,a=2)", lambda: tensor_action(g, 2, 2)),
        ("star x 3", lambda: extend_with_trivial_channels(built["star"], 3)),
    ):
        try:
            built[name] = factory()
        except IndexCapExceededError:
            logger.debug("Skipping %s: index cap", name)
    return built


def check_action_homomorphisms(ctx: SuiteContext) -> PropertyResult:
    cases = 0
    for name, action in _actions(ctx).items():
        cases += ctx.group.order**2
        witness = action.homomorphism_witness()
        if witness is not None:
            return _result("action_homomorphisms", False, 1.0, cases=cases, witness={
                "action": name, "g": list(witness[0].images), "h": list(witness[1].images)})
    return _result("action_homomorphisms", True, cases=cases)


def check_star_blocks(ctx: SuiteContext) -> PropertyResult:
    """Block ``p`` of ``σ∗X`` equals ``σ̃_p`` applied to block ``σ⁻¹(p)``."""
    n = ctx.degree
    star = induced_star_action(ctx.group, ctx.cosets)
    nat = natural_action(ctx.group)
    x = ctx.rng.standard_normal(n * n)
    for sigma in ctx.group:
        moved = apply(star, sigma, x).reshape(n, n)
        blocks = x.reshape(n, n)
        for p in range(n):
            tilde = sigma_tilde(ctx.cosets, sigma, p)
            if not np.array_equal(moved[p], apply(nat, tilde, blocks[inverse(sigma)(p)])):
                return _result("star_blocks", False, 1.0, witness={
                    "sigma": list(sigma.images), "block": p})
    return _result("star_blocks", True, cases=ctx.group.order * n)


def check_sigma_tilde(ctx: SuiteContext) -> PropertyResult:
    cases = 0
    for sigma in ctx.group:
        for p in range(ctx.degree):
            cases += 1
            decomposition = ctx.cosets.decomposition_for(p)
            tilde = sigma_tilde(ctx.cosets, sigma, p)
            lhs = compose(ctx.cosets.representative(p), sigma)
            rhs = compose(tilde, ctx.cosets.representative(inverse(sigma)(p)))
            if lhs != rhs or tilde not in decomposition.subgroup:
                return _result("sigma_tilde", False, 1.0, cases=cases, witness={
                    "sigma": list(sigma.images), "point": p})
    return _result("sigma_tilde", True, cases=cases)


def check_first_layer_g(ctx: SuiteContext, trials: int = 10) -> PropertyResult:
    if not ctx.is_transitive:
        return _result("first_layer_g", True, detail="skipped: group not transitive")
    worst, witness = 0.0, None
    x = ctx.inputs()
    for _ in range(trials):
        layer = stab_equivariant_layer(ctx.group, ctx.cosets, ctx.rng)
        net = first_layer_g(layer, ctx.group, ctx.cosets)
        residual, found = net.equivariance_residual(x)
        if residual > worst:
            worst, witness = residual, found
    return _result("first_layer_g", worst <= ctx.tolerance, worst, ctx.tolerance,
                   trials * len(x) * ctx.group.order, witness=witness)


def check_first_layer_g_negative(ctx: SuiteContext) -> PropertyResult:
    """Against the plain permutation of all ``n²`` coordinates the layer is not equivariant."""
    if not ctx.is_transitive or ctx.group.order == 1:
        return _result("first_layer_g_negative_control", True, detail="skipped")
    layer = stab_equivariant_layer(ctx.group, ctx.cosets, ctx.rng)
    net = first_layer_g(layer, ctx.group, ctx.cosets)
    net.out_action = tensor_action(ctx.group, 2, 1)
    residual, witness = net.equivariance_residual(ctx.inputs())
    found = residual > ctx.tolerance
    return _result("first_layer_g_negative_control", found, residual, ctx.tolerance,
                   detail="violation witness found" if found else "no violation found",
                   witness=witness)


# -- equi_linear ------------------------------------------------------------------------


def check_pair_orbits_dimension(ctx: SuiteContext) -> PropertyResult:
    g = ctx.group
    nat = natural_action(g)
    pairs: List[Tuple[str, Callable[[], Tuple[GroupAction, GroupAction]]]] = [
        ("natural->natural", lambda: (nat, nat)),
        ("natural->tensor2", lambda: (nat, tensor_action(g, 2))),
        ("tensor2->natural", lambda: (tensor_action(g, 2), nat)),
        ("natural->star", lambda: (nat, induced_star_action(g, ctx.cosets))),
    ]
    cases = 0
    for name, make in pairs:
        try:
            src, dst = make()
            basis = brute_force_equivariant_basis(src, dst)
        except IndexCapExceededError:
            continue
        orbit_count = pair_orbits(src, dst).weight_count
        dims = {orbit_count, len(basis)}
        if src.point_count * dst.point_count <= 1024:
            dims.add(equivariant_nullspace_dimension(src, dst))
        cases += 1
        if len(dims) != 1:
            return _result("pair_orbits_dimension", False, 1.0, cases=cases,
                           witness={"pair": name, "dimensions": sorted(dims)})
    return _result("pair_orbits_dimension", True, cases=cases)


def check_union_count(ctx: SuiteContext) -> PropertyResult:
    if not ctx.is_symmetric or ctx.degree < 2:
        return _result("union_of_permutations_count", True, detail="skipped: not S_n")
    n = ctx.degree
    cases = 0
    for m_copies, n_copies in ((1, 1), (2, 3), (3, 1)):
        try:
            pattern = pair_orbits(
                union_of_permutations(n, m_copies, ctx.group),
                union_of_permutations(n, n_copies, ctx.group),
            )
        except IndexCapExceededError:
            continue
        cases += 1
        expected = union_pattern_count(n, m_copies, n_copies)
        if pattern.weight_count != expected:
            return _result("union_of_permutations_count", False, 1.0, cases=cases, witness={
                "copies": [m_copies, n_copies], "count": pattern.weight_count,
                "expected": expected})
    return _result("union_of_permutations_count", True, cases=cases)


def check_lambda_gamma_basis(ctx: SuiteContext) -> PropertyResult:
    if not ctx.is_symmetric or ctx.degree < 2:
        return _result("lambda_gamma_basis", True, detail="skipped: not S_n")
    nat = natural_action(ctx.group)
    pattern = pair_orbits(nat, nat)
    lam, gam, c = ctx.rng.standard_normal(3)
    weight, _ = realize(pattern, np.array([lam, gam, c]))
    lam_p, gam_p, error = lambda_gamma_basis(weight)
    error = max(error, abs(lam_p - (lam - gam)), abs(gam_p - gam))
    tol = get_config().naive_tolerance
    ok = pattern.weight_count == 2 and error <= tol
    return _result("lambda_gamma_basis", ok, float(error), tol, cases=1)


def check_star_counts(ctx: SuiteContext) -> PropertyResult:
    """Reports the orbit counts around the "∗" action; never fails."""
    if not ctx.is_symmetric or not 2 <= ctx.degree <= 5:
        return _result("star_intertwiner_counts", True, detail="skipped")
    counts = star_intertwiner_counts(ctx.degree, group=ctx.group)
    detail = (
        f"natural->star {counts.natural_to_star} (claimed {counts.claimed_natural_to_star}), "
        f"star->star {counts.star_to_star} (claimed {counts.claimed_star_to_star})"
    )
    return _result("star_intertwiner_counts", True, cases=2, detail=detail)


# -- nets -------------------------------------------------------------------------------------


def _small_mlp(widths: List[int]) -> MLPSpec:
    return MLPSpec(widths=widths)


def check_tied_layer(ctx: SuiteContext) -> PropertyResult:
    """``W·σx + b = σ·(Wx + b)`` for a tied natural -> tensor layer."""
    g = ctx.group
    src = natural_action(g)
    dst = tensor_action(g, 2) if g.degree**2 <= get_config().action_index_cap else src
    pattern = pair_orbits(src, dst)
    params = ctx.rng.standard_normal(pattern.free_param_count)
    if ctx.corrupt_tying:
        pattern, params = corrupt_pattern(pattern, params)
    net = Network(TiedAffine(pattern, params), NetKind.EQUIVARIANT, g.degree, group=g,
                  in_action=src, out_action=dst, name="tied_layer")
    return _equivariance(net, ctx.inputs(), "tied_layer_equivariance", ctx.tolerance)


def check_tensor_net(ctx: SuiteContext) -> PropertyResult:
    orders = [(1, 2)]
    if ctx.degree**2 <= get_config().action_index_cap:
        orders.append((2, 1))
    net = build_invariant_tensor_net(ctx.group, orders=orders, seed=ctx.rng)
    result = _equivariance(net, ctx.inputs(), "tensor_net_invariance", ctx.tolerance)
    widths = [net.in_features] + net.hidden_widths() + [net.out_features]
    bound = parameter_bound(widths, ctx.degree, len(net.affine_layers()), net.weight_count)
    if ctx.is_symmetric and result.passed and not bound.within_bound:
        return _result("tensor_net_invariance", False, detail="tied count above bound",
                       witness={"count": net.weight_count, "bound": str(bound.bound)})
    return result


def check_sum_net(ctx: SuiteContext) -> PropertyResult:
    n = ctx.degree
    if factorial(n) > get_config().closure_cap:
        return _result("sum_net_invariance", True, detail="skipped: S_n above closure cap")
    net = build_invariant_sum_net(n, _small_mlp([1, 8, n + 1]), _small_mlp([n + 1, 8, 1]),
                                  seed=ctx.rng)
    residual, witness = net.equivariance_residual(ctx.inputs(), list(ctx.group.elements))
    return _result("sum_net_invariance", residual <= ctx.tolerance, residual, ctx.tolerance,
                   ctx.samples * ctx.group.order, witness=witness)


def check_stab_net(ctx: SuiteContext) -> PropertyResult:
    n = ctx.degree
    base = ctx.cosets.decompositions[0].base
    if ctx.is_symmetric and n >= 2:
        net = build_stab_invariant_net(n, _small_mlp([n + 2, 8, 1]), _small_mlp([1, 8, n + 1]),
                                       base=base, seed=ctx.rng)
    else:
        net = build_stab_invariant_net(n, None, None, base=base, seed=ctx.rng,
                                       stab_kind=StabNetKind.SYMMETRIZED, group=ctx.group,
                                       mlp=_small_mlp([n, 8, 1]))
    return _equivariance(net, ctx.inputs(), "stab_net_invariance", ctx.tolerance)


def check_equivariant_net(ctx: SuiteContext) -> PropertyResult:
    n = ctx.degree
    net = build_equivariant_net(
        ctx.group,
        ctx.cosets,
        phi=_small_mlp([1, 8, n + 1]),
        rho=_small_mlp([n + 2, 8, 1]),
        mlp=_small_mlp([n, 8, 1]),
        stab_kind=None if n >= 2 else StabNetKind.SYMMETRIZED,
        mode=ArchitectureMode.WIDE,
        seed=ctx.rng,
    )
    return _equivariance(net, ctx.inputs(), "equivariant_net", ctx.tolerance)


def check_assembly_from_invariants(ctx: SuiteContext) -> PropertyResult:
    """Stabilizer-invariant pieces assemble into an equivariant map."""
    n = ctx.degree
    pieces = [
        symmetrize_block(build_mlp(_small_mlp([n, 8, 1]), ctx.rng), d.subgroup)
        for d in ctx.cosets.decompositions
    ]
    net = build_equivariant_net(ctx.group, ctx.cosets, stab_nets=pieces, seed=ctx.rng)
    return _equivariance(net, ctx.inputs(), "assembly_from_invariants", ctx.tolerance)


def check_restriction_to_stabilizer(ctx: SuiteContext) -> PropertyResult:
    """An equivariant map's base coordinate is stabilizer-invariant and determines the rest."""
    g = ctx.group
    action = natural_action(g)
    h = build_mlp(_small_mlp([ctx.degree, 8, ctx.degree]), ctx.rng)

    def equivariant(x: np.ndarray) -> np.ndarray:
        total = np.zeros_like(x)
        for element in g:
            total += apply(action, inverse(element), h.forward(apply(action, element, x)))
        return total / g.order

    x = ctx.inputs()
    fx = equivariant(x)
    worst, witness = 0.0, None
    for decomposition in ctx.cosets.decompositions:
        base = decomposition.base
        for s in decomposition.subgroup:
            diff = float(np.abs(equivariant(apply(action, s, x))[:, base] - fx[:, base]).max())
            if diff > worst:
                worst, witness = diff, {"sigma": list(s.images), "base": base}
        for point, tau in zip(decomposition.orbit_points, decomposition.representatives):
            diff = float(np.abs(equivariant(apply(action, tau, x))[:, base] - fx[:, point]).max())
            if diff > worst:
                worst, witness = diff, {"tau": list(tau.images), "point": point}
    return _result("restriction_to_stabilizer", worst <= ctx.tolerance, worst, ctx.tolerance,
                   len(x) * g.order, witness=witness)


DEFAULT_CHECKS: List[Check] = [
    check_group_axioms,
    check_orbit_stabilizer,
    check_coset_partition,
    check_cayley_embedding,
    check_action_homomorphisms,
    check_star_blocks,
    check_sigma_tilde,
    check_first_layer_g,
    check_first_layer_g_negative,
    check_pair_orbits_dimension,
    check_union_count,
    check_lambda_gamma_basis,
    check_star_counts,
    check_tied_layer,
    check_tensor_net,
    check_sum_net,
    check_stab_net,
    check_equivariant_net,
    check_assembly_from_invariants,
    check_restriction_to_stabilizer,
]


def run_suite(
    group: PermutationGroup,
    seed: int = 0,
    samples: int = 100,
    corrupt_tying: bool = False,
    checks: Optional[List[Check]] = None,
) -> VerificationReport:
    """Run every check against ``group``.

    Args:
        group: Group under test.
        seed: Seed for all random inputs and parameters.
        samples: Random inputs per numerical check.
        corrupt_tying: Untie one weight entry in the tied-layer checks, which
            must then fail with a witness.
        checks: Subset of checks to run; all by default.
    """
    ctx = SuiteContext(group, seed, samples, corrupt_tying)
    results = []
    for check in checks if checks is not None else DEFAULT_CHECKS:
        result = check(ctx)
        logger.info("%s: %s (residual %.3g)", result.name, result.status.value, result.max_residual)
        results.append(result)
    spec = group_spec(group)
    config_hash = content_hash(
        {"group": spec.model_dump(mode="json"), "seed": seed, "samples": samples,
         "corrupt_tying": corrupt_tying}
    )
    return VerificationReport(group=spec, seed=seed, config_hash=config_hash, properties=results)
