"""Tests for network blocks, builders, checkpoints and bounds."""

import json

import numpy as np
import pytest

from permnet.actions import natural_action, tensor_action
from permnet.enums import ArchitectureMode, EncoderKind, NetKind, StabNetKind
from permnet.equi_linear import dense_pattern, pair_orbits
from permnet.exceptions import (
    BoundViolationError,
    NetworkBuildError,
    PatternError,
    ShapeMismatchError,
    SpecParseError,
)
from permnet.models import MLPSpec, NetworkSpec
from permnet.nets import (
    Branch,
    Gather,
    Identity,
    PowerEncoder,
    ReLU,
    Sequential,
    TiedAffine,
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
    naive_forward,
    net_parameter_bound,
    report_bounds,
    stab_equivariant_layer,
    symmetrize,
)
from permnet.perm_group import coset_system, cyclic_group, stabilizer, symmetric_group

from .factories import EquivariantSpecFactory, InvariantSumSpecFactory

TOL = 1e-9


def mlp(*widths):
    return MLPSpec(widths=list(widths))


def numeric_gradient(net, x, eps=1e-6):
    """Central differences of ``sum(net(x))`` with respect to every parameter."""
    base = net.parameter_vector()
    grad = np.zeros_like(base)
    for k in range(base.size):
        shifted = base.copy()
        shifted[k] += eps
        net.set_parameter_vector(shifted)
        up = net.forward(x).sum()
        shifted[k] -= 2 * eps
        net.set_parameter_vector(shifted)
        down = net.forward(x).sum()
        grad[k] = (up - down) / (2 * eps)
    net.set_parameter_vector(base)
    return grad


def analytic_gradient(net, x):
    net.zero_grad()
    out, tape = net.forward_with_tape(x)
    net.backward(np.ones_like(out), tape)
    assert tape == []
    return net.gradient_vector()


class TestBlocks:
    """Test the differentiable building blocks."""

    @pytest.mark.unit
    def test_tied_affine_forward(self, rng):
        pattern = dense_pattern(3, 2)
        layer = TiedAffine(pattern, rng.standard_normal(pattern.free_param_count))
        x = rng.standard_normal((4, 3))
        weight, bias = layer.realize()

        np.testing.assert_allclose(layer(x), x @ weight.T + bias)

    @pytest.mark.unit
    def test_sequential_rejects_bad_chain(self):
        with pytest.raises(ShapeMismatchError):
            Sequential([TiedAffine(dense_pattern(3, 2)), ReLU(3)])
        with pytest.raises(ShapeMismatchError):
            Sequential([])

    @pytest.mark.unit
    def test_gather_index_range(self):
        with pytest.raises(ShapeMismatchError):
            Gather([0, 3], 3)

    @pytest.mark.unit
    def test_branch_overlapping_gradients_add(self):
        branch = Branch([(0, 2, Identity(2)), (1, 3, Identity(2))], 3)
        tape = []
        branch.forward(np.zeros((1, 3)), tape)

        grad = branch.backward(np.ones((1, 4)), tape)
        np.testing.assert_array_equal(grad, [[1.0, 2.0, 1.0]])

    @pytest.mark.unit
    def test_branch_pads_shallow_parts(self):
        deep = Sequential(
            [TiedAffine(dense_pattern(2, 5)), ReLU(5), TiedAffine(dense_pattern(5, 3))]
        )
        branch = Branch([(0, 1, Identity(1)), (1, 3, deep)], 3)

        assert branch.hidden_widths() == [1 + 5]
        assert branch.out_features == 4

    @pytest.mark.unit
    def test_power_encoder_matches_ka_encoder(self):
        x = np.array([[0.5], [2.0]])

        np.testing.assert_allclose(PowerEncoder(3)(x), ka_encoder(x[:, 0], 3))
        np.testing.assert_allclose(ka_encoder(0.5, 3), [1.0, 0.5, 0.25, 0.125])

    @pytest.mark.unit
    def test_init_params_zero_bias(self, rng):
        pattern = dense_pattern(4, 2)
        params = init_params(pattern, rng)
        limit = np.sqrt(6.0 / 6)

        assert np.all(np.abs(params[:8]) <= limit)
        np.testing.assert_array_equal(params[8:], 0.0)

    @pytest.mark.unit
    def test_mlp_gradient(self, rng):
        net = build_untied_baseline(
            build_invariant_sum_net(3, mlp(1, 3, 2), mlp(2, 3, 1), seed=0), seed=1
        )
        x = rng.uniform(0, 1, (5, 3))

        np.testing.assert_allclose(analytic_gradient(net, x), numeric_gradient(net, x), atol=1e-6)


class TestTiedGradients:
    """Tied layers against untied duplicates holding the same values."""

    @staticmethod
    def untied_copy(layer):
        weight, bias = layer.realize()
        n_out, n_in = weight.shape
        return TiedAffine(dense_pattern(n_in, n_out), np.concatenate([weight.ravel(), bias]))

    @pytest.mark.unit
    def test_shared_gradient_is_sum_over_placements(self, fixture_group, rng):
        action = natural_action(fixture_group)
        pattern = pair_orbits(action, action)
        n = fixture_group.degree
        tied = TiedAffine(pattern, rng.standard_normal(pattern.free_param_count))
        head = dense_pattern(n, 1)
        head_params = rng.standard_normal(head.free_param_count)
        untied = self.untied_copy(tied)
        x = rng.uniform(-1, 1, (6, n))

        results = []
        for first in (tied, untied):
            block = Sequential([first, ReLU(n), TiedAffine(head, head_params.copy())])
            tape = []
            out = block.forward(x, tape)
            block.backward(np.ones_like(out), tape)
            results.append(out)
        np.testing.assert_allclose(results[0], results[1], atol=1e-12, rtol=0)

        grad_weight = untied.grad[: n * n].reshape(n, n)
        grad_bias = untied.grad[n * n :]
        expected = np.zeros(pattern.free_param_count)
        for (i, j), k in np.ndenumerate(pattern.weight_orbit_id):
            if k >= 0:
                expected[k] += grad_weight[i, j]
        for i, k in enumerate(pattern.bias_orbit_id):
            if k >= 0:
                expected[k] += grad_bias[i]
        np.testing.assert_allclose(tied.grad, expected, atol=1e-12, rtol=1e-12)

    @pytest.mark.unit
    def test_untied_copy_has_one_parameter_per_entry(self, s3, rng):
        pattern = pair_orbits(natural_action(s3), natural_action(s3))
        tied = TiedAffine(pattern, rng.standard_normal(pattern.free_param_count))

        assert self.untied_copy(tied).params.size == 3 * 3 + 3
        assert tied.params.size == pattern.free_param_count < 3 * 3 + 3


class TestNaiveEvaluator:
    """``Network.forward`` against the scalar-loop evaluator."""

    @pytest.mark.integration
    @pytest.mark.parametrize("kind", ["invariant_sum", "equivariant"])
    def test_thousand_random_inputs(self, kind, s3):
        rng = np.random.default_rng(2024)
        if kind == "invariant_sum":
            net = build_invariant_sum_net(3, mlp(1, 6, 3), mlp(3, 6, 1), seed=0)
        else:
            net = build_equivariant_net(s3, phi=mlp(1, 4, 2), rho=mlp(3, 4, 1), seed=0)
        inputs = rng.uniform(0, 1, (1000, 3))

        batched = net.forward(inputs)
        naive = np.array([naive_forward(net, x) for x in inputs])
        np.testing.assert_allclose(batched, naive, atol=1e-10, rtol=0)


class TestInvariantSumNet:
    """Test ρ(Σ φ(xᵢ)) nets."""

    @pytest.mark.unit
    def test_invariant_under_permutations(self, rng):
        net = build_invariant_sum_net(4, mlp(1, 8, 5), mlp(5, 8, 1), seed=0)
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (20, 4)))

        assert net.group == symmetric_group(4)
        assert residual < TOL

    @pytest.mark.unit
    def test_matches_naive_forward(self, rng):
        net = build_invariant_sum_net(3, mlp(1, 8, 4), mlp(4, 8, 1), seed=0)

        for x in rng.uniform(0, 1, (5, 3)):
            np.testing.assert_allclose(net(x), naive_forward(net, x), atol=1e-12, rtol=0)

    @pytest.mark.unit
    def test_wide_structure(self):
        net = build_invariant_sum_net(3, mlp(1, 8, 4), mlp(4, 8, 1), seed=0)

        assert net.hidden_widths() == [24, 8]
        assert net.depth == 3
        assert net.parameter_count == (8 + 8 + 32 + 4) + (32 + 8 + 8 + 1)

    @pytest.mark.unit
    def test_wide_rejects_second_hidden_layer(self):
        with pytest.raises(BoundViolationError):
            build_invariant_sum_net(3, mlp(1, 8, 8, 4), mlp(4, 8, 1))

    @pytest.mark.unit
    def test_deep_mode(self):
        net = build_invariant_sum_net(
            3, mlp(1, 4, 4, 4), mlp(4, 5, 5, 1), mode=ArchitectureMode.DEEP, seed=0
        )
        report = report_bounds(net)

        assert report.passed
        assert report.width_bound == 15
        assert report.width == 12

    @pytest.mark.unit
    def test_deep_rejects_wide_lane(self):
        with pytest.raises(BoundViolationError) as exc_info:
            build_invariant_sum_net(3, mlp(1, 9, 4), mlp(4, 5, 1), mode=ArchitectureMode.DEEP)

        assert exc_info.value.details["lane"] == "phi"

    @pytest.mark.unit
    def test_exact_encoder(self, rng):
        net = build_invariant_sum_net(3, None, mlp(4, 8, 1), encoder=EncoderKind.EXACT, seed=0)
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (10, 3)))

        assert residual < TOL
        assert net.parameter_count == 32 + 8 + 8 + 1

    @pytest.mark.unit
    def test_rho_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            build_invariant_sum_net(3, mlp(1, 8, 4), mlp(5, 8, 1))

    @pytest.mark.unit
    def test_rejects_wrong_input_width(self):
        net = build_invariant_sum_net(3, mlp(1, 8, 4), mlp(4, 8, 1), seed=0)

        with pytest.raises(ShapeMismatchError):
            net(np.zeros(4))

    @pytest.mark.unit
    def test_from_factory_spec(self, rng):
        spec = InvariantSumSpecFactory()
        net = build_network(spec, seed=0)
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (10, 3)))

        assert net.spec is spec
        assert residual < TOL


class TestInvariantTensorNet:
    """Test Σ ∘ L_H ∘ … ∘ L_1 nets."""

    @pytest.mark.unit
    def test_invariant(self, fixture_group, rng):
        net = build_invariant_tensor_net(fixture_group, orders=[(2, 1)], seed=0)
        residual, _ = net.equivariance_residual(rng.standard_normal((10, fixture_group.degree)))

        assert residual < TOL
        assert net.out_features == 1

    @pytest.mark.unit
    def test_weight_count_s3(self, s3):
        net = build_invariant_tensor_net(s3, orders=[(1, 2), (2, 1)], seed=0)

        assert net.weight_count == 4 + 10
        assert net.hidden_widths() == [6]

    @pytest.mark.unit
    def test_parameter_bound(self, s3):
        bound = net_parameter_bound(build_invariant_tensor_net(s3, orders=[(1, 2), (2, 1)]))

        assert bound.widths == [3, 6, 1]
        assert bound.equivariant_layers == 2
        assert bound.exact_tied_count == 14
        assert bound.within_bound

    @pytest.mark.unit
    def test_rejects_foreign_action(self, s3):
        with pytest.raises(NetworkBuildError):
            build_invariant_tensor_net(s3, layers=[tensor_action(cyclic_group(3), 2)])

    @pytest.mark.unit
    def test_has_no_bounds(self, s3):
        report = report_bounds(build_invariant_tensor_net(s3, orders=[(2, 1)]))

        assert report.passed
        assert report.width_bound is None
        assert report.depth_bound is None


class TestStabInvariantNet:
    """Test nets invariant under a point stabilizer."""

    @pytest.mark.unit
    def test_sum_form(self, s4, rng):
        net = build_stab_invariant_net(4, mlp(4, 8, 1), mlp(1, 8, 3), base=0, seed=0)
        x = rng.uniform(0, 1, (20, 4))
        residual, _ = net.equivariance_residual(x)

        assert net.group == stabilizer(s4, 0)
        assert residual < TOL

    @pytest.mark.unit
    def test_sum_form_is_not_fully_invariant(self, s4, rng):
        net = build_stab_invariant_net(4, mlp(4, 8, 1), mlp(1, 8, 3), base=0, seed=0)
        x = rng.uniform(0, 1, (20, 4))
        moved = x[:, [1, 0, 2, 3]]

        assert np.abs(net(moved) - net(x)).max() > 1e-6

    @pytest.mark.unit
    def test_other_base(self, s3, rng):
        net = build_stab_invariant_net(3, mlp(3, 6, 1), mlp(1, 6, 2), base=2, seed=0)
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (10, 3)))

        assert net.group == stabilizer(s3, 2)
        assert residual < TOL

    @pytest.mark.unit
    def test_symmetrized_form(self, d4, rng):
        net = build_stab_invariant_net(
            4, None, None, stab_kind=StabNetKind.SYMMETRIZED, group=d4, mlp=mlp(4, 8, 1), seed=0
        )
        residual, _ = net.equivariance_residual(rng.standard_normal((10, 4)))

        assert net.group == stabilizer(d4, 0)
        assert residual < TOL

    @pytest.mark.unit
    def test_needs_two_coordinates(self):
        with pytest.raises(NetworkBuildError):
            build_stab_invariant_net(1, mlp(2, 4, 1), mlp(1, 4, 1))

    @pytest.mark.unit
    def test_default_kind(self, s3, c4):
        assert default_stab_kind(s3) == StabNetKind.SUM
        assert default_stab_kind(c4) == StabNetKind.SYMMETRIZED


class TestEquivariantNet:
    """Test nets assembled from stabilizer-invariant scalar nets."""

    @pytest.mark.unit
    def test_symmetrized_equivariance(self, fixture_group, rng):
        n = fixture_group.degree
        net = build_equivariant_net(
            fixture_group, mlp=mlp(n, 8, 1), stab_kind=StabNetKind.SYMMETRIZED, seed=0
        )
        residual, witness = net.equivariance_residual(rng.standard_normal((10, n)))

        assert residual < TOL
        assert net.out_features == n

    @pytest.mark.unit
    @pytest.mark.parametrize("transpositions", [False, True])
    def test_sum_form_equivariance(self, s4, rng, transpositions):
        net = build_equivariant_net(
            s4,
            cosets=coset_system(s4, transpositions=transpositions),
            phi=mlp(1, 8, 5),
            rho=mlp(6, 8, 1),
            seed=0,
        )
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (20, 4)))

        assert residual < TOL
        assert report_bounds(net).depth == 3

    @pytest.mark.unit
    def test_matches_naive_forward(self, s3, rng):
        net = build_equivariant_net(s3, phi=mlp(1, 8, 4), rho=mlp(5, 8, 1), seed=0)

        for x in rng.uniform(0, 1, (3, 3)):
            np.testing.assert_allclose(net(x), naive_forward(net, x), atol=1e-12, rtol=0)

    @pytest.mark.unit
    def test_gradient(self, s3, rng):
        net = build_equivariant_net(s3, phi=mlp(1, 3, 2), rho=mlp(3, 3, 1), seed=0)
        x = rng.uniform(0, 1, (4, 3))

        np.testing.assert_allclose(analytic_gradient(net, x), numeric_gradient(net, x), atol=1e-6)

    @pytest.mark.unit
    def test_orbit_net_count(self, s2_in_s3):
        with pytest.raises(NetworkBuildError):
            build_equivariant_net(s2_in_s3, stab_nets=[build_mlp(mlp(3, 4, 1))])

    @pytest.mark.unit
    def test_from_spec(self, equivariant_net_spec, rng):
        net = build_network(NetworkSpec.model_validate(equivariant_net_spec), seed=0)
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (10, 3)))

        assert net.kind == NetKind.EQUIVARIANT
        assert residual < TOL

    @pytest.mark.unit
    def test_from_factory_spec(self, rng):
        net = build_network(EquivariantSpecFactory(), seed=0)
        residual, _ = net.equivariance_residual(rng.uniform(0, 1, (10, 3)))

        assert residual < TOL


class TestFirstLayer:
    """Test the natural-to-star first layer."""

    @pytest.mark.unit
    @pytest.mark.parametrize("transpositions", [False, True])
    def test_equivariant_to_star(self, s4, rng, transpositions):
        cosets = coset_system(s4, transpositions=transpositions)
        net = first_layer_g(stab_equivariant_layer(s4, cosets, seed=0), s4, cosets)
        residual, _ = net.equivariance_residual(rng.standard_normal((10, 4)))

        assert net.out_features == 16
        assert residual < TOL

    @pytest.mark.unit
    def test_rejects_untied_layer(self, s3, rng):
        pattern = dense_pattern(3, 3)
        layer = TiedAffine(pattern, rng.standard_normal(pattern.free_param_count))

        with pytest.raises(PatternError):
            first_layer_g(layer, s3)

    @pytest.mark.unit
    def test_needs_transitive_group(self, s2_in_s3):
        with pytest.raises(NetworkBuildError):
            first_layer_g(TiedAffine(dense_pattern(3, 3)), s2_in_s3)


class TestSymmetrize:
    """Test the Reynolds average."""

    @pytest.mark.unit
    def test_average_is_invariant(self, d4, rng):
        weights = rng.standard_normal(4)
        averaged = symmetrize(lambda x: np.tanh(x @ weights), d4)
        x = rng.standard_normal((5, 4))
        nat = natural_action(d4)

        for h in d4:
            np.testing.assert_allclose(averaged(x[:, nat.pull_index(h)]), averaged(x), atol=1e-12)


class TestCheckpoint:
    """Test saving and restoring parameters."""

    @pytest.mark.unit
    def test_round_trip(self, tmp_path, s3):
        path = tmp_path / "checkpoint.json"
        net = build_equivariant_net(s3, phi=mlp(1, 8, 4), rho=mlp(5, 8, 1), seed=0)
        net.save_checkpoint(path)

        other = build_equivariant_net(s3, phi=mlp(1, 8, 4), rho=mlp(5, 8, 1), seed=99)
        other.load_checkpoint(path)
        np.testing.assert_array_equal(other.parameter_vector(), net.parameter_vector())
        header = json.loads(path.read_text())["header"]
        assert header["sharing_hash"] == net.sharing_hash()
        assert header["parameter_count"] == net.parameter_count

    @pytest.mark.unit
    def test_rejects_other_pattern(self, tmp_path, s3):
        path = tmp_path / "checkpoint.json"
        build_invariant_tensor_net(s3, orders=[(2, 1)], seed=0).save_checkpoint(path)

        with pytest.raises(SpecParseError):
            build_invariant_tensor_net(s3, orders=[(1, 2)], seed=0).load_checkpoint(path)

    @pytest.mark.unit
    def test_rejects_malformed_file(self, tmp_path, s3):
        path = tmp_path / "checkpoint.json"
        path.write_text("{not json")

        with pytest.raises(SpecParseError):
            build_invariant_tensor_net(s3, orders=[(2, 1)]).load_checkpoint(path)

    @pytest.mark.unit
    def test_parameter_vector_shape(self, s3):
        net = build_invariant_tensor_net(s3, orders=[(2, 1)])

        with pytest.raises(ShapeMismatchError):
            net.set_parameter_vector(np.zeros(net.parameter_count + 1))


class TestUntiedBaseline:
    """Test the dense comparison net."""

    @pytest.mark.unit
    def test_same_widths_more_parameters(self, s3):
        net = build_equivariant_net(s3, phi=mlp(1, 8, 4), rho=mlp(5, 8, 1), seed=0)
        baseline = build_untied_baseline(net, seed=0)

        assert baseline.hidden_widths() == net.hidden_widths()
        assert baseline.parameter_count > net.parameter_count
        assert not baseline.tied
        assert baseline.group is None

    @pytest.mark.unit
    def test_has_no_symmetry(self, s3):
        baseline = build_untied_baseline(build_invariant_tensor_net(s3, orders=[(2, 1)]))

        with pytest.raises(ShapeMismatchError):
            baseline.equivariance_residual(np.zeros((1, 3)))
