"""Gradient training of tied networks.

Tied parameters are stored once, so every optimizer step keeps all copies
equal and the symmetry of the net holds after every step.
"""

import csv
import itertools
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .actions import apply, natural_action
from .config import get_config
from .enums import OptimizerKind
from .exceptions import DivergenceError, GridCapExceededError, ShapeMismatchError, TrainingError
from .models import EpochRecord, TrainConfig, TrainingReport
from .nets.network import Network
from .perm_group import PermutationGroup

logger = logging.getLogger(__name__)

TargetFn = Callable[[np.ndarray], np.ndarray]

CSV_FIELDS = ("epoch", "train_mse", "grid_sup_error", "equivariance_residual")


# -- Targets ----------------------------------------------------------------------


def prod_plus_sumsq(x: np.ndarray) -> np.ndarray:
    """Invariant target ``Πxᵢ + Σxᵢ²``."""
    return (np.prod(x, axis=1) + np.sum(x**2, axis=1))[:, None]


def square_plus_sum(x: np.ndarray) -> np.ndarray:
    """Equivariant target ``F(x)ᵢ = xᵢ² + Σⱼxⱼ``."""
    return x**2 + x.sum(axis=1, keepdims=True)


def coordinate_sum(x: np.ndarray) -> np.ndarray:
    return x.sum(axis=1, keepdims=True)


TARGETS: Dict[str, TargetFn] = {
    "prod_plus_sumsq": prod_plus_sumsq,
    "square_plus_sum": square_plus_sum,
    "sum": coordinate_sum,
}


def get_target(name: str) -> TargetFn:
    try:
        return TARGETS[name]
    except KeyError:
        raise TrainingError(
            f"Unknown target {name!r}; choose from {sorted(TARGETS)}", code="target"
        ) from None


# -- Data ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Input rows in the domain box and their targets."""

    inputs: np.ndarray
    targets: np.ndarray
    descriptor: str

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ShapeMismatchError("Dataset inputs and targets must be matrices")
        if len(self.inputs) != len(self.targets):
            raise ShapeMismatchError("Dataset inputs and targets differ in length")
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise TrainingError("Dataset contains non-finite values", code="non_finite")

    def __len__(self) -> int:
        return len(self.inputs)


def make_dataset(
    target: Union[str, TargetFn],
    degree: int,
    sample_count: int,
    seed: int = 0,
    domain: Optional[Tuple[float, float]] = None,
    group: Optional[PermutationGroup] = None,
) -> Dataset:
    """Uniform samples in ``[lo, hi]^n``; with ``group``, every sample's orbit too.

    Args:
        target: Registered target name or a batch function.
        degree: Input dimension ``n``.
        sample_count: Number of uniform draws.
        seed: Seed of the draw.
        domain: ``(lo, hi)``; defaults to the configured domain.
        group: Add all images ``σ·x`` of every sample (symmetrized sampling).
    """
    fn = get_target(target) if isinstance(target, str) else target
    lo, hi = domain if domain is not None else get_config().domain
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(lo, hi, size=(sample_count, degree))
    scheme = "uniform"
    if group is not None:
        action = natural_action(group)
        inputs = np.concatenate([apply(action, g, inputs) for g in group.elements])
        scheme = f"uniform+orbits({group.order})"
    name = target if isinstance(target, str) else getattr(target, "__name__", "custom")
    return Dataset(inputs, np.asarray(fn(inputs), dtype=np.float64), f"{name};{scheme}")


def grid_points(
    degree: int, points_per_axis: int, domain: Optional[Tuple[float, float]] = None
) -> np.ndarray:
    """Regular grid on ``[lo, hi]^n`` with ``points_per_axis`` points per axis.

    Raises:
        GridCapExceededError: If the grid has more points than the configured cap.
    """
    config = get_config()
    size = points_per_axis**degree
    if size > config.grid_point_cap:
        raise GridCapExceededError(
            f"Grid of {size} points exceeds cap {config.grid_point_cap}",
            code="grid_cap",
            details={"points": size, "cap": config.grid_point_cap},
        )
    lo, hi = domain if domain is not None else config.domain
    axis = np.linspace(lo, hi, points_per_axis)
    return np.array(list(itertools.product(axis, repeat=degree)), dtype=np.float64).reshape(
        size, degree
    )


def _check_widths(outputs: np.ndarray, targets: np.ndarray) -> None:
    if outputs.shape != targets.shape:
        raise ShapeMismatchError(f"Outputs {outputs.shape} do not match targets {targets.shape}")


def grid_sup_error(
    net: Network,
    target: TargetFn,
    points_per_axis: int = 21,
    domain: Optional[Tuple[float, float]] = None,
    chunk_size: int = 8192,
) -> float:
    """Max over the grid of ``max_i |net(x)_i − target(x)_i|``.

    Raises:
        ShapeMismatchError: If the target width differs from the net output width.
    """
    grid = grid_points(net.in_features, points_per_axis, domain)
    worst = 0.0
    for start in range(0, len(grid), chunk_size):
        block = grid[start : start + chunk_size]
        outputs, expected = net.forward(block), np.asarray(target(block))
        _check_widths(outputs, expected)
        residual = np.abs(outputs - expected)
        worst = max(worst, float(residual.max()))
    return worst


# -- Gradients ------------------------------------------------------------------------


def backprop(net: Network, inputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean-squared loss and its gradient over the free parameters.

    Gradients of a tied parameter sum over all its placements.

    Raises:
        DivergenceError: If activations or the loss are not finite.
    """
    net.zero_grad()
    outputs, tape = net.forward_with_tape(inputs)
    _check_widths(outputs, targets)
    if not np.isfinite(outputs).all():
        raise DivergenceError("Non-finite network output", code="non_finite")
    residual = outputs - targets
    loss = float(np.mean(residual**2))
    net.backward(2.0 * residual / residual.size, tape)
    return loss, net.gradient_vector()


def mean_squared_error(net: Network, inputs: np.ndarray, targets: np.ndarray) -> float:
    outputs = net.forward(inputs)
    _check_widths(outputs, targets)
    return float(np.mean((outputs - targets) ** 2))


class SGD:
    """Plain gradient descent."""

    def __init__(self, learning_rate: float) -> None:
        self.learning_rate = learning_rate

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam:
    """Adam with bias correction."""

    def __init__(
        self,
        learning_rate: float,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: List[np.ndarray] = []
        self.v: List[np.ndarray] = []

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        scale = self.learning_rate * np.sqrt(1 - self.beta2**self.t) / (1 - self.beta1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= scale * m / (np.sqrt(v) + self.eps)


def make_optimizer(config: TrainConfig) -> Union[SGD, Adam]:
    if config.optimizer == OptimizerKind.SGD:
        return SGD(config.learning_rate)
    return Adam(config.learning_rate, config.betas, config.eps)


class ReduceLROnPlateau:
    """Multiply the optimizer's learning rate by ``factor`` after ``patience`` stale epochs.

    Args:
        optimizer: Optimizer whose ``learning_rate`` is adjusted.
        factor: Multiplier in ``(0, 1)``.
        patience: Epochs without a new best score before a reduction.
        min_learning_rate: Floor of the learning rate.
    """

    def __init__(
        self,
        optimizer: Union[SGD, Adam],
        factor: float,
        patience: int,
        min_learning_rate: float,
    ) -> None:
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_learning_rate = min_learning_rate
        self.best = np.inf
        self.stale = 0

    def step(self, current: float) -> None:
        if current < self.best:
            self.best = current
            self.stale = 0
            return
        self.stale += 1
        if self.stale >= self.patience:
            lowered = max(self.optimizer.learning_rate * self.factor, self.min_learning_rate)
            if lowered < self.optimizer.learning_rate:
                logger.info("learning rate -> %.3g", lowered)
            self.optimizer.learning_rate = lowered
            self.stale = 0


# -- Training loop ------------------------------------------------------------------------


def _sample_residual(net: Network, sample: np.ndarray) -> Optional[float]:
    if not net.tied or net.group is None:
        return None
    group = net.group
    elements = list(group.elements) if group.order <= 120 else list(group.generators)
    residual, _ = net.equivariance_residual(sample, elements)
    return residual


def write_training_log(records: Sequence[EpochRecord], path: Union[str, Path]) -> None:
    """CSV with one row per epoch."""
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for record in records:
            row = record.model_dump()
            writer.writerow({k: "" if row[k] is None else repr(row[k]) for k in CSV_FIELDS})


def train(
    net: Network,
    dataset: Dataset,
    config: TrainConfig,
    target: Optional[TargetFn] = None,
    domain: Optional[Tuple[float, float]] = None,
) -> TrainingReport:
    """Minibatch training with per-epoch metrics and early stopping.

    Epoch 0 records the initial metrics. With ``target`` the grid sup-error
    drives early stopping, learning-rate reduction and best-epoch selection;
    otherwise the training MSE does. The best parameters are restored at the end.

    Args:
        net: Network to train in place.
        dataset: Training data.
        config: Optimizer and protocol settings.
        target: Ground truth for the grid sup-error.
        domain: Grid domain; defaults to the configured domain.

    Returns:
        The training report; ``diverged`` is set when a non-finite value
        stopped the run.

    Raises:
        ShapeMismatchError: If the dataset does not fit the net's input or output width.
    """
    if dataset.inputs.shape[1] != net.in_features:
        raise ShapeMismatchError(
            f"Dataset has {dataset.inputs.shape[1]} coordinates, net expects {net.in_features}"
        )
    if dataset.targets.shape[1] != net.out_features:
        raise ShapeMismatchError(
            f"Targets have width {dataset.targets.shape[1]}, net outputs {net.out_features}"
        )
    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(config)
    scheduler = (
        ReduceLROnPlateau(optimizer, config.lr_factor, config.lr_patience, config.min_learning_rate)
        if config.lr_patience is not None
        else None
    )
    layers = net.affine_layers()
    params = [layer.params for layer in layers]
    grads = [layer.grad for layer in layers]
    sample = dataset.inputs[: min(8, len(dataset))]

    records: List[EpochRecord] = []

    def evaluate(epoch: int) -> EpochRecord:
        mse = mean_squared_error(net, dataset.inputs, dataset.targets)
        if not np.isfinite(mse):
            raise DivergenceError(f"Training MSE is not finite at epoch {epoch}")
        sup = (
            grid_sup_error(net, target, config.grid_points_per_axis, domain)
            if target is not None
            else None
        )
        record = EpochRecord(
            epoch=epoch,
            train_mse=mse,
            grid_sup_error=sup,
            equivariance_residual=_sample_residual(net, sample),
        )
        records.append(record)
        logger.info("epoch %d: mse=%.6g sup=%s", epoch, mse, sup)
        return record

    def score(record: EpochRecord) -> float:
        return record.grid_sup_error if record.grid_sup_error is not None else record.train_mse

    diverged = stopped_early = reached = out_of_time = False
    best_params = net.parameter_vector().copy()
    best_epoch, best_score, stale = 0, np.inf, 0
    started = time.monotonic()
    try:
        record = evaluate(0)
        best_score = score(record)
        reached = record.grid_sup_error is not None and best_score <= config.target_sup_error
        for epoch in range(1, config.max_epochs + 1):
            if reached:
                break
            if config.time_budget is not None and time.monotonic() - started > config.time_budget:
                out_of_time = True
                logger.info("Time budget spent after epoch %d", epoch - 1)
                break
            order = rng.permutation(len(dataset))
            for start in range(0, len(order), config.batch_size):
                rows = order[start : start + config.batch_size]
                backprop(net, dataset.inputs[rows], dataset.targets[rows])
                optimizer.step(params, grads)
            record = evaluate(epoch)
            current = score(record)
            if scheduler is not None:
                scheduler.step(current)
            if current < best_score:
                best_score, best_epoch, stale = current, epoch, 0
                best_params = net.parameter_vector().copy()
            else:
                stale += 1
            if record.grid_sup_error is not None and current <= config.target_sup_error:
                reached = True
            elif stale >= config.patience:
                stopped_early = True
                break
    except DivergenceError as e:
        diverged = True
        logger.warning("Training diverged: %s", e.message)

    net.set_parameter_vector(best_params)
    final_mse = mean_squared_error(net, dataset.inputs, dataset.targets)
    final_sup = (
        grid_sup_error(net, target, config.grid_points_per_axis, domain)
        if target is not None
        else None
    )
    seen = [r.grid_sup_error for r in records if r.grid_sup_error is not None]
    return TrainingReport(
        seed=config.seed,
        parameter_count=net.parameter_count,
        epochs=records,
        final_train_mse=final_mse,
        final_sup_error=final_sup,
        best_sup_error=min(seen) if seen else None,
        best_epoch=best_epoch,
        stopped_early=stopped_early,
        reached_target=reached,
        out_of_time=out_of_time,
        diverged=diverged,
    )
