"""Network container, naive evaluator and checkpoints."""

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..__version__ import __version__
from ..actions import GroupAction, apply, natural_action
from ..enums import ArchitectureMode, NetKind
from ..exceptions import ShapeMismatchError, SpecParseError
from ..models import CheckpointHeader
from ..perm_group import CosetSystem, Permutation, PermutationGroup, symmetric_group
from ..utils import content_hash, stable_json_dumps
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
    Tape,
    TiedAffine,
)

if TYPE_CHECKING:
    from ..models import NetworkSpec

logger = logging.getLogger(__name__)


class Network:
    """A built architecture: block tree, symmetry metadata and parameters.

    ``in_action``/``out_action`` describe the symmetry the net is built to
    respect; an invariant net has no ``out_action``. The symmetric group of a
    sum net is created on first use.
    """

    def __init__(
        self,
        root: Block,
        kind: NetKind,
        degree: int,
        mode: ArchitectureMode = ArchitectureMode.WIDE,
        group: Optional[PermutationGroup] = None,
        in_action: Optional[GroupAction] = None,
        out_action: Optional[GroupAction] = None,
        cosets: Optional[CosetSystem] = None,
        tied: bool = True,
        name: Optional[str] = None,
    ) -> None:
        self.root = root
        self.kind = kind
        self.degree = degree
        self.mode = mode
        self._group = group
        self._in_action = in_action
        self.out_action = out_action
        self.cosets = cosets
        self.tied = tied
        self.name = name or kind.value
        self.spec: Optional["NetworkSpec"] = None

    def __repr__(self) -> str:
        return (
            f"<Network {self.name} {self.in_features}->{self.out_features} "
            f"params={self.parameter_count}>"
        )

    @property
    def in_features(self) -> int:
        return self.root.in_features

    @property
    def out_features(self) -> int:
        return self.root.out_features

    @property
    def group(self) -> Optional[PermutationGroup]:
        if self._group is None and self.tied and self.kind == NetKind.INVARIANT_SUM:
            self._group = symmetric_group(self.degree)
        return self._group

    @property
    def in_action(self) -> Optional[GroupAction]:
        if self._in_action is None and self.group is not None:
            self._in_action = natural_action(self.group)
        return self._in_action

    # -- evaluation -----------------------------------------------------------

    def _as_batch(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.in_features:
            raise ShapeMismatchError(
                f"Expected inputs with {self.in_features} coordinates, got shape {x.shape}",
                code="input_shape",
            )
        return batch, single

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on one vector ``(n,)`` or a batch ``(B, n)``.

        Raises:
            ShapeMismatchError: If the last axis does not match the input width.
        """
        batch, single = self._as_batch(x)
        y = self.root.forward(batch)
        return y[0] if single else y

    __call__ = forward

    def forward_with_tape(self, x: np.ndarray) -> Tuple[np.ndarray, Tape]:
        batch, _ = self._as_batch(x)
        tape: Tape = []
        return self.root.forward(batch, tape), tape

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        """Accumulate parameter gradients; returns the input gradient."""
        return self.root.backward(grad, tape)

    # -- parameters -----------------------------------------------------------

    def affine_layers(self) -> List[TiedAffine]:
        seen = set()
        layers = []
        for layer in self.root.affine_layers():
            if id(layer) not in seen:
                seen.add(id(layer))
                layers.append(layer)
        return layers

    @property
    def parameter_count(self) -> int:
        return sum(layer.pattern.free_param_count for layer in self.affine_layers())

    @property
    def weight_count(self) -> int:
        return sum(layer.pattern.weight_count for layer in self.affine_layers())

    def parameter_vector(self) -> np.ndarray:
        layers = self.affine_layers()
        if not layers:
            return np.zeros(0)
        return np.concatenate([layer.params for layer in layers])

    def set_parameter_vector(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.parameter_count,):
            raise ShapeMismatchError(
                f"Expected {self.parameter_count} parameters, got shape {values.shape}"
            )
        offset = 0
        for layer in self.affine_layers():
            size = layer.params.size
            layer.params[:] = values[offset : offset + size]
            offset += size

    def gradient_vector(self) -> np.ndarray:
        layers = self.affine_layers()
        if not layers:
            return np.zeros(0)
        return np.concatenate([layer.grad for layer in layers])

    def zero_grad(self) -> None:
        self.root.zero_grad()

    # -- structure ------------------------------------------------------------

    def hidden_widths(self) -> List[int]:
        return self.root.hidden_widths()

    @property
    def width(self) -> int:
        """Largest hidden width, or the input width for a net without hidden layers."""
        return max(self.hidden_widths(), default=self.in_features)

    @property
    def depth(self) -> int:
        """Number of affine stages: hidden layers plus the output stage."""
        return len(self.hidden_widths()) + 1

    def sharing_hash(self) -> str:
        patterns = [
            layer.pattern.to_export().model_dump(by_alias=True) for layer in self.affine_layers()
        ]
        return content_hash({"kind": self.kind.value, "patterns": patterns})

    # -- symmetry -------------------------------------------------------------

    def equivariance_residual(
        self,
        x: np.ndarray,
        elements: Optional[List[Permutation]] = None,
    ) -> Tuple[float, Optional[Dict[str, Any]]]:
        """Largest ``|N(σ·x) − σ·N(x)|`` (or ``|N(σ·x) − N(x)|`` when invariant).

        Returns:
            ``(max residual, witness)`` where the witness names the worst
            element and input row.
        """
        if self.group is None or self.in_action is None:
            raise ShapeMismatchError(f"{self!r} carries no symmetry to check")
        batch, _ = self._as_batch(x)
        base = self.forward(batch)
        worst, witness = 0.0, None
        for sigma in elements if elements is not None else self.group.elements:
            moved = self.forward(apply(self.in_action, sigma, batch))
            expected = apply(self.out_action, sigma, base) if self.out_action else base
            diff = np.abs(moved - expected).max(axis=1)
            row = int(np.argmax(diff))
            if diff[row] > worst:
                worst = float(diff[row])
                witness = {"sigma": list(sigma.images), "x": batch[row].tolist()}
        return worst, witness

    # -- checkpoints ----------------------------------------------------------

    def checkpoint_header(self) -> CheckpointHeader:
        return CheckpointHeader(
            kind=self.name,
            parameter_count=self.parameter_count,
            sharing_hash=self.sharing_hash(),
            version=__version__,
        )

    def save_checkpoint(self, path: Union[str, Path]) -> None:
        """Write the header and the flat parameter vector as JSON."""
        payload = {
            "header": self.checkpoint_header().model_dump(mode="json"),
            "params": self.parameter_vector().tolist(),
        }
        Path(path).write_text(stable_json_dumps(payload))

    def load_checkpoint(self, path: Union[str, Path]) -> None:
        """Restore parameters saved by :meth:`save_checkpoint`.

        Raises:
            SpecParseError: If the file is malformed or was written for a net
                with a different sharing pattern.
        """
        try:
            payload = json.loads(Path(path).read_text())
            header = CheckpointHeader.model_validate(payload["header"])
            params = np.asarray(payload["params"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as e:
            raise SpecParseError(f"Invalid checkpoint {path}: {e}", code="checkpoint") from e
        if header.sharing_hash != self.sharing_hash():
            raise SpecParseError(
                f"Checkpoint {path} has sharing hash {header.sharing_hash}, "
                f"expected {self.sharing_hash()}",
                code="checkpoint_hash",
            )
        self.set_parameter_vector(params)


def _naive_block(block: Block, x: List[float]) -> List[float]:
    if isinstance(block, TiedAffine):
        weight, bias = block.realize()
        out = []
        for i in range(block.out_features):
            total = float(bias[i])
            for j in range(block.in_features):
                total += float(weight[i, j]) * x[j]
            out.append(total)
        return out
    if isinstance(block, ReLU):
        return [v if v > 0 else 0.0 for v in x]
    if isinstance(block, Identity):
        return list(x)
    if isinstance(block, Sequential):
        for child in block.blocks:
            x = _naive_block(child, x)
        return x
    if isinstance(block, Gather):
        return [x[int(k)] for k in block.index]
    if isinstance(block, LaneMap):
        size = block.inner.in_features
        out = []
        for lane in range(block.lanes):
            out.extend(_naive_block(block.inner, x[lane * size : (lane + 1) * size]))
        return out
    if isinstance(block, SumLanes):
        out = [0.0] * block.width
        for lane in range(block.lanes):
            for k in range(block.width):
                out[k] += x[lane * block.width + k]
        return [v * block.scale for v in out]
    if isinstance(block, Branch):
        out = []
        for start, stop, child in block.parts:
            out.extend(_naive_block(child, x[start:stop]))
        return out
    if isinstance(block, PowerEncoder):
        return [x[0] ** k for k in range(block.degree + 1)]
    raise TypeError(f"No naive evaluation for {type(block).__name__}")


def naive_forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Scalar-loop evaluation of ``net`` on one vector; an oracle for :meth:`Network.forward`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.in_features,):
        raise ShapeMismatchError(f"Expected a vector of length {net.in_features}")
    return np.array(_naive_block(net.root, [float(v) for v in x]))
