"""Differentiable building blocks for tied networks.

Blocks work on batches of shape ``(batch, features)``. ``forward`` is pure
unless a tape list is passed; with a tape, each block pushes what its
``backward`` needs and ``backward`` pops it again, so composite blocks must
run their children's ``backward`` in reverse order. Parameter gradients
accumulate into :attr:`TiedAffine.grad` until :meth:`Block.zero_grad`.
"""

from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..equi_linear import SharingPattern, TiedLinearLayer, realize
from ..exceptions import ShapeMismatchError

Tape = List[Any]


class Block:
    """Base class for all blocks."""

    in_features: int = 0
    out_features: int = 0

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        raise NotImplementedError

    def children(self) -> Sequence["Block"]:
        return ()

    def hidden_widths(self) -> List[int]:
        """Widths of the hidden (post-ReLU) layers along this block."""
        return []

    def affine_layers(self) -> Iterator["TiedAffine"]:
        for child in self.children():
            yield from child.affine_layers()

    def zero_grad(self) -> None:
        for layer in self.affine_layers():
            layer.grad[:] = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)


class TiedAffine(Block):
    """``x ↦ W x + b`` with ``(W, b)`` realized from a sharing pattern."""

    def __init__(self, pattern: SharingPattern, params: Optional[np.ndarray] = None) -> None:
        self.layer = TiedLinearLayer(pattern, params)
        self.grad = np.zeros(pattern.free_param_count)
        self.in_features = pattern.in_size
        self.out_features = pattern.out_size

    @property
    def pattern(self) -> SharingPattern:
        return self.layer.pattern

    @property
    def params(self) -> np.ndarray:
        return self.layer.params

    def realize(self) -> Tuple[np.ndarray, np.ndarray]:
        return realize(self.layer.pattern, self.layer.params)

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        weight, bias = self.realize()
        if tape is not None:
            tape.append((x, weight))
        return x @ weight.T + bias

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        x, weight = tape.pop()
        self.grad += self.pattern.reduce_gradient(grad.T @ x, grad.sum(axis=0))
        return grad @ weight

    def affine_layers(self) -> Iterator["TiedAffine"]:
        yield self


class ReLU(Block):
    """Elementwise ``max(x, 0)``; the subgradient at 0 is 0."""

    def __init__(self, features: int) -> None:
        self.in_features = self.out_features = features

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        if tape is not None:
            tape.append(x > 0)
        return np.maximum(x, 0.0)

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        return grad * tape.pop()

    def hidden_widths(self) -> List[int]:
        return [self.in_features]


class Identity(Block):
    def __init__(self, features: int) -> None:
        self.in_features = self.out_features = features

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        return x

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        return grad


class Sequential(Block):
    """Composition, first block applied first."""

    def __init__(self, blocks: Sequence[Block]) -> None:
        if not blocks:
            raise ShapeMismatchError("Sequential needs at least one block")
        for a, b in zip(blocks, blocks[1:]):
            if a.out_features != b.in_features:
                raise ShapeMismatchError(
                    f"Cannot chain {type(a).__name__} ({a.out_features} out) "
                    f"into {type(b).__name__} ({b.in_features} in)"
                )
        self.blocks = list(blocks)
        self.in_features = blocks[0].in_features
        self.out_features = blocks[-1].out_features

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        for block in self.blocks:
            x = block.forward(x, tape)
        return x

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        for block in reversed(self.blocks):
            grad = block.backward(grad, tape)
        return grad

    def children(self) -> Sequence[Block]:
        return self.blocks

    def hidden_widths(self) -> List[int]:
        return [w for block in self.blocks for w in block.hidden_widths()]


class Gather(Block):
    """Output coordinate ``k`` is input coordinate ``index[k]``."""

    def __init__(self, index: Sequence[int], in_features: int) -> None:
        self.index = np.asarray(index, dtype=np.int64)
        if self.index.size and (self.index.min() < 0 or self.index.max() >= in_features):
            raise ShapeMismatchError("Gather index out of range")
        self.in_features = in_features
        self.out_features = int(self.index.size)

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        return x[:, self.index]

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        out = np.zeros((grad.shape[0], self.in_features))
        np.add.at(out, (slice(None), self.index), grad)
        return out


class LaneMap(Block):
    """One shared block applied to each of ``lanes`` consecutive input slices."""

    def __init__(self, inner: Block, lanes: int) -> None:
        self.inner = inner
        self.lanes = lanes
        self.in_features = inner.in_features * lanes
        self.out_features = inner.out_features * lanes

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        batch = x.shape[0]
        y = self.inner.forward(x.reshape(batch * self.lanes, self.inner.in_features), tape)
        return y.reshape(batch, self.out_features)

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        batch = grad.shape[0]
        g = self.inner.backward(grad.reshape(batch * self.lanes, self.inner.out_features), tape)
        return g.reshape(batch, self.in_features)

    def children(self) -> Sequence[Block]:
        return (self.inner,)

    def hidden_widths(self) -> List[int]:
        return [w * self.lanes for w in self.inner.hidden_widths()]


class SumLanes(Block):
    """Sum ``lanes`` consecutive slices of length ``width`` (times ``scale``)."""

    def __init__(self, lanes: int, width: int, scale: float = 1.0) -> None:
        self.lanes = lanes
        self.width = width
        self.scale = scale
        self.in_features = lanes * width
        self.out_features = width

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        total = x.reshape(x.shape[0], self.lanes, self.width).sum(axis=1)
        return total * self.scale if self.scale != 1.0 else total

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        g = grad * self.scale if self.scale != 1.0 else grad
        return np.tile(g, (1, self.lanes))


class Branch(Block):
    """Parallel blocks on input slices ``[start, stop)``; outputs are concatenated.

    Slices may overlap; their input gradients add up.
    """

    def __init__(self, parts: Sequence[Tuple[int, int, Block]], in_features: int) -> None:
        for start, stop, block in parts:
            if not 0 <= start <= stop <= in_features or stop - start != block.in_features:
                raise ShapeMismatchError(
                    f"Slice [{start}, {stop}) does not fit a block with {block.in_features} inputs"
                )
        self.parts = list(parts)
        self.in_features = in_features
        self.out_features = sum(block.out_features for _, _, block in parts)

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        outputs = [block.forward(x[:, start:stop], tape) for start, stop, block in self.parts]
        return np.concatenate(outputs, axis=1)

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        out = np.zeros((grad.shape[0], self.in_features))
        offsets = np.cumsum([0] + [block.out_features for _, _, block in self.parts])
        for k in reversed(range(len(self.parts))):
            start, stop, block = self.parts[k]
            out[:, start:stop] += block.backward(grad[:, offsets[k] : offsets[k + 1]], tape)
        return out

    def children(self) -> Sequence[Block]:
        return [block for _, _, block in self.parts]

    def hidden_widths(self) -> List[int]:
        # a branch that is shallower than its siblings carries its output forward
        columns = [block.hidden_widths() for _, _, block in self.parts]
        fills = [block.out_features for _, _, block in self.parts]
        depth = max((len(c) for c in columns), default=0)
        padded = [c + [fill] * (depth - len(c)) for c, fill in zip(columns, fills)]
        return [sum(level) for level in zip(*padded)]


class PowerEncoder(Block):
    """Fixed monomial map ``x ↦ (1, x, x², …, xⁿ)`` on one input coordinate."""

    def __init__(self, degree: int) -> None:
        self.degree = degree
        self.in_features = 1
        self.out_features = degree + 1
        self.exponents = np.arange(degree + 1)

    def forward(self, x: np.ndarray, tape: Optional[Tape] = None) -> np.ndarray:
        if tape is not None:
            tape.append(x)
        return x**self.exponents

    def backward(self, grad: np.ndarray, tape: Tape) -> np.ndarray:
        x = tape.pop()
        slopes = self.exponents[1:] * x ** self.exponents[:-1]
        return (grad[:, 1:] * slopes).sum(axis=1, keepdims=True)
