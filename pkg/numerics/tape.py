"""
Transflex - Gradient Tape
=========================
Reverse-mode differentiation over numpy float64 arrays.

Every primitive computes its value eagerly and, when the tape is enabled,
records a closure that pushes the output gradient back to its inputs.
Backward replays the records in reverse recording order, so accumulation
order is fixed and results are bit-reproducible.

Shapes follow the row-vector convention: activations are (batch, dim) or
(batch, time, dim) and weights are (in_dim, out_dim).
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from utils.errors import ShapeError

logger = logging.getLogger(__name__)


class Node:
    """A value on the tape with an optional gradient accumulator."""

    __slots__ = ("value", "grad", "requires_grad", "_backward")

    def __init__(self, value: np.ndarray, requires_grad: bool = False):
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward: Optional[Callable[[], None]] = None

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Node(shape={self.value.shape}, requires_grad={self.requires_grad})"


class Tape:
    """
    Records primitives for one forward pass.

    ``Tape(enabled=False)`` evaluates the same primitives without recording,
    which is what decoding and finite-difference evaluations use.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.nodes: List[Node] = []
        self.leaves: Dict[str, Node] = {}

    # ------------------------------------------------------------------
    # Leaves
    # ------------------------------------------------------------------

    def param(self, name: str, value: np.ndarray) -> Node:
        """Leaf for a named parameter; repeated calls return the same node."""
        node = self.leaves.get(name)
        if node is None:
            node = Node(value, requires_grad=self.enabled)
            self.leaves[name] = node
        return node

    def constant(self, value) -> Node:
        return Node(np.asarray(value, dtype=np.float64))

    def _record(self, value: np.ndarray, inputs: Sequence[Node], backward) -> Node:
        out = Node(value)
        if self.enabled and any(n.requires_grad for n in inputs):
            out.requires_grad = True

            def run():
                if out.grad is not None:
                    backward(out.grad)

            out._backward = run
            self.nodes.append(out)
        return out

    # ------------------------------------------------------------------
    # Linear algebra
    # ------------------------------------------------------------------

    def matmul(self, a: Node, w: Node) -> Node:
        """(..., D) @ (D, K) -> (..., K)."""
        if w.value.ndim != 2 or a.value.shape[-1] != w.value.shape[0]:
            raise ShapeError("matmul", a.shape, w.shape)
        value = a.value @ w.value

        def backward(g):
            if a.requires_grad:
                a.accumulate(g @ w.value.T)
            if w.requires_grad:
                d = w.value.shape[0]
                w.accumulate(a.value.reshape(-1, d).T @ g.reshape(-1, g.shape[-1]))

        return self._record(value, (a, w), backward)

    def add(self, a: Node, b: Node) -> Node:
        if a.shape != b.shape:
            raise ShapeError("add", a.shape, b.shape)

        def backward(g):
            a.accumulate(g)
            b.accumulate(g)

        return self._record(a.value + b.value, (a, b), backward)

    def sub(self, a: Node, b: Node) -> Node:
        if a.shape != b.shape:
            raise ShapeError("sub", a.shape, b.shape)

        def backward(g):
            a.accumulate(g)
            b.accumulate(-g)

        return self._record(a.value - b.value, (a, b), backward)

    def mul(self, a: Node, b: Node) -> Node:
        """Elementwise product of equally shaped nodes."""
        if a.shape != b.shape:
            raise ShapeError("mul", a.shape, b.shape)

        def backward(g):
            a.accumulate(g * b.value)
            b.accumulate(g * a.value)

        return self._record(a.value * b.value, (a, b), backward)

    def one_minus(self, a: Node) -> Node:
        def backward(g):
            a.accumulate(-g)

        return self._record(1.0 - a.value, (a,), backward)

    def scale(self, a: Node, factor: float) -> Node:
        def backward(g):
            a.accumulate(g * factor)

        return self._record(a.value * factor, (a,), backward)

    def add_bias(self, a: Node, b: Node) -> Node:
        """(..., K) + (K,)."""
        if b.value.ndim != 1 or a.value.shape[-1] != b.value.shape[0]:
            raise ShapeError("add_bias", a.shape, b.shape)

        def backward(g):
            a.accumulate(g)
            b.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

        return self._record(a.value + b.value, (a, b), backward)

    def expand_add(self, seq: Node, row: Node) -> Node:
        """(B, T, K) + (B, K) broadcast over time."""
        if seq.value.ndim != 3 or row.value.ndim != 2 or seq.shape[::2] != row.shape:
            raise ShapeError("expand_add", seq.shape, row.shape)

        def backward(g):
            seq.accumulate(g)
            row.accumulate(g.sum(axis=1))

        return self._record(seq.value + row.value[:, None, :], (seq, row), backward)

    def sum(self, a: Node) -> Node:
        def backward(g):
            a.accumulate(np.full(a.shape, float(g)))

        return self._record(np.asarray(a.value.sum()), (a,), backward)

    def add_scalars(self, nodes: Sequence[Node]) -> Node:
        """Sum of scalar nodes, left to right."""
        if not nodes:
            raise ShapeError("add_scalars")
        total = np.asarray(0.0)
        for n in nodes:
            if n.value.ndim != 0:
                raise ShapeError("add_scalars", n.shape)
            total = total + n.value

        def backward(g):
            for n in nodes:
                n.accumulate(g)

        return self._record(np.asarray(total), nodes, backward)

    # ------------------------------------------------------------------
    # Nonlinearities
    # ------------------------------------------------------------------

    def tanh(self, a: Node) -> Node:
        value = np.tanh(a.value)

        def backward(g):
            a.accumulate(g * (1.0 - value * value))

        return self._record(value, (a,), backward)

    def sigmoid(self, a: Node) -> Node:
        value = 0.5 * (1.0 + np.tanh(0.5 * a.value))

        def backward(g):
            a.accumulate(g * value * (1.0 - value))

        return self._record(value, (a,), backward)

    # ------------------------------------------------------------------
    # Structure
    # ------------------------------------------------------------------

    def concat(self, nodes: Sequence[Node]) -> Node:
        """Concatenate along the last axis."""
        lead = nodes[0].shape[:-1]
        if any(n.shape[:-1] != lead for n in nodes):
            raise ShapeError("concat", *(n.shape for n in nodes))
        widths = [n.shape[-1] for n in nodes]
        value = np.concatenate([n.value for n in nodes], axis=-1)

        def backward(g):
            start = 0
            for n, width in zip(nodes, widths):
                n.accumulate(g[..., start:start + width])
                start += width

        return self._record(value, nodes, backward)

    def slice_cols(self, a: Node, start: int, stop: int) -> Node:
        if not 0 <= start < stop <= a.shape[-1]:
            raise ShapeError(f"slice_cols[{start}:{stop}]", a.shape)

        def backward(g):
            full = np.zeros(a.shape)
            full[..., start:stop] = g
            a.accumulate(full)

        return self._record(a.value[..., start:stop], (a,), backward)

    def stack_time(self, nodes: Sequence[Node]) -> Node:
        """Stack T nodes of shape (B, K) into (B, T, K)."""
        first = nodes[0].shape
        if any(n.shape != first or len(first) != 2 for n in nodes):
            raise ShapeError("stack_time", *(n.shape for n in nodes))

        def backward(g):
            for t, n in enumerate(nodes):
                n.accumulate(g[:, t, :])

        return self._record(np.stack([n.value for n in nodes], axis=1), nodes, backward)

    def reshape(self, a: Node, shape) -> Node:
        try:
            value = a.value.reshape(shape)
        except ValueError:
            raise ShapeError("reshape", a.shape, shape) from None

        def backward(g):
            a.accumulate(g.reshape(a.shape))

        return self._record(value, (a,), backward)

    def gather_rows(self, table: Node, ids: np.ndarray) -> Node:
        """Embedding lookup: rows of a (V, D) table indexed by an integer array."""
        ids = np.asarray(ids, dtype=np.int64)
        if table.value.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= table.shape[0])):
            raise ShapeError("gather_rows", table.shape, ids.shape)

        def backward(g):
            if table.requires_grad:
                full = np.zeros(table.shape)
                np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
                table.accumulate(full)

        return self._record(table.value[ids], (table,), backward)

    def blend(self, new: Node, old: Node, mask: np.ndarray) -> Node:
        """Rowwise select: ``new`` where mask is true, ``old`` elsewhere (mask shape (B,))."""
        if new.shape != old.shape or mask.shape != new.shape[:1]:
            raise ShapeError("blend", new.shape, old.shape, mask.shape)
        m = mask.astype(np.float64)[:, None]

        def backward(g):
            new.accumulate(g * m)
            old.accumulate(g * (1.0 - m))

        return self._record(m * new.value + (1.0 - m) * old.value, (new, old), backward)

    # ------------------------------------------------------------------
    # Attention and output
    # ------------------------------------------------------------------

    def masked_softmax(self, scores: Node, mask: np.ndarray) -> Node:
        """Softmax over the last axis restricted to positions where mask is true."""
        if mask.shape != scores.shape:
            raise ShapeError("masked_softmax", scores.shape, mask.shape)
        if not mask.any(axis=-1).all():
            raise ValueError("masked_softmax: cannot attend to a row with every position masked")
        value = _masked_softmax(scores.value, mask)

        def backward(g):
            inner = (g * value).sum(axis=-1, keepdims=True)
            scores.accumulate(value * (g - inner))

        return self._record(value, (scores,), backward)

    def weighted_sum(self, weights: Node, seq: Node) -> Node:
        """(B, T) weights applied to (B, T, D) rows -> (B, D)."""
        if weights.value.ndim != 2 or seq.value.ndim != 3 or seq.shape[:2] != weights.shape:
            raise ShapeError("weighted_sum", weights.shape, seq.shape)
        value = np.einsum("bt,btd->bd", weights.value, seq.value)

        def backward(g):
            weights.accumulate(np.einsum("bd,btd->bt", g, seq.value))
            seq.accumulate(weights.value[:, :, None] * g[:, None, :])

        return self._record(value, (weights, seq), backward)

    def softmax_nll(self, logits: Node, targets: np.ndarray, support: np.ndarray, weights: np.ndarray) -> Node:
        """
        Weighted negative log-likelihood of ``targets`` under a softmax over
        the ``support`` columns of (B, V) logits. Returns a scalar node.
        """
        if logits.value.ndim != 2 or targets.shape != logits.shape[:1] or support.shape != logits.shape[1:]:
            raise ShapeError("softmax_nll", logits.shape, targets.shape, support.shape)
        if weights.shape != targets.shape:
            raise ShapeError("softmax_nll", weights.shape, targets.shape)
        if not support[targets[weights != 0]].all():
            raise ValueError("softmax_nll: target symbol outside the output support")

        mask = np.broadcast_to(support, logits.shape)
        log_probs = masked_log_softmax(logits.value, mask)
        rows = np.arange(len(targets))
        picked = np.where(weights != 0, log_probs[rows, np.where(weights != 0, targets, 0)], 0.0)
        value = np.asarray(-(weights * picked).sum())

        def backward(g):
            probs = np.where(mask, np.exp(log_probs), 0.0)
            probs[rows, targets] -= (weights != 0)
            logits.accumulate(float(g) * weights[:, None] * probs)

        return self._record(value, (logits,), backward)

    # ------------------------------------------------------------------
    # Backward
    # ------------------------------------------------------------------

    def backward(self, loss: Node) -> None:
        """Propagate d(loss)/d(node) to every recorded node and leaf."""
        if loss.value.ndim != 0:
            raise ShapeError("backward (loss must be scalar)", loss.shape)
        if not self.enabled:
            raise RuntimeError("backward on a disabled tape")
        if not loss.requires_grad:
            return
        loss.grad = np.asarray(1.0)
        for node in reversed(self.nodes):
            if node._backward is not None:
                node._backward()
        logger.debug(f"Backward over {len(self.nodes)} recorded nodes")


def _masked_softmax(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    shifted = np.where(mask, x, -np.inf)
    top = shifted.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted - top), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def masked_log_softmax(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-softmax over positions where mask is true; -inf elsewhere."""
    shifted = np.where(mask, x, -np.inf)
    top = shifted.max(axis=-1, keepdims=True)
    z = shifted - top
    lse = np.log(np.where(mask, np.exp(z), 0.0).sum(axis=-1, keepdims=True))
    return np.where(mask, z - lse, -np.inf)


def masked_softmax(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Plain-array masked softmax (masked entries exactly 0)."""
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise ValueError("masked_softmax: every position masked")
    return _masked_softmax(x, mask)
