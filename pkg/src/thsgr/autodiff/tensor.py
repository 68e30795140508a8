"""
Dense tensor value type and the define-by-run tape used for reverse-mode
differentiation.

A `Tape` is entered as a context manager; every primitive applied while it is
active appends a `Node` holding the ids of its inputs and output, the
vector-Jacobian product closure (which keeps the forward values it needs) and
the FLOPs the primitive performed. `Tape.backward` walks the nodes in exact
reverse recording order. The active tape lives in a `ContextVar`, so tapes are
confined to the thread (or context) that opened them.
"""

import itertools
import numpy as onp
from contextlib import nullcontext
from contextvars import ContextVar
from dataclasses import dataclass, field

from thsgr.utils.errors import NonFiniteError, UsageError
from thsgr.utils.typing import PRECISION, Array, Shape

from typing import Any, Callable, Dict, Iterable, List, Sequence, Tuple

Vjp = Callable[[Array], Sequence[Array | None]]

_ids = itertools.count()
_active_tape: ContextVar['Tape | None'] = ContextVar('thsgr_active_tape', default=None)


class Tensor:
    """
    Row-major dense array with optional gradient. Values are treated as immutable
    after construction; only optimizers and the gradient checker write to `.data`
    of leaf parameters.
    """

    __array_priority__ = 100  # numpy defers binary operators to Tensor

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
        dtype: str | None = None,
    ) -> None:
        array = onp.asarray(data, dtype=dtype or PRECISION.autodiff)
        if not onp.all(onp.isfinite(array)):
            raise NonFiniteError('tensor construction', name, array.shape)
        self.data: Array = array
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.name = name
        self.id = next(_ids)
        self._node: Node | None = None

    def __repr__(self) -> str:
        name = f' {self.name}' if self.name else ''
        return f'Tensor{name}(shape={self.shape}, requires_grad={self.requires_grad})'

    @property
    def shape(self) -> Shape:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self._node is None or self._node.tape is None:
            raise UsageError('backward() needs a tensor produced under an active Tape')
        self._node.tape.backward(self)

    # operator sugar, the primitives live in ops.py
    def __add__(self, other):
        return ops.add(self, other)

    def __radd__(self, other):
        return ops.add(other, self)

    def __sub__(self, other):
        return ops.sub(self, other)

    def __rsub__(self, other):
        return ops.sub(other, self)

    def __mul__(self, other):
        return ops.mul(self, other)

    def __rmul__(self, other):
        return ops.mul(other, self)

    def __truediv__(self, other):
        return ops.div(self, other)

    def __neg__(self):
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def __getitem__(self, index):
        return ops.getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    @property
    def T(self):
        return ops.transpose(self, None)

    def sum(self, axis=None, keepdims: bool = False):
        return ops.sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return ops.mean(self, axis, keepdims)


@dataclass
class Node:
    op: str
    input_ids: Tuple[int, ...]
    output_id: int
    inputs: Tuple[Tensor, ...]
    vjp: Vjp
    flops: int
    tag: str | None
    tape: 'Tape | None' = field(default=None, repr=False)


class Tape:
    """
    Ordered record of primitive applications. With `record_all=True` constant
    computations are recorded too, which is what the FLOPs counter needs.
    """

    def __init__(self, record_all: bool = False) -> None:
        self.nodes: List[Node] = []
        self.record_all = record_all
        self._tokens = []
        self._tags: List[str] = []

    def __enter__(self) -> 'Tape':
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._tokens.pop())

    def scope(self, tag: str) -> 'TagScope':
        """
        Labels every node recorded inside the `with` block, e.g. 'attention'.
        """
        return TagScope(self, tag)

    @property
    def current_tag(self) -> str | None:
        return self._tags[-1] if self._tags else None

    def record(self, node: Node) -> None:
        assert all(i < node.output_id for i in node.input_ids), 'tape order violated'
        node.tape = self
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        if loss.size != 1:
            raise UsageError(f'backward() needs a scalar loss, got shape {loss.shape}')
        grads: Dict[int, Array] = {loss.id: onp.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(node.output_id, None)
            if g is None:
                continue
            for inp, g_in in zip(node.inputs, node.vjp(g)):
                if g_in is None or not inp.requires_grad:
                    continue
                assert g_in.shape == inp.shape, f'{node.op}: gradient shape mismatch'
                if inp.is_leaf:
                    inp.grad = g_in.copy() if inp.grad is None else inp.grad + g_in
                elif inp.id in grads:
                    grads[inp.id] = grads[inp.id] + g_in
                else:
                    grads[inp.id] = g_in
        if loss.is_leaf and loss.requires_grad:
            loss.grad = onp.ones_like(loss.data)

    @property
    def flops(self) -> int:
        return sum(node.flops for node in self.nodes)

    def flops_by(self, key: str = 'tag') -> Dict[str | None, int]:
        out: Dict[str | None, int] = {}
        for node in self.nodes:
            k = node.tag if key == 'tag' else node.op
            out[k] = out.get(k, 0) + node.flops
        return out


class TagScope:
    def __init__(self, tape: Tape, tag: str) -> None:
        self.tape = tape
        self.tag = tag

    def __enter__(self) -> None:
        self.tape._tags.append(self.tag)

    def __exit__(self, *exc) -> None:
        self.tape._tags.pop()


def active_tape() -> Tape | None:
    return _active_tape.get()


def tagged(tag: str):
    """
    Tag scope on the active tape, a no-op without one.
    """
    tape = _active_tape.get()
    return tape.scope(tag) if tape is not None else nullcontext()


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def apply(
    op: str,
    out_data: Array,
    inputs: Iterable[Tensor],
    vjp: Vjp,
    flops: int,
) -> Tensor:
    """
    Wraps the result of a primitive into a Tensor and records it on the active tape.
    """
    inputs = tuple(inputs)
    if not onp.all(onp.isfinite(out_data)):
        names = [t.name for t in inputs if t.name is not None]
        raise NonFiniteError(op, ', '.join(names) or None, out_data.shape)
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = requires_grad
    out.grad = None
    out.name = None
    out.id = next(_ids)
    out._node = None
    tape = _active_tape.get()
    if tape is not None and (requires_grad or tape.record_all):
        node = Node(
            op,
            tuple(t.id for t in inputs),
            out.id,
            inputs,
            vjp,
            int(flops),
            tape.current_tag,
        )
        tape.record(node)
        out._node = node
    return out


from thsgr.autodiff import ops  # noqa: E402
