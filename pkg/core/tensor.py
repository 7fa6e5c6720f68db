"""
Tensor with a recorded computation graph and reverse-mode gradients.

Every op that produces a Tensor from Tensors that require gradients records
its parents and a closure mapping the output gradient to one gradient per
parent. backward() walks that graph in reverse topological order.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from models.error_models import ContractError

ArrayLike = Union[np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_mode = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad():
    """Ops inside the block record no graph, even on parameters; per thread"""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[np.dtype] = None,
        _parents: Tuple["Tensor", ...] = (),
        _backward: Optional[BackwardFn] = None,
    ):
        if dtype is None:
            dtype = data.dtype if isinstance(data, (np.ndarray, np.generic)) else np.float32
        self.data: np.ndarray = np.asarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Tuple["Tensor", ...], backward: BackwardFn) -> Tensor:
        """Wrap an op result, recording the graph only when a parent needs gradients"""
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            return cls(data, requires_grad=True, _parents=parents, _backward=backward)
        return cls(data)

    # *** elementwise arithmetic ***

    def _lift(self, other: ArrayLike) -> Tensor:
        return other if isinstance(other, Tensor) else Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other: ArrayLike) -> Tensor:
        other = self._lift(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.from_op(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __neg__(self) -> Tensor:
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other: ArrayLike) -> Tensor:
        return self + (-self._lift(other))

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return self._lift(other) + (-self)

    def __mul__(self, other: ArrayLike) -> Tensor:
        other = self._lift(other)
        a, b = self.data, other.data
        return Tensor.from_op(
            a * b,
            (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> Tensor:
        if isinstance(scalar, Tensor):
            raise ContractError("division is only defined by a constant scalar")
        return self * (1.0 / scalar)

    def exp(self) -> Tensor:
        out = np.exp(self.data)
        return Tensor.from_op(out, (self,), lambda g: (g * out,))

    def square(self) -> Tensor:
        a = self.data
        return Tensor.from_op(a * a, (self,), lambda g: (2.0 * a * g,))

    def sum(self) -> Tensor:
        shape = self.shape
        return Tensor.from_op(
            np.asarray(self.data.sum(), dtype=self.dtype),
            (self,),
            lambda g: (np.broadcast_to(g, shape).astype(g.dtype, copy=True),),
        )

    def mean(self) -> Tensor:
        return self.sum() / self.size

    # *** backward pass ***

    def _toposort(self) -> list:
        order, visited = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """
        Populate .grad on every leaf reachable from this scalar.

        Leaf gradients are overwritten, not accumulated across calls, so two
        identical forward/backward passes leave identical gradients behind.
        """
        if self.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("loss does not depend on any tensor that requires gradients")

        order = self._toposort()
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            if not node._parents:
                node.grad = grads.get(id(node), np.zeros_like(node.data))
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ContractError(f"gradient shape {pg.shape} != tensor shape {parent.shape}")
                if parent._parents:
                    prev = grads.get(id(parent))
                    grads[id(parent)] = pg if prev is None else prev + pg
                else:
                    parent.grad = parent.grad + pg
        return None


def backward(loss_scalar: Tensor) -> None:
    loss_scalar.backward()


@dataclass
class Parameter:
    """A trainable tensor together with its Adam moment buffers"""
    name: str
    value: Tensor
    adam_m: Tensor = field(default=None)
    adam_v: Tensor = field(default=None)
    step_count: int = 0

    def __post_init__(self):
        self.value.requires_grad = True
        if self.adam_m is None:
            self.adam_m = Tensor(np.zeros_like(self.value.data))
        if self.adam_v is None:
            self.adam_v = Tensor(np.zeros_like(self.value.data))
        if self.adam_m.shape != self.value.shape or self.adam_v.shape != self.value.shape:
            raise ContractError(f"Adam buffers of {self.name} do not match its shape {self.value.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self) -> Optional[np.ndarray]:
        return self.value.grad

    def zero_grad(self) -> None:
        self.value.grad = None
