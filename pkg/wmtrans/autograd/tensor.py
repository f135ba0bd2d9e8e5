"""
反向模式自动微分引擎

每个算子返回新的 Tensor，并在开启梯度记录时保存父节点与反向函数。
reverse_pass 按拓扑逆序调用反向函数，结束后释放计算图。
反向函数只返回各父节点的梯度，由 reverse_pass 负责累加。
"""

import logging
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError, DimensionError, NumericError

logger = logging.getLogger(__name__)

MASK_FILL = -1e9

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, 'enabled', True)


@contextmanager
def no_grad():
    """当前线程内不记录计算图"""
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class Tensor:
    __slots__ = ('data', 'grad', 'requires_grad', 'name', '_parents', '_backward')

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        if dtype is None:
            is_float = isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64)
            dtype = data.dtype if is_float else np.float64
        self.data = np.array(data, dtype=dtype)
        if not np.all(np.isfinite(self.data)):
            raise NumericError(f"non-finite values in tensor {name or ''}".strip())
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = ()
        self._backward = None

    def __repr__(self):
        label = f" name={self.name}" if self.name else ''
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.reshape(-1)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


TensorLike = Union[Tensor, np.ndarray, float, int]


def as_tensor(value: TensorLike, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    """创建算子输出节点，backward(g) 返回与 parents 对齐的梯度元组"""
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced ({data.shape})")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    track = is_grad_enabled() and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._parents = tuple(parents) if track else ()
    out._backward = backward if track else None
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _pair(a: TensorLike, b: TensorLike) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, as_tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return as_tensor(np.asarray(a, dtype=b.dtype)), b
    return as_tensor(a), as_tensor(b)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _pair(a, b)
    try:
        out = a.data + b.data
    except ValueError:
        raise DimensionError(f"cannot add shapes {a.shape} and {b.shape}")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return make_node(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return make_node(-a.data, (a,), lambda g: (-g,))


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _pair(a, b)
    return add(a, neg(b))


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _pair(a, b)
    try:
        out = a.data * b.data
    except ValueError:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return make_node(out, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """二维矩阵乘，或批维一致的三维批量矩阵乘"""
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise DimensionError(f"matmul needs two 2-D or two 3-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        return (np.matmul(g, np.swapaxes(b.data, -1, -2)),
                np.matmul(np.swapaxes(a.data, -1, -2), g))
    return make_node(out, (a, b), backward)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_node(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError(f"cannot reshape {original} into {tuple(shape)}")
    return make_node(out, (a,), lambda g: (g.reshape(original),))


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return make_node(out, (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0
    return make_node(np.where(positive, a.data, 0.0).astype(a.dtype), (a,),
                     lambda g: (g * positive,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """数值稳定的 softmax，先减去最大值"""
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return make_node(out, (x,), backward)


def masked_fill(x: Tensor, allowed: np.ndarray, value: float = MASK_FILL) -> Tensor:
    """allowed 为 False 的位置填入常数，梯度为零"""
    allowed = np.asarray(allowed, dtype=bool)
    try:
        out = np.where(allowed, x.data, value).astype(x.dtype)
    except ValueError:
        raise ContractError(f"mask shape {allowed.shape} does not fit {x.shape}")
    if out.shape != x.shape:
        raise ContractError(f"mask shape {allowed.shape} does not fit {x.shape}")
    return make_node(out, (x,), lambda g: (np.where(allowed, g, 0.0),))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DimensionError("layer_norm needs a non-empty last axis")
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError(f"gamma/beta must have shape ({width},), got {gamma.shape} and {beta.shape}")
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g):
        dxhat = g * gamma.data
        gx = inv_std / width * (width * dxhat
                                - dxhat.sum(axis=-1, keepdims=True)
                                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        ggamma = (g * xhat).reshape(-1, width).sum(axis=0)
        gbeta = g.reshape(-1, width).sum(axis=0)
        return gx, ggamma, gbeta
    return make_node(out, (x, gamma, beta), backward)


def embedding(table: Tensor, ids) -> Tensor:
    """按 id 取表中的行"""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(f"embedding ids out of range [0, {table.shape[0]})")
    out = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)
    return make_node(out, (table,), backward)


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """rate 为 0 或没有 rng 时原样返回"""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return mul(x, keep)


def cross_entropy(logits: Tensor, labels, include=None) -> Tensor:
    """对 include 为真的行求平均交叉熵，其余行梯度恰为零"""
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects 2-D logits, got {logits.shape}")
    n_rows, width = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n_rows:
        raise DimensionError(f"{labels.shape[0]} labels for {n_rows} logit rows")
    include = np.ones(n_rows, dtype=bool) if include is None else np.asarray(include, dtype=bool)
    rows = np.flatnonzero(include)
    if rows.size == 0:
        raise ContractError("cross_entropy has no included positions")
    picked = labels[rows]
    if picked.min() < 0 or picked.max() >= width:
        raise ContractError(f"label out of range [0, {width})")
    sub_logits = logits.data[rows]
    shifted = sub_logits - sub_logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    loss = np.asarray(-log_probs[np.arange(rows.size), picked].mean(), dtype=logits.dtype)

    def backward(g):
        grad = np.zeros_like(logits.data)
        probs = np.exp(log_probs)
        probs[np.arange(rows.size), picked] -= 1.0
        grad[rows] = probs * (g / rows.size)
        return (grad,)
    return make_node(loss, (logits,), backward)


def _topological_order(root: Tensor):
    order, visited = [], set()
    stack = [(root, False)]
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


def reverse_pass(loss: Tensor):
    """从标量 loss 反向传播，完成后释放计算图"""
    if loss.size != 1:
        raise ContractError(f"reverse_pass needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")
    order = _topological_order(loss)
    seed = np.ones_like(loss.data)
    loss.grad = seed if loss.grad is None else loss.grad + seed
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        parent_grads = node._backward(node.grad)
        for parent, grad in zip(node._parents, parent_grads):
            if grad is None or not parent.requires_grad:
                continue
            grad = np.asarray(grad, dtype=parent.dtype).reshape(parent.shape)
            parent.grad = grad.copy() if parent.grad is None else parent.grad + grad
    for node in order:
        node._parents = ()
        node._backward = None
