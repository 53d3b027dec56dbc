"""Dense tensors with reverse-mode automatic differentiation.

Values are stored as numpy arrays in float64 or complex128. Every
differentiable operation records its parents and a backward closure; calling
:func:`backward` on a real scalar walks the recorded graph in reverse
topological order.

Complex gradients use the convention ``grad = dL/dRe + 1j * dL/dIm`` for a
real loss ``L``, so ``p - lr * grad`` is a descent step. For a holomorphic
map ``w = f(z)`` this gives ``grad_z = grad_w * conj(f'(z))``.
"""

from __future__ import annotations

import numpy as np

from . import fft as _fft
from .errors import ContractError, DimensionError

REAL = np.float64
COMPLEX = np.complex128


def _as_array(value):
    arr = np.asarray(value)
    if np.iscomplexobj(arr):
        return arr.astype(COMPLEX, copy=False)
    return arr.astype(REAL, copy=False)


def _conj(a):
    return np.conj(a) if np.iscomplexobj(a) else a


class Tensor:
    """An n-dimensional real or complex array that can take part in autodiff.

    Parameters
    ----------
    data : array_like
        Values. Complex input is stored as complex128, anything else as float64.
    requires_grad : bool
        Mark the tensor as a leaf whose gradient is wanted.
    name : str, optional
        Label used in error messages and gradient reports.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, name=None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _from_op(cls, data, parents, backward):
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def detach(self):
        return Tensor(self.data)

    # -- introspection --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_complex(self):
        return np.iscomplexobj(self.data)

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operators ------------------------------------------------------------

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    # -- method forms ---------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, a, b):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)

    def backward(self):
        return backward(self)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


# -- graph traversal ----------------------------------------------------------


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _fit_grad(grad, parent):
    grad = _unbroadcast(grad, parent.shape)
    if not parent.is_complex and np.iscomplexobj(grad):
        grad = grad.real
    return grad


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Back-propagate from a real scalar ``loss``.

    Gradients are accumulated into ``.grad`` of every leaf that requires
    them, and the mapping ``{leaf: gradient}`` for this pass is returned.
    """
    loss = as_tensor(loss)
    if loss.data.size != 1 or loss.is_complex:
        raise ContractError(f"backward needs a real scalar loss, got {loss!r}")
    if not loss.requires_grad:
        return {}
    grads = {id(loss): np.ones_like(loss.data)}
    result = {}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            result[node] = g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = _fit_grad(pg, parent)
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
    return result


# -- elementwise arithmetic -----------------------------------------------------


def _broadcast_shape(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"shapes {a.shape} and {b.shape} are not broadcast-compatible") from None


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return Tensor._from_op(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return Tensor._from_op(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        return g * _conj(b.data), g * _conj(a.data)

    return Tensor._from_op(a.data * b.data, (a, b), bw)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    out = a.data / b.data

    def bw(g):
        gb = g / _conj(b.data)
        return gb, -gb * _conj(out)

    return Tensor._from_op(out, (a, b), bw)


def scale(x, factor):
    """Multiply by a constant Python/numpy scalar."""
    x = as_tensor(x)
    return Tensor._from_op(x.data * factor, (x,), lambda g: (g * np.conj(factor),))


def sigmoid(x):
    x = as_tensor(x)
    d = x.data
    # branch on sign so exp never overflows
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x):
    x = as_tensor(x)
    active = x.data > 0
    return Tensor._from_op(np.where(active, x.data, 0.0), (x,), lambda g: (g * active,))


def log(x):
    x = as_tensor(x)
    return Tensor._from_op(np.log(x.data), (x,), lambda g: (g / x.data,))


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * _conj(out),))


def abs_(x):
    """Absolute value; the modulus for complex input (gradient 0 at the origin)."""
    x = as_tensor(x)
    out = np.abs(x.data)
    if x.is_complex:
        safe = np.where(out > 0, out, 1.0)
        direction = np.where(out > 0, x.data / safe, 0.0)
    else:
        direction = np.sign(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * direction,))


def clip(x, lo, hi):
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return Tensor._from_op(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def elementwise(op_kind, *args):
    """Dispatch by name: add, sub, mul, sigmoid, relu, or scale."""
    table = {"add": add, "sub": sub, "mul": mul, "sigmoid": sigmoid, "relu": relu, "scale": scale}
    try:
        fn = table[op_kind]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op_kind!r}") from None
    return fn(*args)


# -- complex plumbing -----------------------------------------------------------


def real(z):
    z = as_tensor(z)
    return Tensor._from_op(z.data.real.copy(), (z,), lambda g: (g + 0j,))


def imag(z):
    z = as_tensor(z)
    return Tensor._from_op(z.data.imag.copy(), (z,), lambda g: (1j * g,))


def complex_(re, im):
    re, im = as_tensor(re), as_tensor(im)
    if re.is_complex or im.is_complex:
        raise ContractError("complex_ expects real parts")
    _broadcast_shape(re, im)
    return Tensor._from_op(re.data + 1j * im.data, (re, im), lambda g: (g.real, g.imag))


def conj(z):
    z = as_tensor(z)
    return Tensor._from_op(_conj(z.data), (z,), lambda g: (np.conj(g),))


def fft(x, axis=-1):
    """Unnormalized forward DFT along ``axis``."""
    x = as_tensor(x)
    n = x.shape[axis] if -x.ndim <= axis < x.ndim else None
    out = _fft.fft(x.data, axis)
    return Tensor._from_op(out, (x,), lambda g: (n * _fft.ifft(g, axis),))


def ifft(x, axis=-1):
    """Inverse DFT (1/n scaled) along ``axis``; the result is complex."""
    x = as_tensor(x)
    n = x.shape[axis] if -x.ndim <= axis < x.ndim else None
    out = _fft.ifft(x.data, axis)
    return Tensor._from_op(out, (x,), lambda g: (_fft.fft(g, axis) / n,))


# -- linear algebra and reductions ----------------------------------------------


def matmul(a, b):
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul batch extents differ: {a.shape} @ {b.shape}") from None

    def bw(g):
        ga = g @ _conj(np.swapaxes(b.data, -1, -2))
        gb = _conj(np.swapaxes(a.data, -1, -2)) @ g
        return ga, gb

    return Tensor._from_op(a.data @ b.data, (a, b), bw)


def sum_(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return Tensor._from_op(out, (x,), bw)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    if axis is None:
        count = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    return scale(sum_(x, axis, keepdims), 1.0 / count)


def max_(x, axis=None, keepdims=False):
    """Maximum along ``axis``; the gradient is shared equally among ties."""
    x = as_tensor(x)
    if x.is_complex:
        raise ContractError("max_ is defined for real tensors only")
    out = x.data.max(axis=axis, keepdims=True)
    hits = x.data == out
    share = hits / hits.sum(axis=axis, keepdims=True)
    if not keepdims:
        out = out.squeeze(axis) if axis is not None else out.reshape(())

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis) if axis is not None else np.reshape(g, (1,) * x.ndim)
        return (g * share,)

    return Tensor._from_op(out, (x,), bw)


def softmax(x, axis=-1):
    """Numerically stable softmax of a real tensor along ``axis``."""
    x = as_tensor(x)
    if x.is_complex:
        raise ContractError("softmax is defined for real tensors only")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (x,), bw)


# -- shape manipulation ---------------------------------------------------------


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {x.shape} into {shape}") from None
    return Tensor._from_op(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None):
    x = as_tensor(x)
    out = np.transpose(x.data, axes)
    inverse = None if axes is None else np.argsort(axes)
    return Tensor._from_op(out, (x,), lambda g: (np.transpose(g, inverse),))


def broadcast_to(x, shape):
    x = as_tensor(x)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise DimensionError(f"cannot broadcast {x.shape} to {shape}") from None
    return Tensor._from_op(out, (x,), lambda g: (g,))


def getitem(x, index):
    """Basic or advanced indexing; repeated indices accumulate gradients."""
    x = as_tensor(x)
    out = x.data[index]

    def bw(g):
        full = np.zeros(x.shape, dtype=np.result_type(x.data, g))
        np.add.at(full, index, g)
        return (full,)

    return Tensor._from_op(np.array(out), (x,), bw)


def take(table, indices):
    """Gather rows of ``table`` (first axis) at integer ``indices``."""
    table = as_tensor(table)
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise IndexError(f"lookup index out of range [0, {table.shape[0]})")
    return getitem(table, indices)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(s != r for i, (s, r) in enumerate(zip(t.shape, tensors[0].shape)) if i != ax):
            raise DimensionError(
                f"concat along axis {axis}: shapes {[t.shape for t in tensors]} differ off-axis"
            )
    sizes = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return Tensor._from_op(out, tuple(tensors), lambda g: tuple(np.split(g, sizes, axis=ax)))


def straight_through(hard, soft):
    """Forward the values of ``hard`` while routing gradients to ``soft``."""
    soft = as_tensor(soft)
    hard = np.asarray(hard, dtype=soft.dtype)
    if hard.shape != soft.shape:
        raise DimensionError(f"straight_through shapes differ: {hard.shape} vs {soft.shape}")
    return Tensor._from_op(hard.copy(), (soft,), lambda g: (g,))


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(shape, requires_grad=False):
    return Tensor(np.ones(shape), requires_grad=requires_grad)
