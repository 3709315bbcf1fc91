"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps an ndarray plus an optional backward closure. Every operation
appends exactly one node to the implicit tape (a global creation counter), and
``backward`` replays reachable nodes in exact reverse creation order, which is
always a valid topological order because inputs are created before outputs.

Contracts enforced here:
  * float64 end to end; a NaN in any op result raises NumericError immediately.
  * trailing-dimension broadcasting with gradient reduction over broadcast axes.
  * a graph is consumed exactly once: a second backward through any interior
    node raises GraphError until a fresh forward pass rebuilds the graph.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager

import numpy as np

from .errors import DomainError, GraphError, NumericError, ShapeError

_COUNTER = itertools.count()
_GRAD_ENABLED = True

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


@contextmanager
def no_grad():
    """Disable graph recording inside the block (used for frozen models)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _check_nan(data: np.ndarray, what: str) -> None:
    # sum() propagates NaN; cheaper than isnan(data).any() on large arrays.
    if data.size and np.isnan(data.sum()):
        raise NumericError(f"NaN produced in {what}")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` over axes that were broadcast up from `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id", "_consumed")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        _check_nan(arr, "tensor construction")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self._id = next(_COUNTER)
        self._consumed = False

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def lift(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- introspection ---------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ----------------------------------------------------------

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy() if g.base is not None or g.shape != self.data.shape else g
        else:
            self.grad = self.grad + g

    def backward(self, grad=None):
        """Backpropagate from this node through the recorded graph.

        The graph below this node may be traversed once; a repeat backward
        without a fresh forward raises GraphError.
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without an explicit gradient requires a scalar")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ShapeError(f"seed gradient shape {grad.shape} != tensor shape {self.data.shape}")

        nodes = []
        seen = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node._backward is not None:
                if node._consumed:
                    raise GraphError("graph already consumed by a previous backward; run a new forward pass")
                nodes.append(node)
                stack.extend(node._parents)

        self.grad = grad if self.grad is None else self.grad + grad
        for node in sorted(nodes, key=lambda n: n._id, reverse=True):
            g = node.grad
            if g is None:
                continue
            _check_nan(g, "backward pass")
            node._backward(g)
            node._consumed = True

    # -- elementwise arithmetic ----------------------------------------------

    def _binary(self, other, fwd, bwd_a, bwd_b, what):
        other = Tensor.lift(other)
        try:
            out_data = fwd(self.data, other.data)
        except ValueError as exc:
            raise ShapeError(f"{what}: shapes {self.data.shape} and {other.data.shape} do not broadcast") from exc
        rg = _GRAD_ENABLED and (self.requires_grad or other.requires_grad or self._backward is not None or other._backward is not None)
        if not rg:
            return Tensor(out_data)
        a, b = self, other

        def _backward(g):
            ga = bwd_a(g, a.data, b.data)
            if ga is not None:
                a._accumulate(_unbroadcast(ga, a.data.shape))
            gb = bwd_b(g, a.data, b.data)
            if gb is not None:
                b._accumulate(_unbroadcast(gb, b.data.shape))

        return Tensor(out_data, _parents=(a, b), _backward=_backward)

    def _unary(self, fwd, bwd, what):
        out_data = fwd(self.data)
        rg = _GRAD_ENABLED and (self.requires_grad or self._backward is not None)
        if not rg:
            return Tensor(out_data)
        a = self

        def _backward(g):
            a._accumulate(bwd(g, a.data, out_data))

        return Tensor(out_data, _parents=(a,), _backward=_backward)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g, "subtract")

    def __rsub__(self, other):
        return Tensor.lift(other).__sub__(self)

    def __mul__(self, other):
        return self._binary(other, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x, "multiply")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor.lift(other)
        if np.any(other.data == 0.0):
            raise DomainError("division by zero")
        return self._binary(
            other,
            lambda x, y: x / y,
            lambda g, x, y: g / y,
            lambda g, x, y: -g * x / (y * y),
            "divide",
        )

    def __rtruediv__(self, other):
        return Tensor.lift(other).__truediv__(self)

    def __neg__(self):
        return self._unary(lambda x: -x, lambda g, x, y: -g, "negate")

    def abs(self):
        return self._unary(np.abs, lambda g, x, y: g * np.sign(x), "abs")

    def log(self):
        if np.any(self.data <= 0.0):
            raise DomainError("log requires strictly positive input")
        return self._unary(np.log, lambda g, x, y: g / x, "log")

    def exp(self):
        return self._unary(np.exp, lambda g, x, y: g * y, "exp")

    def sigmoid(self):
        def fwd(x):
            out = np.empty_like(x)
            pos = x >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
            ex = np.exp(x[~pos])
            out[~pos] = ex / (1.0 + ex)
            return out

        return self._unary(fwd, lambda g, x, y: g * y * (1.0 - y), "sigmoid")

    def tanh(self):
        return self._unary(np.tanh, lambda g, x, y: g * (1.0 - y * y), "tanh")

    def gelu(self):
        """Gaussian error linear unit (tanh approximation)."""

        def fwd(x):
            return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x**3)))

        def bwd(g, x, y):
            t = np.tanh(_GELU_C * (x + _GELU_A * x**3))
            dt = (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
            return g * (0.5 * (1.0 + t) + 0.5 * x * dt)

        return self._unary(fwd, bwd, "gelu")

    def square(self):
        return self._unary(np.square, lambda g, x, y: g * 2.0 * x, "square")

    def sqrt(self):
        if np.any(self.data < 0.0):
            raise DomainError("sqrt requires nonnegative input")
        return self._unary(np.sqrt, lambda g, x, y: g * 0.5 / y, "sqrt")

    def maximum(self, floor):
        """Elementwise max against a constant; gradient flows where data >= floor."""
        floor = np.asarray(floor, dtype=np.float64)
        return self._unary(
            lambda x: np.maximum(x, floor),
            lambda g, x, y: g * (x >= floor),
            "maximum",
        )

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self

        def fwd(x):
            return np.asarray(x.sum(axis=axis, keepdims=keepdims))

        def bwd(g, x, y):
            if axis is None:
                return np.broadcast_to(g, x.shape).copy() if np.ndim(g) == 0 or g.size == 1 else g * np.ones_like(x)
            g_exp = g if keepdims else np.expand_dims(g, axis)
            return np.broadcast_to(g_exp, x.shape).copy()

        return a._unary(fwd, bwd, "sum")

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = 1
            for ax in axes:
                n *= self.data.shape[ax]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- linear algebra -----------------------------------------------------------

    def __matmul__(self, other):
        other = Tensor.lift(other)
        a, b = self, other
        if a.data.ndim < 2 or b.data.ndim < 2:
            raise ShapeError("matmul requires tensors of rank >= 2")
        if a.data.shape[-1] != b.data.shape[-2]:
            raise ShapeError(f"matmul inner dimensions differ: {a.data.shape} @ {b.data.shape}")
        try:
            out_data = a.data @ b.data
        except ValueError as exc:
            raise ShapeError(f"matmul batch dimensions do not broadcast: {a.data.shape} @ {b.data.shape}") from exc
        rg = _GRAD_ENABLED and (a.requires_grad or b.requires_grad or a._backward is not None or b._backward is not None)
        if not rg:
            return Tensor(out_data)

        def _backward(g):
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))

        return Tensor(out_data, _parents=(a, b), _backward=_backward)

    # -- shape manipulation ------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old_shape = a.data.shape
        return a._unary(
            lambda x: x.reshape(shape),
            lambda g, x, y: g.reshape(old_shape),
            "reshape",
        )

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        return self._unary(
            lambda x: np.ascontiguousarray(x.transpose(axes)),
            lambda g, x, y: g.transpose(inverse),
            "transpose",
        )

    def __getitem__(self, key):
        a = self

        def fwd(x):
            return np.ascontiguousarray(x[key])

        def bwd(g, x, y):
            gx = np.zeros_like(x)
            gx[key] = g
            return gx

        return a._unary(fwd, bwd, "slice")


# -- multi-input / structural ops -------------------------------------------------


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [Tensor.lift(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of zero tensors")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    rg = _GRAD_ENABLED and any(t.requires_grad or t._backward is not None for t in tensors)
    if not rg:
        return Tensor(out_data)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    return Tensor(out_data, _parents=tuple(tensors), _backward=_backward)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [t.reshape(*t.shape[:axis], 1, *t.shape[axis:]) for t in map(Tensor.lift, tensors)]
    return concat(tensors, axis=axis)


def pad_last(x: Tensor, left: int, right: int) -> Tensor:
    """Zero-pad the trailing axis."""
    a = Tensor.lift(x)
    width = [(0, 0)] * (a.data.ndim - 1) + [(left, right)]
    n = a.data.shape[-1]
    return a._unary(
        lambda v: np.pad(v, width),
        lambda g, v, y: g[..., left : left + n],
        "pad",
    )


def frames(x: Tensor, win: int, hop: int) -> Tensor:
    """Slice [..., N] into overlapping windows [..., T, win] with step `hop`."""
    a = Tensor.lift(x)
    n = a.data.shape[-1]
    if n < win:
        raise ShapeError(f"signal of {n} samples shorter than window {win}")
    t = (n - win) // hop + 1

    def fwd(v):
        out = np.empty(v.shape[:-1] + (t, win), dtype=np.float64)
        for i in range(t):
            out[..., i, :] = v[..., i * hop : i * hop + win]
        return out

    def bwd(g, v, y):
        gx = np.zeros_like(v)
        for i in range(t):
            gx[..., i * hop : i * hop + win] += g[..., i, :]
        return gx

    return a._unary(fwd, bwd, "frames")


def overlap_add(fr: Tensor, hop: int, out_len: int) -> Tensor:
    """Adjoint of `frames`: sum [..., T, win] windows into [..., out_len]."""
    a = Tensor.lift(fr)
    t, win = a.data.shape[-2:]
    if (t - 1) * hop + win > out_len:
        raise ShapeError("overlap_add output length too short for the given frames")

    def fwd(v):
        out = np.zeros(v.shape[:-2] + (out_len,), dtype=np.float64)
        for i in range(t):
            out[..., i * hop : i * hop + win] += v[..., i, :]
        return out

    def bwd(g, v, y):
        gx = np.empty_like(v)
        for i in range(t):
            gx[..., i, :] = g[..., i * hop : i * hop + win]
        return gx

    return a._unary(fwd, bwd, "overlap_add")


# -- composites --------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shift = x.data.max(axis=axis, keepdims=True)  # constant; softmax is shift-invariant
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shift = x.data.max(axis=axis, keepdims=True)
    z = x - shift
    return z - z.exp().sum(axis=axis, keepdims=True).log()


def gradcheck(fn, tensors, h: float = 1e-5, rtol: float = 1e-4) -> float:
    """Compare analytic gradients of scalar fn(*tensors) with central differences.

    Returns the worst relative error across all inputs; raises AssertionError
    when it exceeds `rtol`.
    """
    tensors = [Tensor.lift(t) for t in tensors]
    for t in tensors:
        t.requires_grad = True
        t.zero_grad()
    out = fn(*tensors)
    out.backward()
    worst = 0.0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = fn(*[x.detach() for x in tensors]).item()
            flat[i] = orig - h
            lo = fn(*[x.detach() for x in tensors]).item()
            flat[i] = orig
            num_flat[i] = (hi - lo) / (2.0 * h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        err = np.linalg.norm(analytic - numeric) / denom
        worst = max(worst, err)
    if worst >= rtol:
        raise AssertionError(f"gradient check failed: relative error {worst:.3e} >= {rtol:g}")
    return worst
