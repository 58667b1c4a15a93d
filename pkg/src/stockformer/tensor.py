"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array. Every op records a backward rule on the
result; ``backward(loss)`` walks the recorded graph in reverse topological
order, accumulates dLoss/dT into ``.grad`` of every reachable tensor that
requires gradients, and then frees the graph (the tape is single-use).

Broadcasting is deliberately narrow: two shapes are compatible when they
are equal or one is a trailing suffix of the other (the shorter operand is
treated as replicated over the leading batch axes). There is no size-1
expansion inside matching axes.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .errors import InvalidArgumentError, NotScalarError, ShapeMismatchError
from .rng import Rng

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / finite differences)."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_ctx")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._ctx = None  # (parents, backward_fn) while part of a live tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn, owns_grads: bool = True) -> Tensor:
    """Wrap an op result; ``owns_grads`` means the backward rule returns
    freshly allocated arrays the engine may keep without copying (rules that
    hand back views or aliases of the incoming gradient must pass False)."""
    out = Tensor(data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._ctx = (parents, backward_fn, owns_grads)
    return out


def _suffix_shape(sa: tuple, sb: tuple, op: str) -> tuple:
    """Result shape under suffix (leading-batch) broadcasting."""
    if sa == sb:
        return sa
    if len(sa) > len(sb) and sa[len(sa) - len(sb):] == sb:
        return sa
    if len(sb) > len(sa) and sb[len(sb) - len(sa):] == sa:
        return sb
    raise ShapeMismatchError(f"{op}: incompatible shapes {sa} and {sb}")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    _suffix_shape(a.shape, b.shape, "add")
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        owns_grads=False,  # pass-through gradients alias g
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _suffix_shape(a.shape, b.shape, "sub")
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
        owns_grads=False,
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _suffix_shape(a.shape, b.shape, "mul")
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeMismatchError(f"matmul: operands must be >= 2-d, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError(f"matmul: inner dims differ for {a.shape} and {b.shape}")
    _suffix_shape(a.shape[:-2], b.shape[:-2], "matmul batch")

    def backward(g):
        # the common batched-input x 2-d-weight case collapses to single
        # BLAS calls instead of one small matmul per batch element
        if b.data.ndim == 2 and a.data.ndim > 2:
            m, k = a.shape[-1], b.shape[-1]
            ga = (g.reshape(-1, k) @ b.data.T).reshape(a.shape)
            gb = a.data.reshape(-1, m).T @ g.reshape(-1, k)
        else:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    if b.data.ndim == 2 and a.data.ndim > 2:
        out = (a.data.reshape(-1, a.shape[-1]) @ b.data).reshape(*a.shape[:-1], b.shape[-1])
    else:
        out = np.matmul(a.data, b.data)
    return _make(out, (a, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b in one op; x is (..., k), w is (k, m), b is (m,)."""
    if x.data.ndim < 2 or w.data.ndim != 2 or b.shape != (w.shape[-1],):
        raise ShapeMismatchError(
            f"affine: got x {x.shape}, w {w.shape}, b {b.shape}"
        )
    if x.shape[-1] != w.shape[0]:
        raise ShapeMismatchError(f"affine: inner dims differ for {x.shape} and {w.shape}")
    k, m = w.shape
    out = x.data.reshape(-1, k) @ w.data
    out += b.data
    out = out.reshape(*x.shape[:-1], m)

    def backward(g):
        g2 = g.reshape(-1, m)
        gx = (g2 @ w.data.T).reshape(x.shape)
        gw = x.data.reshape(-1, k).T @ g2
        gb = g2.sum(axis=0)
        return gx, gw, gb

    return _make(out, (x, w, b), backward)


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    """Permute axes; default swaps the last two."""
    if axes is None:
        if a.data.ndim < 2:
            raise ShapeMismatchError(f"transpose: need >= 2-d, got {a.shape}")
        axes = tuple(range(a.data.ndim - 2)) + (a.data.ndim - 1, a.data.ndim - 2)
    inverse = tuple(np.argsort(axes))
    return _make(
        np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), owns_grads=False
    )


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), owns_grads=False)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise InvalidArgumentError("concat: empty tensor list")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _make(
        np.concatenate([t.data for t in tensors], axis=axis),
        tuple(tensors),
        lambda g: tuple(np.split(g, splits, axis=axis)),
        owns_grads=False,  # np.split hands back views
    )


def tensor_slice(a: Tensor, key) -> Tensor:
    """Basic slicing (ints and slices only, so backward is a plain scatter)."""
    shape = a.shape

    def backward(g):
        out = np.zeros(shape, dtype=np.float64)
        out[key] = g
        return (out,)

    return _make(a.data[key], (a,), backward)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape
    count = a.data.size if axis is None else np.prod([shape[ax] for ax in np.atleast_1d(axis)])

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape) / count,)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def softmax(a: Tensor, axis: int = -1, scale: float | None = None, mask: np.ndarray | None = None) -> Tensor:
    """softmax(scale * a + mask) along ``axis``.

    ``scale`` and ``mask`` are fused in (one temporary instead of three);
    mask entries of -inf zero out the corresponding probabilities and their
    gradients. A row that is entirely masked would produce NaNs, so masks
    must leave at least one finite entry per row.
    """
    p = a.data * scale if scale is not None else a.data.copy()
    if mask is not None:
        p += mask
    p -= p.max(axis=axis, keepdims=True)
    np.exp(p, out=p)
    p /= p.sum(axis=axis, keepdims=True)

    def backward(g):
        if axis in (-1, p.ndim - 1):
            dot = np.einsum("...i,...i->...", g, p)[..., None]
        else:
            dot = (g * p).sum(axis=axis, keepdims=True)
        out = g - dot
        out *= p
        if scale is not None:
            out *= scale
        return (out,)

    return _make(p, (a,), backward)


def scaled_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    scale: float,
    mask: np.ndarray | None = None,
    trace: dict | None = None,
    trace_key: str = "attn",
) -> Tensor:
    """softmax(q @ k^T * scale + mask) @ v over the trailing two axes.

    One fused node: the score buffer is softmaxed in place and the softmax
    jacobian is applied in place on the backward pass, which matters because
    the (batch, heads, seq, seq) intermediates dominate training traffic.
    """
    if q.shape != k.shape or q.shape != v.shape:
        raise ShapeMismatchError(f"attention operands differ: {q.shape}, {k.shape}, {v.shape}")
    p = np.matmul(q.data, np.swapaxes(k.data, -1, -2))
    p *= scale
    if mask is not None:
        p += mask
    p -= p.max(axis=-1, keepdims=True)
    np.exp(p, out=p)
    p /= p.sum(axis=-1, keepdims=True)
    if trace is not None:
        trace[trace_key] = p.copy()

    def backward(g):
        gv = np.matmul(np.swapaxes(p, -1, -2), g)
        gs = np.matmul(g, np.swapaxes(v.data, -1, -2))
        dot = np.einsum("...i,...i->...", gs, p)[..., None]
        gs -= dot
        gs *= p
        gs *= scale
        gq = np.matmul(gs, k.data)
        gk = np.matmul(np.swapaxes(gs, -1, -2), q.data)
        return gq, gk, gv

    return _make(np.matmul(p, v.data), (q, k, v), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatchError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} do not match feature dim ({d},)"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xhat = x.data - mu
    var = np.einsum("...i,...i->...", xhat, xhat)[..., None] / d
    inv = 1.0 / np.sqrt(var + eps)
    xhat *= inv

    def backward(g):
        dxhat = g * gain.data
        s1 = dxhat.sum(axis=-1, keepdims=True)
        s2 = np.einsum("...i,...i->...", dxhat, xhat)[..., None]
        dxhat -= (s1 + xhat * s2) / d
        dxhat *= inv
        g2 = g.reshape(-1, d)
        dgain = np.einsum("ij,ij->j", g2, xhat.reshape(-1, d))
        dbias = g2.sum(axis=0)
        return dxhat, dgain, dbias

    out = xhat * gain.data
    out += bias.data
    return _make(out, (x, gain, bias), backward)


def dropout(x: Tensor, p: float, rng: Rng | None, training: bool = True) -> Tensor:
    """Inverted dropout: keep with probability 1-p and scale kept units by 1/(1-p)."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"dropout probability must be in [0, 1], got {p}")
    if not training or p == 0.0:
        return x
    if p == 1.0:
        mask = np.zeros(x.shape, dtype=np.float64)
    else:
        if rng is None:
            raise InvalidArgumentError("dropout with p > 0 in training mode needs an rng")
        mask = (rng.uniform(*x.shape) >= p) / (1.0 - p)
    return _make(x.data * mask, (x,), lambda g: (g * mask,))


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"mse_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    n = max(diff.size, 1)

    def backward(g):
        gp = g * 2.0 * diff / n
        return gp, -gp

    return _make(np.mean(diff * diff) if diff.size else np.float64(0.0), (pred, target), backward)


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; consumes the tape."""
    if loss.shape != ():
        raise NotScalarError(f"backward needs a scalar loss, got shape {loss.shape}")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx[0]:
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))

    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node._ctx is None:
            continue
        parents, backward_fn, owns = node._ctx
        grads = backward_fn(node.grad)
        for parent, g in zip(parents, grads):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                # taking ownership is safe only for freshly allocated grads
                parent.grad = g if owns else np.array(g)
            else:
                parent.grad += g
        node._ctx = None
