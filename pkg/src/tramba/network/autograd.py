"""Minimal reverse-mode differentiation over numpy arrays.

Each op computes its value eagerly and records a closure that maps the output
gradient to gradients of its inputs. ``backward`` walks the recorded graph in
reverse topological order. Only the handful of ops the network needs exist.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .. import ssm_kernel

__all__ = ["Tensor", "tensor", "no_grad_value"]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topo(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _needs(parent):
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def tensor(x, requires_grad=False, name=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, requires_grad, name)


def no_grad_value(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _needs(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None


def _topo(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    post: list[Tensor] = []
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            post.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and _needs(p):
                stack.append((p, False))
    return post[::-1]


def _make(data, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if any(_needs(p) for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# ----------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)))


def exp(x) -> Tensor:
    x = tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = tensor(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def sigmoid(x) -> Tensor:
    x = tensor(x)
    out = _sigmoid(x.data)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(v):
    return np.exp(-np.logaddexp(0.0, -v))


def softplus(x) -> Tensor:
    x = tensor(x)
    return _make(np.logaddexp(0.0, x.data), (x,), lambda g: (g * _sigmoid(x.data),))


def silu(x) -> Tensor:
    x = tensor(x)
    s = _sigmoid(x.data)
    return _make(x.data * s, (x,), lambda g: (g * (s + x.data * s * (1.0 - s)),))


_SQRT1_2 = np.sqrt(0.5)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x) -> Tensor:
    """Exact (erf) GELU."""
    x = tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _SQRT1_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data**2)
    return _make(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


# ----------------------------------------------------------------------------
# shape / indexing


def reshape(x, shape) -> Tensor:
    x = tensor(x)
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes) -> Tensor:
    x = tensor(x)
    axes = tuple(axes) if axes else tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    return _make(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def getitem(x, idx) -> Tensor:
    x = tensor(x)

    def back(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], (x,), back)


def split_last(x, sizes: Sequence[int]) -> list[Tensor]:
    """Contiguous chunks along the last axis (cheaper backward than getitem)."""
    x = tensor(x)
    bounds = np.cumsum([0, *sizes])
    if bounds[-1] != x.shape[-1]:
        raise ValueError(f"split sizes {sizes} do not add up to {x.shape[-1]}")
    outs = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        def back(g, lo=lo, hi=hi):
            full = np.zeros_like(x.data)
            full[..., lo:hi] = g
            return (full,)
        outs.append(_make(x.data[..., lo:hi], (x,), back))
    return outs


def concat_last(xs: Sequence) -> Tensor:
    xs = [tensor(v) for v in xs]
    bounds = np.cumsum([0] + [v.shape[-1] for v in xs])

    def back(g):
        return tuple(g[..., lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _make(np.concatenate([v.data for v in xs], axis=-1), xs, back)


def sum_(x, axis=None, keepdims=False) -> Tensor:
    x = tensor(x)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), back)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = tensor(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis, keepdims), 1.0 / n)


# ----------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    a, b = tensor(a), tensor(b)

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(a.data @ b.data, (a, b), back)


def einsum(spec: str, a, b) -> Tensor:
    """Two-operand einsum; every index of an operand must also appear in the
    other operand or in the output."""
    a, b = tensor(a), tensor(b)
    ins, out = spec.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    for s, other in ((sa, sb + out), (sb, sa + out)):
        if any(ch not in other for ch in s):
            raise ValueError(f"einsum spec {spec!r} has an operand-private index")
    val = np.einsum(spec, a.data, b.data, optimize=True)

    def back(g):
        ga = np.einsum(f"{out},{sb}->{sa}", g, b.data, optimize=True)
        gb = np.einsum(f"{out},{sa}->{sb}", g, a.data, optimize=True)
        return ga, gb

    return _make(val, (a, b), back)


def linear(x, w, b=None) -> Tensor:
    y = matmul(x, w)
    return y if b is None else add(y, b)


def spatial_linear(x, mh: np.ndarray, mw: np.ndarray) -> Tensor:
    """``out[b,i,j,c] = sum_hw mh[i,h] x[b,h,w,c] mw[j,w]`` with fixed matrices."""
    x = tensor(x)
    val = np.einsum("ih,bhwc,jw->bijc", mh, x.data, mw, optimize=True)

    def back(g):
        return (np.einsum("ih,bijc,jw->bhwc", mh, g, mw, optimize=True),)

    return _make(val, (x,), back)


# ----------------------------------------------------------------------------
# normalisation / convolution


def layer_norm(x, gamma, beta, eps: float = 1e-6) -> Tensor:
    """Normalise over the last axis."""
    x, gamma, beta = tensor(x), tensor(gamma), tensor(beta)
    mu = x.data.mean(-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def back(g):
        gg = _unbroadcast(g * xhat, gamma.shape)
        gb = _unbroadcast(g, beta.shape)
        gx_hat = g * gamma.data
        gx = rstd * (gx_hat - gx_hat.mean(-1, keepdims=True)
                     - xhat * (gx_hat * xhat).mean(-1, keepdims=True))
        return gx, gg, gb

    return _make(out, (x, gamma, beta), back)


def depthwise_conv2d(x, w, b=None) -> Tensor:
    """Depthwise 'same' convolution (cross-correlation), zero padded.

    ``x`` is (B, H, W, C), ``w`` is (k, k, C) with odd k.
    """
    x, w = tensor(x), tensor(w)
    k = w.shape[0]
    if w.shape[0] != w.shape[1] or k % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {w.shape[:2]}")
    p = k // 2
    _, h, wd, _ = x.shape
    xp = np.pad(x.data, ((0, 0), (p, p), (p, p), (0, 0)))
    out = np.zeros_like(x.data)
    for di in range(k):
        for dj in range(k):
            out += xp[:, di:di + h, dj:dj + wd, :] * w.data[di, dj]

    def back(g):
        gxp = np.zeros_like(xp)
        gw = np.empty_like(w.data)
        for di in range(k):
            for dj in range(k):
                gxp[:, di:di + h, dj:dj + wd, :] += g * w.data[di, dj]
                gw[di, dj] = (g * xp[:, di:di + h, dj:dj + wd, :]).sum(axis=(0, 1, 2))
        return gxp[:, p:p + h, p:p + wd, :], gw

    y = _make(out, (x, w), back)
    return y if b is None else add(y, b)


# ----------------------------------------------------------------------------
# scans


def scan_gather(x, orders: np.ndarray) -> Tensor:
    """(B, N, C) -> (B, K, N, C) with ``out[:, k] = x[:, orders[k]]``."""
    x = tensor(x)

    def back(g):
        gx = np.zeros_like(x.data)
        for k, o in enumerate(orders):
            gx[:, o] += g[:, k]
        return (gx,)

    return _make(x.data[:, orders], (x,), back)


def scan_merge(y, orders: np.ndarray) -> Tensor:
    """(B, K, N, C) -> (B, N, C): undo each order and sum over directions."""
    y = tensor(y)
    out = np.zeros((y.shape[0], y.shape[2], y.shape[3]))
    for k, o in enumerate(orders):
        out[:, o] += y.data[:, k]

    def back(g):
        return (g[:, orders],)

    return _make(out, (y,), back)


def selective_scan(x, delta, a, b, c, d, exact: bool = True) -> Tensor:
    """Differentiable wrapper over :func:`tramba.ssm_kernel.selective_scan`."""
    ins = [tensor(v) for v in (x, delta, a, b, c, d)]
    y, cache = ssm_kernel.selective_scan(*(t.data for t in ins), exact=exact, return_cache=True)

    def back(g):
        gr = ssm_kernel.selective_scan_backward(cache, g)
        return gr["x"], gr["delta"], gr["a"], gr["b"], gr["c"], gr["d"]

    return _make(y, ins, back)


# ----------------------------------------------------------------------------
# losses


def bce_with_logits(logits, target: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against a fixed target."""
    logits = tensor(logits)
    z = logits.data
    t = np.asarray(target, dtype=np.float64)
    val = (np.logaddexp(0.0, z) - t * z).mean()
    n = z.size

    def back(g):
        return (g * (_sigmoid(z) - t) / n,)

    return _make(np.asarray(val), (logits,), back)
