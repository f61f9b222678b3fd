"""Reverse-mode automatic differentiation on small float64 tensors.

Every op records a closure that maps the upstream gradient to per-input
contributions; ``Tensor.backward`` walks the recorded graph in reverse
topological order and accumulates them into ``.grad``. Only the ops the
change classifier needs exist: elementwise add/mul, relu, sigmoid, dense
affine maps, 2-D convolution with kernel 1 or 3, channel slicing, flatten,
concatenation, and a log-sum-exp-stable softmax cross-entropy.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference paths)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A float64 array plus the tape entry that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate dSelf/dLeaf into .grad of every requires_grad tensor.

        Self must be scalar. Repeated calls without zero_grad add up.
        """
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        flows = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flows.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for parent, contribution in node._vjp(g):
                if not parent.requires_grad:
                    continue
                held = flows.get(id(parent))
                flows[id(parent)] = contribution if held is None else held + contribution


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _record(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape {a.data.shape} != {b.data.shape}")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "add")

    def vjp(g):
        return ((a, g), (b, g))

    return _record(a.data + b.data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "mul")

    def vjp(g):
        return ((a, g * b.data), (b, g * a.data))

    return _record(a.data * b.data, (a, b), vjp)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0.0

    def vjp(g):
        return ((x, g * mask),)

    return _record(np.where(mask, x.data, 0.0), (x,), vjp)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return ((x, g * out * (1.0 - out)),)

    return _record(out, (x,), vjp)


def linear(x, weight, bias) -> Tensor:
    """Affine map weight @ x + bias for 1-D x."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.data.ndim != 1:
        raise ValueError(f"linear: input must be 1-D, got shape {x.data.shape}")
    m, n = weight.data.shape
    if x.data.shape[0] != n:
        raise ValueError(f"linear: input axis 0 is {x.data.shape[0]}, weight wants {n}")
    if bias.data.shape != (m,):
        raise ValueError(f"linear: bias axis 0 is {bias.data.shape}, weight gives {m}")

    def vjp(g):
        return (
            (x, weight.data.T @ g),
            (weight, np.outer(g, x.data)),
            (bias, g),
        )

    return _record(weight.data @ x.data + bias.data, (x, weight, bias), vjp)


def conv2d(x, weight, bias, padding: int) -> Tensor:
    """2-D cross-correlation, zero padded, stride 1, kernel 1 or 3.

    x: (C_in, H, W); weight: (C_out, C_in, k, k); bias: (C_out,).
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.data.ndim != 3:
        raise ValueError(f"conv2d: input must be (C,H,W), got shape {x.data.shape}")
    c_out, c_in, kh, kw = weight.data.shape
    if kh != kw or kh not in (1, 3):
        raise ValueError(f"conv2d: kernel must be square 1 or 3, got {kh}x{kw}")
    if x.data.shape[0] != c_in:
        raise ValueError(f"conv2d: input channels (axis 0) {x.data.shape[0]} != weight {c_in}")
    if bias.data.shape != (c_out,):
        raise ValueError(f"conv2d: bias axis 0 {bias.data.shape} != out channels {c_out}")
    if padding < 0:
        raise ValueError(f"conv2d: padding must be >= 0, got {padding}")
    k, p = kh, int(padding)
    h, w = x.data.shape[1:]
    ho, wo = h + 2 * p - k + 1, w + 2 * p - k + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d: output {ho}x{wo} empty for input {h}x{w} kernel {k}")
    xp = np.pad(x.data, ((0, 0), (p, p), (p, p))) if p else x.data
    windows = sliding_window_view(xp, (k, k), axis=(1, 2))
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(ho * wo, c_in * k * k)
    wmat = weight.data.reshape(c_out, c_in * k * k)
    out = (cols @ wmat.T + bias.data).T.reshape(c_out, ho, wo)

    def vjp(g):
        gm = g.reshape(c_out, ho * wo)
        d_bias = g.sum(axis=(1, 2))
        d_weight = (gm @ cols).reshape(weight.data.shape)
        d_cols = (gm.T @ wmat).reshape(ho, wo, c_in, k, k).transpose(2, 0, 1, 3, 4)
        d_xp = np.zeros_like(xp)
        for di in range(k):
            for dj in range(k):
                d_xp[:, di:di + ho, dj:dj + wo] += d_cols[:, :, :, di, dj]
        d_x = d_xp[:, p:p + h, p:p + w] if p else d_xp
        return ((x, d_x), (weight, d_weight), (bias, d_bias))

    return _record(out, (x, weight, bias), vjp)


def slice_channels(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if not 0 <= start < stop <= x.data.shape[0]:
        raise ValueError(f"slice_channels: [{start}:{stop}] out of range for axis 0 size {x.data.shape[0]}")

    def vjp(g):
        dx = np.zeros_like(x.data)
        dx[start:stop] = g
        return ((x, dx),)

    return _record(x.data[start:stop].copy(), (x,), vjp)


def flatten(x) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        return ((x, g.reshape(x.data.shape)),)

    return _record(x.data.reshape(-1).copy(), (x,), vjp)


def concat(parts) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    for i, p in enumerate(parts):
        if p.data.ndim != 1:
            raise ValueError(f"concat: part {i} must be 1-D, got shape {p.data.shape}")
    sizes = [p.data.shape[0] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple((p, g[bounds[i]:bounds[i + 1]]) for i, p in enumerate(parts))

    return _record(np.concatenate([p.data for p in parts]), tuple(parts), vjp)


def softmax_cross_entropy(logits, label: int) -> Tensor:
    """Scalar loss -log softmax(logits)[label], stable for any magnitude."""
    logits = as_tensor(logits)
    if logits.data.ndim != 1:
        raise ValueError(f"softmax_cross_entropy: logits must be 1-D, got {logits.data.shape}")
    n = logits.data.shape[0]
    if not 0 <= label < n:
        raise ValueError(f"softmax_cross_entropy: label {label} out of range for {n} classes")
    m = logits.data.max()
    shifted = logits.data - m
    lse = m + np.log(np.exp(shifted).sum())
    loss = lse - logits.data[label]

    def vjp(g):
        p = np.exp(logits.data - lse)
        p[label] -= 1.0
        return ((logits, float(g.reshape(-1)[0]) * p),)

    return _record(np.float64(loss), (logits,), vjp)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Plain numpy softmax (no tape); used for reporting probabilities."""
    m = logits.max()
    e = np.exp(logits - m)
    return e / e.sum()
