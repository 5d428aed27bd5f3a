"""Minimal dense-tensor numerics with reverse-mode automatic differentiation.

Values are 64-bit numpy arrays. Every op that touches a gradient-requiring
tensor records a backward closure; ``backward()`` runs the tape in reverse
topological order and accumulates into ``.grad``.
"""

from __future__ import annotations

import json
import struct
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "Parameter",
    "ShapeError",
    "matmul",
    "add",
    "mul",
    "concat",
    "embedding",
    "softmax",
    "layer_norm",
    "gelu",
    "sigmoid",
    "attention",
    "backward",
    "grad_check",
    "AdamOptimizer",
    "save_checkpoint",
    "load_checkpoint",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an op."""


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """A dense float64 array plus an optional backward-graph record."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the real work lives in the module-level functions
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), _wrap(-1.0)))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, _wrap(-1.0)))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def sum(self):
        return tsum(self)

    def reshape(self, *shape):
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def backward(self) -> None:
        backward(self)


class Parameter(Tensor):
    """A named, trainable tensor assigned to a learning-rate group."""

    __slots__ = ("name", "group")

    def __init__(self, data, name: str, group: str = "backbone"):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.group = group

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape}, group={self.group!r})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor],
          bwd: Callable[[np.ndarray], None] | None) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = bwd
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------- basic ops

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    data = np.matmul(a.data, b.data)

    def bwd(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            _accumulate(a, _unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            _accumulate(b, _unbroadcast(gb, b.shape))

    return _make(data, (a, b), bwd)


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last dimension."""
    lead = tensors[0].shape[:-1]
    for t in tensors[1:]:
        if t.shape[:-1] != lead:
            raise ShapeError(
                f"concat: leading dims differ, {tensors[0].shape} vs {t.shape}")
    data = np.concatenate([t.data for t in tensors], axis=-1)
    widths = [t.shape[-1] for t in tensors]

    def bwd(g):
        start = 0
        for t, w in zip(tensors, widths):
            _accumulate(t, g[..., start:start + w])
            start += w

    return _make(data, tuple(tensors), bwd)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup: result[..., :] = table[indices[...], :]."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(
            f"embedding index out of range [0, {table.shape[0]}): "
            f"min={idx.min()}, max={idx.max()}")
    data = table.data[idx]

    def bwd(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, g)

    return _make(data, (table,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def bwd(g):
        _accumulate(a, g.reshape(a.shape))

    return _make(data, (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    data = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def bwd(g):
        _accumulate(a, np.transpose(g, inv))

    return _make(data, (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum())

    def bwd(g):
        _accumulate(a, np.broadcast_to(g, a.shape).copy())

    return _make(data, (a,), bwd)


def masked_mean(a: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of `a` over positions where mask is 1; mask is non-differentiable."""
    m = np.asarray(mask, dtype=np.float64)
    n = m.sum()
    if n == 0:
        raise ValueError("masked_mean: empty mask")
    data = np.asarray((a.data * m).sum() / n)

    def bwd(g):
        _accumulate(a, g * m / n)

    return _make(data, (a,), bwd)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def bwd(g):
        _accumulate(a, g / a.data)

    return _make(data, (a,), bwd)


def power(a: Tensor, exponent: float) -> Tensor:
    data = a.data ** exponent

    def bwd(g):
        if exponent == 0:
            _accumulate(a, np.zeros_like(a.data))
        else:
            _accumulate(a, g * exponent * a.data ** (exponent - 1))

    return _make(data, (a,), bwd)


# ----------------------------------------------------------- neural-net ops

def softmax(a: Tensor) -> Tensor:
    """Softmax over the last dimension."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        _accumulate(a, data * (g - dot))

    return _make(data, (a,), bwd)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last dimension to zero mean / unit variance, then affine."""
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} "
            f"do not match feature dim of {a.shape}")
    mean = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mean
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    data = norm * gain.data + bias.data

    def bwd(g):
        d = a.shape[-1]
        if gain.requires_grad:
            axes = tuple(range(g.ndim - 1))
            _accumulate(gain, (g * norm).sum(axis=axes))
        if bias.requires_grad:
            axes = tuple(range(g.ndim - 1))
            _accumulate(bias, g.sum(axis=axes))
        if a.requires_grad:
            gn = g * gain.data
            term = gn - gn.mean(axis=-1, keepdims=True) \
                - norm * (gn * norm).mean(axis=-1, keepdims=True)
            _accumulate(a, term * inv)

    return _make(data, (a, gain, bias), bwd)


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    cdf = 0.5 * (1.0 + erf(a.data / _SQRT2))
    data = a.data * cdf

    def bwd(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data ** 2)
        _accumulate(a, g * (cdf + a.data * pdf))

    return _make(data, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    data = np.where(a.data >= 0,
                    1.0 / (1.0 + np.exp(-np.abs(a.data))),
                    np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def bwd(g):
        _accumulate(a, g * data * (1.0 - data))

    return _make(data, (a,), bwd)


def attention(q: Tensor, k: Tensor, v: Tensor,
              mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention: softmax(QK^T / sqrt(d)) V.

    `mask` is additive (0 keep, large negative drop), broadcastable to the
    score shape [..., n_q, n_k].
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention: query dim {q.shape} vs key dim {k.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention: key count {k.shape} vs value count {v.shape}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = matmul(mul(q, _wrap(scale)), transpose(k, _swap_last2(k.ndim)))
    if mask is not None:
        scores = add(scores, _wrap(np.asarray(mask, dtype=np.float64)))
    return matmul(softmax(scores), v)


def _swap_last2(ndim: int) -> tuple[int, ...]:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


# ----------------------------------------------------------------- backward

def backward(loss: Tensor) -> None:
    """Accumulate d loss / d t into .grad for every reachable tensor."""
    if loss.data.ndim != 0:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor,
               eps: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences."""
    x.requires_grad = True
    x.zero_grad()
    loss = f(x)
    backward(loss)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(x.data)).item()
        flat[i] = orig - eps
        lo = f(Tensor(x.data)).item()
        flat[i] = orig
        nflat[i] = (hi - lo) / (2 * eps)

    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# -------------------------------------------------------------------- adam

class AdamOptimizer:
    """Adam with per-group learning rates (encoder_decoder vs backbone)."""

    def __init__(self, params: Iterable[Parameter], lr_by_group: dict[str, float],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        for p in self.params:
            if p.group not in lr_by_group:
                raise ValueError(f"no learning rate for group {p.group!r}")
        self.lr_by_group = dict(lr_by_group)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {p.name: np.zeros_like(p.data) for p in self.params}
        self._v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p in self.params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in {p.name!r}")
            m = self._m[p.name]
            v = self._v[p.name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            lr = self.lr_by_group[p.group]
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


# ------------------------------------------------------------- checkpoints

_MAGIC = b"GZWD"


def save_checkpoint(path, params: Sequence[Parameter], header: dict) -> None:
    """Write header JSON + flat little-endian float64 arrays with a manifest."""
    manifest = {}
    offset = 0
    for p in params:
        manifest[p.name] = {"offset": offset, "shape": list(p.shape),
                            "group": p.group}
        offset += p.data.size * 8
    full = dict(header)
    full["manifest"] = manifest
    head = json.dumps(full).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        for p in params:
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, Parameter]]:
    """Return (header, name -> Parameter)."""
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        blob = f.read()
    params: dict[str, Parameter] = {}
    for name, entry in header["manifest"].items():
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        off = entry["offset"]
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        params[name] = Parameter(arr.copy(), name=name, group=entry["group"])
    return header, params
