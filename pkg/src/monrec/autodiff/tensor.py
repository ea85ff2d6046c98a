"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every op builds its output eagerly and keeps a closure that maps the output
adjoint to input adjoints. ``backward`` topologically orders the recorded ops
reachable from a scalar loss (the tape) and replays them in reverse, visiting
each record once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised as soon as an op produces NaN or Inf."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "name")
    __hash__ = object.__hash__

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.op = "leaf"
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_not_scalar(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    # operator sugar
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, idx): return index(self, idx)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def _raise_not_scalar(t: Tensor):
    raise ValueError(f"expected a scalar tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"op {op!r} produced non-finite values")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    out.op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data ** 2, (a,), lambda g: (2.0 * a.data * g,), "square")


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NonFiniteError("log of non-positive value")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient is zero where the clamp is active."""
    a = as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,), "clip")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # subgradient at 0 is 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def hinge(a) -> Tensor:
    """Positive part ``[a]_+``; same op as relu, named for loss code."""
    return relu(a)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)
    return _make(s, (a,), back, "softmax")


# reductions and shape ops

def sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return _make(out, (a,), back, "sum")


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape) / n,)
    return _make(out, (a,), back, "mean")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back, "concat")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T, (a,), lambda g: (g.T,), "transpose")


def index(a, idx) -> Tensor:
    a = as_tensor(a)

    def back(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)
    return _make(a.data[idx], (a,), back, "index")


def gather_rows(a, rows) -> Tensor:
    """``a[rows]`` for an integer row index array (rows may repeat)."""
    rows = np.asarray(rows, dtype=np.int64)
    a = as_tensor(a)

    def back(g):
        out = np.zeros_like(a.data)
        np.add.at(out, rows, g)
        return (out,)
    return _make(a.data[rows], (a,), back, "gather_rows")


def segment_sum(a, segments, num_segments: int) -> Tensor:
    """Sum rows of ``a`` into ``num_segments`` buckets given per-row ids."""
    segments = np.asarray(segments, dtype=np.int64)
    a = as_tensor(a)
    out = np.zeros((num_segments,) + a.shape[1:])
    np.add.at(out, segments, a.data)
    return _make(out, (a,), lambda g: (g[segments],), "segment_sum")


def segment_softmax(a, segments, num_segments: int) -> Tensor:
    """Softmax over rows sharing a segment id, independently per column."""
    segments = np.asarray(segments, dtype=np.int64)
    a = as_tensor(a)
    seg_max = np.full((num_segments,) + a.shape[1:], -np.inf)
    np.maximum.at(seg_max, segments, a.data)
    e = np.exp(a.data - seg_max[segments])
    denom = np.zeros((num_segments,) + a.shape[1:])
    np.add.at(denom, segments, e)
    s = e / denom[segments]

    def back(g):
        gs = np.zeros((num_segments,) + a.shape[1:])
        np.add.at(gs, segments, g * s)
        return (s * (g - gs[segments]),)
    return _make(s, (a,), back, "segment_softmax")


def _segment_softmax_np(raw: np.ndarray, seg: np.ndarray, n: int) -> np.ndarray:
    seg_max = np.full((n,) + raw.shape[1:], -np.inf)
    np.maximum.at(seg_max, seg, raw)
    e = np.exp(raw - seg_max[seg])
    denom = np.zeros((n,) + raw.shape[1:])
    np.add.at(denom, seg, e)
    return e / denom[seg]


def _rowdot(a: np.ndarray, ia: np.ndarray, b: np.ndarray, ib: np.ndarray, heads: int,
            chunk: int = 4096) -> np.ndarray:
    """Per-edge, per-head dot products ``a[ia[e]] . b[ib[e]]`` computed in chunks."""
    e = len(ia)
    d = a.shape[1] // heads
    out = np.empty((e, heads))
    for s in range(0, e, chunk):
        sl = slice(s, s + chunk)
        out[sl] = (a[ia[sl]].reshape(-1, heads, d) * b[ib[sl]].reshape(-1, heads, d)).sum(-1)
    return out


def edge_attention(q, k, v, src, dst, heads: int, scale: float) -> Tensor:
    """Multi-head attention messages summed per receiving node.

    For edge ``e`` from key/value row ``src[e]`` to node ``dst[e]`` and head
    ``h``: ``alpha = softmax over dst of scale * q[dst] . k[src]`` and the
    message is ``alpha * v[src]``. Only the ``(E, heads)`` weights are kept;
    aggregation and the reverse pass use sparse products so memory stays
    linear in nodes plus edges rather than edges times width.
    """
    from scipy import sparse

    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    n, width = q.shape
    r = k.shape[0]
    if width % heads or k.shape[1] != width or v.shape != k.shape:
        raise ValueError(f"edge_attention shapes q{q.shape} k{k.shape} v{v.shape} with {heads} heads")
    d = width // heads
    if len(dst) == 0:
        return _make(np.zeros((n, width)), (q, k, v), lambda g: (None, None, None), "edge_attention")
    raw = _rowdot(q.data, dst, k.data, src, heads) * scale
    alpha = _segment_softmax_np(raw, dst, n)
    mats = [sparse.csr_matrix((alpha[:, h], (dst, src)), shape=(n, r)) for h in range(heads)]
    out = np.empty((n, width))
    for h in range(heads):
        out[:, h * d:(h + 1) * d] = mats[h] @ v.data[:, h * d:(h + 1) * d]

    def back(g):
        dv = np.empty((r, width))
        for h in range(heads):
            dv[:, h * d:(h + 1) * d] = mats[h].T @ g[:, h * d:(h + 1) * d]
        dalpha = _rowdot(g, dst, v.data, src, heads)
        seg = np.zeros((n, heads))
        np.add.at(seg, dst, alpha * dalpha)
        draw = alpha * (dalpha - seg[dst]) * scale
        dq = np.empty((n, width))
        dk = np.empty((r, width))
        for h in range(heads):
            sm = sparse.csr_matrix((draw[:, h], (dst, src)), shape=(n, r))
            dq[:, h * d:(h + 1) * d] = sm @ k.data[:, h * d:(h + 1) * d]
            dk[:, h * d:(h + 1) * d] = sm.T @ q.data[:, h * d:(h + 1) * d]
        return dq, dk, dv
    return _make(out, (q, k, v), back, "edge_attention")


def l2norm(a, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; gradient at the zero vector is 0."""
    a = as_tensor(a)
    n = np.sqrt((a.data ** 2).sum(axis=axis))

    def back(g):
        safe = np.where(n > 0, n, 1.0)
        return (np.expand_dims(g / safe * (n > 0), axis) * a.data,)
    return _make(n, (a,), back, "l2norm")


def sqdist(a, b) -> Tensor:
    """Row-wise squared Euclidean distance between same-shape operands."""
    a, b = as_tensor(a), as_tensor(b)
    d = a.data - b.data
    out = (d ** 2).sum(axis=-1)

    def back(g):
        gd = 2.0 * np.expand_dims(g, -1) * d
        return (_unbroadcast(gd, a.shape), _unbroadcast(-gd, b.shape))
    return _make(out, (a, b), back, "sqdist")


# reverse pass

@dataclass
class TapeRecord:
    op: str
    inputs: tuple[int, ...]
    output: int


class Tape:
    """Topologically ordered op records reachable from one output."""

    def __init__(self, root: Tensor):
        self.tensors: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                self.tensors.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in t._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.records = [TapeRecord(t.op, tuple(id(p) for p in t._parents), id(t))
                        for t in self.tensors if t._backward is not None]

    def __len__(self) -> int:
        return len(self.records)


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Populate ``.grad`` on every requires-grad tensor reachable from ``loss``.

    Returns a map from leaf tensors to their accumulated gradients.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    tape = Tape(loss)
    adj: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[Tensor, np.ndarray] = {}
    for t in reversed(tape.tensors):
        g = adj.pop(id(t), None)
        if g is None:
            continue
        if t._backward is None:
            t.grad = g if t.grad is None else t.grad + g
            leaves[t] = t.grad
            continue
        for p, gp in zip(t._parents, t._backward(g)):
            if gp is None or not p.requires_grad:
                continue
            prev = adj.get(id(p))
            adj[id(p)] = gp if prev is None else prev + gp
    return leaves


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5,
               max_coords: int | None = 64, seed: int = 0) -> float:
    """Largest relative error between autodiff and central differences.

    ``f`` rebuilds the scalar from ``params`` on each call. Coordinates are
    sampled (up to ``max_coords`` per parameter); a coordinate is dropped when
    its one-sided differences disagree, which is how kinks such as ReLU at 0
    show up.
    """
    for p in params:
        p.grad = None
    loss = f()
    if not np.isfinite(loss.data).all():
        raise NonFiniteError("grad_check objective is not finite")
    backward(loss)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        auto = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            fp = f().item()
            flat[c] = orig - eps
            fm = f().item()
            flat[c] = orig
            f0 = loss.item()
            fwd, bwd = (fp - f0) / eps, (f0 - fm) / eps
            if abs(fwd - bwd) > 1e-6 and abs(fwd - bwd) > 1e-2 * max(abs(fwd), abs(bwd)):
                continue
            num = (fp - fm) / (2 * eps)
            err = abs(auto.reshape(-1)[c] - num) / (abs(num) + 1e-8)
            worst = max(worst, err)
    return worst
