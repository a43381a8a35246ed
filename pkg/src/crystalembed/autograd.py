"""Dense float64 tensors with reverse-mode differentiation.

Every operation records its inputs and a backward closure on the implicit
tape (the operation graph); `backward` runs one reverse-topological sweep,
accumulating gradients additively across fan-out. All values are checked
finite after every op. Broadcasting is limited to row-wise bias addition;
everything else demands exact shapes.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import NumericsError, ShapeError

logger = logging.getLogger(__name__)


class Tensor:
    """A node on the tape: float64 data plus gradient slot and parents."""

    __slots__ = ("data", "grad", "name", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise NumericsError(
                f"non-finite values in tensor{' ' + name if name else ''}"
            )
        self.grad = None
        self.name = name
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _ensure_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse sweep from this scalar, filling .grad along the tape."""
        if self.data.shape != ():
            raise ShapeError(f"backward needs a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                if id(p) not in visited:
                    stack.append((p, False))
        self._ensure_grad()
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)
        for node in topo:
            if node.grad is not None and not np.all(np.isfinite(node.grad)):
                raise NumericsError("non-finite gradient encountered")

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"


def parameter(data, name: str) -> Tensor:
    """A trainable leaf tensor."""
    return Tensor(np.array(data, dtype=np.float64), name=name)


def constant(data) -> Tensor:
    return Tensor(data)


def _grads(*tensors: Tensor):
    for t in tensors:
        t._ensure_grad()


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts a row-vector bias against a 2-D tensor."""
    if a.data.shape == b.data.shape:
        def back(g):
            _grads(a, b)
            a.grad += g
            b.grad += g
        return Tensor(a.data + b.data, (a, b), back)
    if a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]:
        def back(g):
            _grads(a, b)
            a.grad += g
            b.grad += g.sum(axis=0)
        return Tensor(a.data + b.data[None, :], (a, b), back)
    raise ShapeError(f"add: incompatible shapes {a.data.shape} and {b.data.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub: incompatible shapes {a.data.shape} and {b.data.shape}")

    def back(g):
        _grads(a, b)
        a.grad += g
        b.grad -= g

    return Tensor(a.data - b.data, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: incompatible shapes {a.data.shape} and {b.data.shape}")

    def back(g):
        _grads(a, b)
        a.grad += g * b.data
        b.grad += g * a.data

    return Tensor(a.data * b.data, (a, b), back)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def back(g):
        _grads(a)
        a.grad += c * g

    return Tensor(a.data * c, (a,), back)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}"
        )

    def back(g):
        _grads(a, b)
        a.grad += g @ b.data.T
        b.grad += a.data.T @ g

    return Tensor(a.data @ b.data, (a, b), back)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: need 2-D, got {a.data.shape}")

    def back(g):
        _grads(a)
        a.grad += g.T

    return Tensor(a.data.T.copy(), (a,), back)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: empty input")
    ndim = tensors[0].data.ndim
    if any(t.data.ndim != ndim for t in tensors) or axis >= ndim:
        raise ShapeError("concat: rank mismatch")
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        pieces = np.split(g, bounds, axis=axis)
        for t, piece in zip(tensors, pieces):
            _grads(t)
            t.grad += piece

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back)


def reshape(a: Tensor, shape) -> Tensor:
    def back(g):
        _grads(a)
        a.grad += g.reshape(a.data.shape)

    return Tensor(a.data.reshape(shape), (a,), back)


def row_gather(a: Tensor, idx) -> Tensor:
    """Select rows of a 2-D tensor; gradients scatter-add back."""
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeError(f"row_gather: need 2-D, got {a.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise ShapeError("row_gather: index out of range")

    def back(g):
        _grads(a)
        np.add.at(a.grad, idx, g)

    return Tensor(a.data[idx], (a,), back)


def row_scatter_add(m: Tensor, idx, num_rows: int) -> Tensor:
    """Sum rows of m into num_rows buckets given by idx (empty m allowed)."""
    idx = np.asarray(idx, dtype=np.int64)
    if m.data.ndim != 2:
        raise ShapeError(f"row_scatter_add: need 2-D, got {m.data.shape}")
    if len(idx) != m.data.shape[0]:
        raise ShapeError("row_scatter_add: index length mismatch")
    out = np.zeros((num_rows, m.data.shape[1]))
    if idx.size:
        np.add.at(out, idx, m.data)

    def back(g):
        _grads(m)
        if idx.size:
            m.grad += g[idx]

    return Tensor(out, (m,), back)


def take(a: Tensor, rows, cols) -> Tensor:
    """Gather a.data[rows, cols] into a 1-D tensor."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if a.data.ndim != 2 or rows.shape != cols.shape:
        raise ShapeError("take: need 2-D tensor and matching index arrays")

    def back(g):
        _grads(a)
        np.add.at(a.grad, (rows, cols), g)

    return Tensor(a.data[rows, cols], (a,), back)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def back(g):
        _grads(a)
        a.grad += g * s * (1.0 - s)

    return Tensor(s, (a,), back)


def silu(a: Tensor) -> Tensor:
    """x * sigmoid(x)."""
    s = _sigmoid(a.data)

    def back(g):
        _grads(a)
        a.grad += g * (s + a.data * s * (1.0 - s))

    return Tensor(a.data * s, (a,), back)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):  # overflow becomes inf, caught by Tensor
        out = np.exp(a.data)

    def back(g):
        _grads(a)
        a.grad += g * out

    return Tensor(out, (a,), back)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise NumericsError("log: non-positive input")

    def back(g):
        _grads(a)
        a.grad += g / a.data

    return Tensor(np.log(a.data), (a,), back)


def abs_(a: Tensor) -> Tensor:
    """|x| with sign subgradient (0 at 0)."""
    sgn = np.sign(a.data)

    def back(g):
        _grads(a)
        a.grad += g * sgn

    return Tensor(np.abs(a.data), (a,), back)


def sum_all(a: Tensor) -> Tensor:
    def back(g):
        _grads(a)
        a.grad += g

    return Tensor(a.data.sum(), (a,), back)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    if n == 0:
        raise ShapeError("mean_all: empty tensor")

    def back(g):
        _grads(a)
        a.grad += g / n

    return Tensor(a.data.mean(), (a,), back)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over axis 0 of a 2-D tensor, kept as a 1-row matrix."""
    if a.data.ndim != 2 or a.data.shape[0] == 0:
        raise ShapeError(f"mean_rows: need non-empty 2-D, got {a.data.shape}")
    n = a.data.shape[0]

    def back(g):
        _grads(a)
        a.grad += np.broadcast_to(g / n, a.data.shape)

    return Tensor(a.data.mean(axis=0, keepdims=True), (a,), back)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction; rows sum to 1."""
    if a.data.ndim != 2 or a.data.shape[1] < 1:
        raise ShapeError(f"softmax_rows: need 2-D with columns, got {a.data.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def back(g):
        _grads(a)
        inner = (g * s).sum(axis=1, keepdims=True)
        a.grad += s * (g - inner)

    return Tensor(s, (a,), back)


def logsumexp_rows(a: Tensor) -> Tensor:
    """Row-wise log-sum-exp with max subtraction, returning a 1-D tensor."""
    if a.data.ndim != 2 or a.data.shape[1] < 1:
        raise ShapeError(f"logsumexp_rows: need 2-D with columns, got {a.data.shape}")
    m = a.data.max(axis=1, keepdims=True)
    e = np.exp(a.data - m)
    z = e.sum(axis=1, keepdims=True)
    out = (m + np.log(z)).ravel()
    soft = e / z

    def back(g):
        _grads(a)
        a.grad += soft * g[:, None]

    return Tensor(out, (a,), back)


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Rows scaled to unit norm; rows with norm <= eps are divided by eps."""
    if a.data.ndim != 2:
        raise ShapeError(f"l2_normalize_rows: need 2-D, got {a.data.shape}")
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    small = norms <= eps
    n_small = int(small.sum())
    if n_small:
        logger.warning("l2_normalize_rows: %d near-zero rows hit the eps guard", n_small)
    denom = np.where(small, eps, norms)
    y = a.data / denom

    def back(g):
        _grads(a)
        # unit-norm rows: project out the radial component; guarded rows are
        # a constant 1/eps scaling
        inner = (g * y).sum(axis=1, keepdims=True)
        full = (g - y * inner) / denom
        guarded = g / eps
        a.grad += np.where(small, guarded, full)

    return Tensor(y, (a,), back)


def bilinear(hi: Tensor, w: Tensor, hj: Tensor, b: Tensor) -> Tensor:
    """Pairwise bilinear form: out[p, k] = hi[p] . w[:, k, :] . hj[p] + b[k]."""
    if (
        hi.data.ndim != 2
        or hj.data.shape != hi.data.shape
        or w.data.ndim != 3
        or w.data.shape[0] != hi.data.shape[1]
        or w.data.shape[2] != hj.data.shape[1]
        or b.data.shape != (w.data.shape[1],)
    ):
        raise ShapeError(
            f"bilinear: incompatible shapes {hi.data.shape}, {w.data.shape}, "
            f"{hj.data.shape}, {b.data.shape}"
        )
    out = np.einsum("pd,dke,pe->pk", hi.data, w.data, hj.data) + b.data[None, :]

    def back(g):
        _grads(hi, w, hj, b)
        hi.grad += np.einsum("pk,dke,pe->pd", g, w.data, hj.data)
        hj.grad += np.einsum("pk,dke,pd->pe", g, w.data, hi.data)
        w.grad += np.einsum("pd,pk,pe->dke", hi.data, g, hj.data)
        b.grad += g.sum(axis=0)

    return Tensor(out, (hi, w, hj, b), back)


def grad_check(f, params, h: float = 1e-5, floor: float = 1e-2) -> float:
    """Max relative error between analytic gradients and central differences.

    f() must rebuild its graph from the current param data and return a
    scalar Tensor. Relative error per coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor turns
    disagreements between tiny gradients into an absolute criterion.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    loss.backward()
    analytic = [np.array(p.grad) if p.grad is not None else np.zeros_like(p.data)
                for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.ravel()
        ga_flat = ga.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            f_plus = f().item()
            flat[k] = orig - h
            f_minus = f().item()
            flat[k] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(ga_flat[k]), abs(numeric), floor)
            worst = max(worst, abs(ga_flat[k] - numeric) / denom)
    return worst
