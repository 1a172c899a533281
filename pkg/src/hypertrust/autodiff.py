"""Small reverse-mode differentiation engine over float64 numpy arrays.

Operations on :class:`Var` always compute their value. They are recorded only
while a :class:`Tape` is active on the current thread; outside a tape the
same code runs as plain forward evaluation (used for inference and for the
finite-difference oracle).

The tape appends nodes in creation order, which is already a topological
order, so the backward pass is a single reversed sweep.
"""

from __future__ import annotations

import threading
from typing import Callable, Mapping

import numpy as np

from .kernels import csr_spmm, csr_spmm_sorted

_local = threading.local()


class ShapeError(ValueError):
    pass


def _active_tape() -> "Tape | None":
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Var:
    __slots__ = ("value", "grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, value, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents: tuple[Var, ...] = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self) -> "Var":
        return transpose(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Var{label}(shape={self.value.shape})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


class Tape:
    """Records operations for one backward pass.

    ``parameter`` registers a leaf whose gradient is wanted; ``backward``
    fills ``tape.grads`` (name -> array) for every registered parameter.
    """

    def __init__(self):
        self.nodes: list[Var] = []
        self.params: dict[str, Var] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._tracked: set[int] = set()

    def __enter__(self):
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    def parameter(self, name: str, value) -> Var:
        v = Var(np.array(value, dtype=np.float64), name=name)
        self.params[name] = v
        self._tracked.add(id(v))
        return v

    def record(self, out: Var, parents, backward) -> Var:
        # ops on constants only are not recorded
        if not any(id(p) in self._tracked for p in parents):
            return out
        out._parents = tuple(parents)
        out._backward = backward
        self.nodes.append(out)
        self._tracked.add(id(out))
        return out

    def backward(self, root: Var) -> dict[str, np.ndarray]:
        if root.value.size != 1:
            raise ShapeError(f"backward needs a scalar root, got shape {root.value.shape}")
        for v in self.nodes:
            v.grad = None
        for p in self.params.values():
            p.grad = None
        root.grad = np.ones_like(root.value)
        for node in reversed(self.nodes):
            if node.grad is None or node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or id(parent) not in self._tracked:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g
        self.grads = {
            name: (p.grad if p.grad is not None else np.zeros_like(p.value))
            for name, p in self.params.items()
        }
        return self.grads


def _node(value, parents, backward) -> Var:
    out = Var(value)
    tape = _active_tape()
    if tape is not None:
        tape.record(out, parents, backward)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# --- elementwise ---------------------------------------------------------------


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return _node(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    _check_broadcast("subtract", a, b)
    sa, sb = a.shape, b.shape
    return _node(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    _check_broadcast("multiply", a, b)
    av, bv = a.value, b.value
    return _node(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def div(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    _check_broadcast("divide", a, b)
    av, bv = a.value, b.value
    out = av / bv
    return _node(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * out / bv, bv.shape)),
    )


def scale(a, c: float) -> Var:
    a = as_var(a)
    c = float(c)
    return _node(a.value * c, (a,), lambda g: (g * c,))


def relu(a) -> Var:
    a = as_var(a)
    mask = a.value > 0
    return _node(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def leaky_relu(a, slope: float = 0.2) -> Var:
    a = as_var(a)
    factor = np.where(a.value > 0, 1.0, slope)
    return _node(a.value * factor, (a,), lambda g: (g * factor,))


def tanh(a) -> Var:
    a = as_var(a)
    out = np.tanh(a.value)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sqrt(a) -> Var:
    a = as_var(a)
    out = np.sqrt(a.value)
    return _node(out, (a,), lambda g: (np.where(out > 0, g / (2.0 * np.where(out > 0, out, 1.0)), 0.0),))


# --- linear algebra ---------------------------------------------------------------


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.value, b.value
    return _node(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a) -> Var:
    a = as_var(a)
    return _node(a.value.T.copy(), (a,), lambda g: (g.T,))


class SparseMatrix:
    """Constant CSR matrix with its transpose, for products against Vars.

    With ``sorted_sums`` the forward product sums every output entry in
    value order (see ``kernels.csr_spmm_sorted``).
    """

    def __init__(self, rows, cols, data, shape, sorted_sums: bool = False):
        self.sorted_sums = sorted_sums
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        data = np.asarray(data, dtype=np.float64)
        self.shape = (int(shape[0]), int(shape[1]))
        self._fwd = self._csr(rows, cols, data, self.shape[0])
        self._bwd = self._csr(cols, rows, data, self.shape[1])

    @staticmethod
    def _csr(rows, cols, data, n_rows):
        order = np.lexsort((cols, rows))
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
        return indptr, cols[order], data[order]

    def dot(self, x: np.ndarray) -> np.ndarray:
        indptr, idx, val = self._fwd
        kernel = csr_spmm_sorted if self.sorted_sums else csr_spmm
        return kernel(indptr, idx, val, x, self.shape[0])

    def rdot(self, x: np.ndarray) -> np.ndarray:
        """Transpose product ``self.T @ x``."""
        indptr, idx, val = self._bwd
        return csr_spmm(indptr, idx, val, x, self.shape[1])

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        indptr, idx, val = self._fwd
        for r in range(self.shape[0]):
            sl = slice(indptr[r], indptr[r + 1])
            np.add.at(out[r], idx[sl], val[sl])
        return out


def spmm(s: SparseMatrix, a) -> Var:
    a = as_var(a)
    if a.value.ndim != 2 or s.shape[1] != a.shape[0]:
        raise ShapeError(f"spmm: incompatible shapes {s.shape} and {a.shape}")
    return _node(s.dot(a.value), (a,), lambda g: (s.rdot(g),))


# --- reductions -------------------------------------------------------------------


def total(a) -> Var:
    a = as_var(a)
    shape = a.shape
    return _node(np.array(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a, axis: int = 0) -> Var:
    """Mean along ``axis`` with the axis kept (for broadcasting back)."""
    a = as_var(a)
    n = a.shape[axis]
    shape = a.shape
    return _node(
        a.value.mean(axis=axis, keepdims=True),
        (a,),
        lambda g: (np.broadcast_to(g / n, shape).copy(),),
    )


def std(a, axis: int = 0, ddof: int = 1) -> Var:
    a = as_var(a)
    n = a.shape[axis]
    centered = a.value - a.value.mean(axis=axis, keepdims=True)
    out = np.sqrt((centered**2).sum(axis=axis, keepdims=True) / (n - ddof))

    def back(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g * centered / ((n - ddof) * safe), 0.0),)

    return _node(out, (a,), back)


def frobenius_sq(a) -> Var:
    a = as_var(a)
    av = a.value
    return _node(np.array(np.einsum("ij,ij->", av, av)), (a,), lambda g: (2.0 * g * av,))


def gram_identity_gap(a) -> Var:
    """``||a^T a - I||_F^2`` with I sized by the column count of ``a``.

    Evaluated through the smaller of the two Gram matrices.
    """
    a = as_var(a)
    av = a.value
    n, d = av.shape
    if n < d:
        k = av @ av.T
        value = np.einsum("ij,ij->", k, k) - 2.0 * np.einsum("ij,ij->", av, av) + d
        grad = lambda g: (4.0 * g * (k @ av - av),)  # noqa: E731
    else:
        c = av.T @ av
        c[np.diag_indices(d)] -= 1.0
        value = np.einsum("ij,ij->", c, c)
        grad = lambda g: (4.0 * g * (av @ c),)  # noqa: E731
    return _node(np.array(max(value, 0.0)), (a,), grad)


# --- constants --------------------------------------------------------------------


def diag_inverse(v, eps: float = 1e-12) -> np.ndarray:
    """Elementwise ``1 / (v + eps)``; the diagonal of an inverted degree matrix."""
    return 1.0 / (np.asarray(v, dtype=np.float64) + eps)


# --- drivers ----------------------------------------------------------------------


Computation = Callable[[Mapping[str, Var]], Var]


def evaluate_with_gradients(computation: Computation, params: Mapping[str, np.ndarray]):
    """Run ``computation`` on a fresh tape; return ``(loss, grads)``."""
    with Tape() as tape:
        vars_ = {name: tape.parameter(name, value) for name, value in params.items()}
        root = computation(vars_)
        if not isinstance(root, Var) or root.value.size != 1:
            raise ShapeError(f"computation must return a scalar Var, got {root!r}")
        grads = tape.backward(root)
    return float(root.value), grads


def _forward(computation: Computation, params: Mapping[str, np.ndarray]) -> float:
    out = computation({k: Var(v) for k, v in params.items()})
    return float(as_var(out).value)


def finite_difference_gradient(computation: Computation, params: Mapping[str, np.ndarray], h: float = 1e-5):
    """Central differences, one parameter entry at a time."""
    if h <= 0:
        raise ValueError("h must be positive")
    work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    grads = {}
    for name, arr in work.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = _forward(computation, work)
            flat[i] = orig - h
            down = _forward(computation, work)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads
