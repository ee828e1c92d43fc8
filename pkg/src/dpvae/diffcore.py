"""Reverse-mode differentiation over numpy arrays.

Every operation produces a :class:`Node` holding its value and the local
partial derivatives with respect to its inputs.  While a :class:`Tape` is
active the node is appended to it, so the tape is in topological order by
construction and :func:`backward` only has to walk it in reverse.

Outside of any tape the same operations just compute values, which is how
the metrics evaluate trained models without paying for bookkeeping.

A partial is either an array (elementwise local derivative, multiplied
with the upstream adjoint and summed down to the input's shape) or a
callable mapping the upstream adjoint to the input's adjoint contribution.
"""
from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping
from typing import Any

import numpy as np

LEAKY_SLOPE = 0.2

_TAPES: list["Tape"] = []


class DomainError(ArithmeticError):
    """Raised when log or division receives an operand outside its domain."""

    def __init__(self, kind: str, value):
        self.kind = kind
        self.value = value
        super().__init__(f"{kind}: operand outside domain: {value!r}")


class GradCheckError(ArithmeticError):
    """The checked function was non-finite at a perturbed point."""


class Node:
    """A recorded value together with its adjoint and parent links."""

    __slots__ = ("value", "parents", "kind", "_adj", "_tape", "_index")
    __array_ufunc__ = None

    def __init__(self, value, parents=(), kind: str = "leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self.kind = kind
        self._adj = None
        self._tape = None
        self._index = -1

    @property
    def adjoint(self) -> np.ndarray:
        if self._adj is None:
            return np.zeros_like(self.value)
        return self._adj

    @property
    def partials(self) -> tuple:
        return tuple(p for _, p in self.parents)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __len__(self) -> int:
        return len(self.value)

    def __repr__(self) -> str:
        return f"Node({self.kind}, value={self.value!r})"

    def __float__(self) -> float:
        return float(self.value)

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __matmul__ = lambda self, o: matmul(self, o)
    __rmatmul__ = lambda self, o: matmul(o, self)
    __neg__ = lambda self: neg(self)
    __getitem__ = lambda self, idx: getitem(self, idx)

    def __pow__(self, p):
        if p != 2:
            raise NotImplementedError("only square is supported")
        return square(self)

    @property
    def T(self) -> "Node":
        return transpose(self)

    def sum(self, axis=None, keepdims=False) -> "Node":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False) -> "Node":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Node":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)


class Tape:
    """Ordered record of the nodes created while it is active.

    Use as a context manager; tapes nest, the innermost one records.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPES.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self.nodes)

    def append(self, node: Node) -> Node:
        node._tape = self
        node._index = len(self.nodes)
        self.nodes.append(node)
        return node

    def variable(self, value, name: str | None = None) -> Node:
        node = Node(np.array(value, dtype=np.float64), kind=name or "leaf")
        return self.append(node)


class no_tape:
    """Suspend recording inside the block."""

    def __enter__(self):
        self._saved = list(_TAPES)
        _TAPES.clear()

    def __exit__(self, *exc):
        _TAPES.extend(self._saved)


def active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def variable(value, name: str | None = None) -> Node:
    """Create a leaf node on the active tape (or a free node if none)."""
    tape = active_tape()
    if tape is None:
        return Node(value, kind=name or "leaf")
    return tape.variable(value, name)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=np.float64)


def record(kind: str, inputs, value, partials) -> Node:
    """Append a node computed from ``inputs`` with the given local partials.

    Inputs that are not nodes are treated as constants and their partials
    are dropped.
    """
    parents = [(x, p) for x, p in zip(inputs, partials) if isinstance(x, Node)]
    node = Node(value, parents, kind)
    tape = active_tape()
    if tape is not None:
        tape.append(node)
    return node


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(root: Node) -> None:
    """Fill every node's adjoint with d(root)/d(node).

    Adjoints left over from a previous pass over the same tape are cleared
    first, so repeated calls give identical results.
    """
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    tape = root._tape
    if tape is None:
        raise ValueError("root was not recorded on a tape")
    nodes = tape.nodes
    for node in nodes:
        node._adj = None
    root._adj = np.ones_like(root.value)
    for node in reversed(nodes[: root._index + 1]):
        g = node._adj
        if g is None:
            continue
        for parent, partial in node.parents:
            if callable(partial):
                contrib = partial(g)
            else:
                contrib = _unbroadcast(g * partial, parent.value.shape)
            if parent._adj is None:
                contrib = np.asarray(contrib, dtype=np.float64)
                if contrib.shape != parent.value.shape:
                    contrib = contrib.reshape(parent.value.shape)
                parent._adj = contrib
            else:
                parent._adj = parent._adj + contrib


# --- elementwise ------------------------------------------------------------


def add(a, b) -> Node:
    return record("add", (a, b), value_of(a) + value_of(b), (1.0, 1.0))


def sub(a, b) -> Node:
    return record("sub", (a, b), value_of(a) - value_of(b), (1.0, -1.0))


def mul(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    return record("mul", (a, b), va * vb, (vb, va))


def div(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    if np.any(vb == 0.0):
        raise DomainError("div", vb)
    return record("div", (a, b), va / vb, (1.0 / vb, -va / vb**2))


def neg(a) -> Node:
    return record("neg", (a,), -value_of(a), (-1.0,))


def exp(a) -> Node:
    out = np.exp(value_of(a))
    return record("exp", (a,), out, (out,))


def log(a) -> Node:
    va = value_of(a)
    if np.any(va <= 0.0):
        raise DomainError("log", va)
    return record("log", (a,), np.log(va), (1.0 / va,))


def tanh(a) -> Node:
    out = np.tanh(value_of(a))
    return record("tanh", (a,), out, (1.0 - out**2,))


def leaky_relu(a, slope: float = LEAKY_SLOPE) -> Node:
    va = value_of(a)
    d = np.where(va > 0.0, 1.0, slope)
    return record("leaky_relu", (a,), va * d, (d,))


def relu(a) -> Node:
    va = value_of(a)
    d = (va > 0.0).astype(np.float64)
    return record("relu", (a,), va * d, (d,))


def square(a) -> Node:
    va = value_of(a)
    return record("square", (a,), va * va, (2.0 * va,))


def abs_(a) -> Node:
    va = value_of(a)
    return record("abs", (a,), np.abs(va), (np.sign(va),))


# --- reductions and structure -------------------------------------------------


def sum_(a, axis=None, keepdims=False) -> Node:
    va = value_of(a)
    out = va.sum(axis=axis, keepdims=keepdims)
    shape = va.shape

    def partial(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape)

    return record("sum", (a,), out, (partial,))


def mean(a, axis=None, keepdims=False) -> Node:
    va = value_of(a)
    count = va.size if axis is None else np.prod([va.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def matmul(a, b) -> Node:
    va, vb = value_of(a), value_of(b)
    if va.ndim != 2 or vb.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {va.shape} @ {vb.shape}")
    return record(
        "matmul",
        (a, b),
        va @ vb,
        (lambda g: g @ vb.T, lambda g: va.T @ g),
    )


def dense(x, w, b) -> Node:
    """Affine map ``x @ w.T + b`` for a batch ``x`` (n, in) and weights (out, in)."""
    vx, vw = value_of(x), value_of(w)
    return record(
        "dense",
        (x, w, b),
        vx @ vw.T + value_of(b),
        (lambda g: g @ vw, lambda g: g.T @ vx, lambda g: g.sum(axis=0)),
    )


def transpose(a) -> Node:
    return record("transpose", (a,), value_of(a).T, (lambda g: g.T,))


def reshape(a, shape) -> Node:
    va = value_of(a)
    return record("reshape", (a,), va.reshape(shape), (lambda g: g.reshape(va.shape),))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(a, idx) -> Node:
    va = value_of(a)
    basic = _is_basic_index(idx)

    def partial(g):
        out = np.zeros_like(va)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return out

    return record("getitem", (a,), va[idx], (partial,))


def concat(items, axis: int = -1) -> Node:
    vals = [value_of(x) for x in items]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def piece(k):
        return lambda g: np.split(g, bounds, axis=axis)[k]

    return record("concat", tuple(items), out, tuple(piece(k) for k in range(len(items))))


def logsumexp(a, axis=None) -> Node:
    va = value_of(a)
    m = np.max(va, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.exp(va - m)
    tot = s.sum(axis=axis, keepdims=True)
    out = np.log(tot) + m
    weights = s / tot

    def partial(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return g * weights

    squeezed = out.reshape(()) if axis is None else np.squeeze(out, axis=axis)
    return record("logsumexp", (a,), squeezed, (partial,))


# --- parameters --------------------------------------------------------------


class ParamStore(Mapping):
    """Named, ordered trainable arrays with gradient accumulators."""

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self.buffer: np.ndarray | None = None

    def add(self, name: str, value) -> np.ndarray:
        if name in self._values:
            raise KeyError(f"duplicate parameter {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.buffer = None
        self._values[name] = arr
        self._grads[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __setitem__(self, name: str, value) -> None:
        arr = self._values[name]
        arr[...] = value

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def zero_grad(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0

    @property
    def size(self) -> int:
        return sum(v.size for v in self._values.values())

    def leaves(self) -> dict[str, Node]:
        """Bind every parameter to a fresh leaf on the active tape."""
        return {name: variable(v.copy(), name) for name, v in self._values.items()}

    def collect(self, leaves: Mapping[str, Node]) -> None:
        """Accumulate the adjoints of ``leaves`` into the gradient slots."""
        for name, node in leaves.items():
            if name in self._grads:
                self._grads[name] += node.adjoint

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, v in self._values.items():
            out.add(name, v)
        return out

    def consolidate(self) -> np.ndarray:
        """Move all values into one contiguous buffer; entries become views of it."""
        if self.buffer is None:
            buf = self.flat().copy()
            pos = 0
            for name, v in self._values.items():
                self._values[name] = buf[pos : pos + v.size].reshape(v.shape)
                pos += v.size
            self.buffer = buf
        return self.buffer

    def flat(self) -> np.ndarray:
        if not self._values:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self._values.values()])

    def set_flat(self, flat) -> None:
        pos = 0
        for v in self._values.values():
            v.ravel()[...] = flat[pos : pos + v.size]
            pos += v.size


def gradient(f: Callable[[Mapping[str, Any]], Node], params: ParamStore) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate ``f`` on a tape and return its value and parameter adjoints."""
    with Tape():
        leaves = params.leaves()
        out = f(leaves)
        backward(out)
    return float(out.value), {n: leaf.adjoint for n, leaf in leaves.items()}


def grad_check(
    f: Callable[[Mapping[str, Any]], Node],
    params: ParamStore,
    step: float = 1e-6,
    n_probe: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``f`` maps a name -> array/node mapping to a scalar and must be
    deterministic (freeze any noise before calling).  The error for each
    coordinate is ``|analytic - fd| / max(1, |fd|)``.  With ``n_probe`` only
    that many randomly chosen coordinates are perturbed.
    """
    _, grads = gradient(f, params)
    coords = [(name, i) for name in params for i in range(params[name].size)]
    if n_probe is not None and n_probe < len(coords):
        pick = np.random.default_rng(seed).choice(len(coords), n_probe, replace=False)
        coords = [coords[i] for i in sorted(pick)]
    worst = 0.0
    with no_tape():
        for name, i in coords:
            flat = params[name].reshape(-1)
            orig = flat[i]
            flat[i] = orig + step
            hi = float(value_of(f(params)))
            flat[i] = orig - step
            lo = float(value_of(f(params)))
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise GradCheckError(f"non-finite value perturbing {name}[{i}]")
            fd = (hi - lo) / (2.0 * step)
            an = grads[name].reshape(-1)[i]
            worst = max(worst, abs(an - fd) / max(1.0, abs(fd)))
    return worst
