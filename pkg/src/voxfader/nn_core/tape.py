"""Tape-based reverse-mode differentiation over dense float64 arrays.

Every primitive accepts either plain arrays or :class:`Var` handles. When no
argument is a ``Var`` the primitive evaluates eagerly and returns an ndarray
(or a float for scalar losses); otherwise the application is appended to the
owning :class:`Tape` and a new ``Var`` is returned.

    >>> tape = Tape()
    >>> x = tape.leaf(np.array([3.0]), name="x")
    >>> loss = sum_(mul(x, x))
    >>> backward(tape, loss)["x"]
    array([6.])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..errors import DimensionError, DomainError, NormalizationError, UsageError


class Var:
    """Handle to a value stored on a tape."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.index]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def name(self) -> str | None:
        return self.tape.leaf_names.get(self.index)

    def __repr__(self):
        return f"Var(index={self.index}, shape={self.shape})"

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


@dataclass(frozen=True)
class Entry:
    """One primitive application: ``values[output] = op(values[inputs], **attrs)``."""

    op: str
    inputs: tuple[int, ...]
    output: int
    attrs: Mapping[str, Any] = field(default_factory=dict)


class Tape:
    """Ordered record of primitive applications (the computation record).

    Entries are appended in evaluation order, so the record is acyclic by
    construction and each value is produced by at most one entry.
    """

    def __init__(self):
        self.values: list[np.ndarray] = []
        self.entries: list[Entry] = []
        self.leaf_names: dict[int, str] = {}
        self._producer: dict[int, int] = {}

    def __len__(self):
        return len(self.entries)

    def leaf(self, value, name: str | None = None) -> Var:
        """Register an input value. Named leaves receive gradients from :func:`backward`."""
        arr = np.array(value, dtype=np.float64)
        if name is not None:
            if name in self.leaf_names.values():
                raise UsageError(f"duplicate leaf name {name!r}")
        idx = len(self.values)
        self.values.append(arr)
        if name is not None:
            self.leaf_names[idx] = name
        return Var(self, idx)

    def constant(self, value) -> Var:
        return self.leaf(value)

    def _record(self, op: str, inputs: tuple[Var, ...], attrs: dict) -> Var:
        fwd = PRIMITIVES[op][0]
        out = fwd(*(v.value for v in inputs), **attrs)
        idx = len(self.values)
        self.values.append(out)
        self._producer[idx] = len(self.entries)
        self.entries.append(Entry(op, tuple(v.index for v in inputs), idx, attrs))
        return Var(self, idx)

    def replay(self, overrides: Mapping[str, np.ndarray] | None = None) -> list[np.ndarray]:
        """Re-evaluate the record with some named leaves replaced.

        Returns the full list of values; the tape itself is left unchanged.
        """
        values = list(self.values)
        if overrides:
            by_name = {n: i for i, n in self.leaf_names.items()}
            for name, val in overrides.items():
                i = by_name[name]
                val = np.asarray(val, dtype=np.float64)
                if val.shape != values[i].shape:
                    raise DimensionError(f"override for {name!r} has shape {val.shape}, expected {values[i].shape}")
                values[i] = val
        for e in self.entries:
            values[e.output] = PRIMITIVES[e.op][0](*(values[i] for i in e.inputs), **e.attrs)
        return values


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    """Reverse sweep from a scalar ``loss``; returns gradients keyed by leaf name."""
    if not isinstance(loss, Var) or loss.tape is not tape:
        raise UsageError("loss must be a Var recorded on this tape")
    if loss.value.size != 1:
        raise UsageError(f"loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
    stop = tape._producer.get(loss.index, -1)
    for e in reversed(tape.entries[: stop + 1]):
        g = grads.pop(e.output, None)
        if g is None:
            continue
        vjp = PRIMITIVES[e.op][1]
        in_vals = [tape.values[i] for i in e.inputs]
        parts = vjp(g, tape.values[e.output], *in_vals, **e.attrs)
        for i, gi in zip(e.inputs, parts):
            if gi is None:
                continue
            if i in grads:
                grads[i] = grads[i] + gi
            else:
                grads[i] = gi
    out = {}
    for idx, name in tape.leaf_names.items():
        g = grads.get(idx)
        out[name] = np.zeros_like(tape.values[idx]) if g is None else np.asarray(g, dtype=np.float64).reshape(tape.values[idx].shape)
    return out


# --------------------------------------------------------------------------
# primitive implementations: name -> (forward, vjp)
# vjp(g, out, *inputs, **attrs) returns one gradient (or None) per input
# --------------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a, b):
    try:
        np.broadcast_shapes(np.shape(a), np.shape(b))
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast shapes {np.shape(a)} and {np.shape(b)}") from exc


def _affine_fwd(W, b, x):
    if W.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1:] != (W.shape[1],) or x.ndim > 2:
        raise DimensionError(f"affine: W{W.shape}, b{b.shape}, x{x.shape} do not conform")
    return x @ W.T + b


def _affine_vjp(g, out, W, b, x):
    if x.ndim == 1:
        return np.outer(g, x), g, W.T @ g
    return g.T @ x, g.sum(axis=0), g @ W


def _matmul_fwd(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: {a.shape} @ {b.shape}")
    return a @ b


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    # exp of the stable log-sigmoid avoids overflow for large |x|
    return np.exp(_log_sigmoid(x))


def _bce_elementwise(logit, target):
    # -[t log s(l) + (1-t) log(1-s(l))] with log(1-s(l)) = log s(-l)
    return -(target * _log_sigmoid(logit) + (1.0 - target) * _log_sigmoid(-logit))


def _bce_fwd(logit, target):
    if np.shape(logit) != np.shape(target):
        raise DimensionError(f"bce: logit {np.shape(logit)} vs target {np.shape(target)}")
    if np.any(target < 0.0) or np.any(target > 1.0) or not np.all(np.isfinite(target)):
        raise DomainError("bce target must lie in [0, 1]")
    return np.asarray(np.mean(_bce_elementwise(logit, target)))


def _bce_vjp(g, out, logit, target):
    n = logit.size
    return g * (_sigmoid(logit) - target) / n, g * (-logit) / n


def _mae_fwd(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"mae: {a.shape} vs {b.shape}")
    return np.asarray(np.mean(np.abs(a - b)))


def _mae_vjp(g, out, a, b):
    s = g * np.sign(a - b) / a.size
    return s, -s


def _normalize_fwd(x):
    if x.ndim != 2:
        raise DimensionError(f"l2_normalize_rows expects a matrix, got {x.shape}")
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    if np.any(norms == 0.0):
        raise NormalizationError("zero-norm row cannot be normalized")
    return x / norms


def _normalize_vjp(g, out, x):
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    return ((g - out * np.sum(g * out, axis=1, keepdims=True)) / norms,)


def _sqdist_fwd(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"pairwise_sqdist: {a.shape} vs {b.shape}")
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=2)


def _sqdist_vjp(g, out, a, b):
    ga = 2.0 * (g.sum(axis=1)[:, None] * a - g @ b)
    gb = 2.0 * (g.sum(axis=0)[:, None] * b - g.T @ a)
    return ga, gb


def _concat_fwd(a, b, axis=-1):
    return np.concatenate([a, b], axis=axis)


def _concat_vjp(g, out, a, b, axis=-1):
    k = a.shape[axis]
    ga, gb = np.split(g, [k], axis=axis)
    return ga, gb


def _binary_fwd(f):
    def fwd(a, b):
        _check_broadcast(a, b)
        return f(a, b)
    return fwd


PRIMITIVES: dict[str, tuple[Callable, Callable]] = {
    "affine": (_affine_fwd, _affine_vjp),
    "matmul": (_matmul_fwd, lambda g, out, a, b: (g @ b.T, a.T @ g)),
    "tanh": (np.tanh, lambda g, out, x: (g * (1.0 - out * out),)),
    "sigmoid": (_sigmoid, lambda g, out, x: (g * out * (1.0 - out),)),
    "relu": (lambda x: np.maximum(x, 0.0), lambda g, out, x: (g * (x > 0.0),)),
    "add": (_binary_fwd(np.add), lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))),
    "sub": (_binary_fwd(np.subtract), lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))),
    "mul": (_binary_fwd(np.multiply), lambda g, out, a, b: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))),
    "sum": (lambda x: np.asarray(np.sum(x)), lambda g, out, x: (np.broadcast_to(g, x.shape).copy(),)),
    "mean": (lambda x: np.asarray(np.mean(x)), lambda g, out, x: (np.broadcast_to(g / x.size, x.shape).copy(),)),
    "concat": (_concat_fwd, _concat_vjp),
    "mae": (_mae_fwd, _mae_vjp),
    "bce_logit": (_bce_fwd, _bce_vjp),
    "l2_normalize_rows": (_normalize_fwd, _normalize_vjp),
    "pairwise_sqdist": (_sqdist_fwd, _sqdist_vjp),
}


def _apply(op: str, *args, **attrs):
    tapes = {a.tape for a in args if isinstance(a, Var)}
    if not tapes:
        out = PRIMITIVES[op][0](*(np.asarray(a, dtype=np.float64) for a in args), **attrs)
        return out
    if len(tapes) > 1:
        raise UsageError("arguments belong to different tapes")
    tape = tapes.pop()
    inputs = tuple(a if isinstance(a, Var) else tape.constant(a) for a in args)
    return tape._record(op, inputs, attrs)


def _scalar(out):
    return float(out) if isinstance(out, np.ndarray) else out


def affine(W, b, x):
    """``x @ W.T + b`` for a vector ``x`` or a batch of row vectors."""
    return _apply("affine", W, b, x)


def matmul(a, b):
    return _apply("matmul", a, b)


def tanh(x):
    return _apply("tanh", x)


def sigmoid(x):
    return _apply("sigmoid", x)


def activation(kind: str, x):
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def relu(x):
    return _apply("relu", x)


def add(a, b):
    return _apply("add", a, b)


def sub(a, b):
    return _apply("sub", a, b)


def mul(a, b):
    return _apply("mul", a, b)


def sum_(x):
    return _scalar(_apply("sum", x))


def mean(x):
    return _scalar(_apply("mean", x))


def concat(a, b, axis: int = -1):
    return _apply("concat", a, b, axis=axis)


def mae_loss(a, b):
    """Mean over all components of ``|a - b|``."""
    return _scalar(_apply("mae", a, b))


def bce_from_logit(logit, target):
    """Binary cross-entropy of ``sigmoid(logit)`` against ``target``, averaged over elements.

    Evaluated through ``log(1 + exp(-|x|))`` so it stays finite for any finite logit.
    """
    if not isinstance(logit, Var):
        logit = np.asarray(logit, dtype=np.float64)
    if not isinstance(target, Var):
        target = np.broadcast_to(np.asarray(target, dtype=np.float64), np.shape(logit.value if isinstance(logit, Var) else logit))
    return _scalar(_apply("bce_logit", logit, target))


def l2_normalize_rows(x):
    return _apply("l2_normalize_rows", x)


def pairwise_sqdist(a, b):
    """``D[i, j] = ||a_i - b_j||^2``."""
    return _apply("pairwise_sqdist", a, b)
