"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Operations executed while a :class:`Tape` is active are recorded in order;
:meth:`Tape.backward` replays them in reverse, which is a reverse topological
order because every node is recorded after its inputs. Outside a tape the
same functions run as plain numpy kernels, which is what decoding uses.

Example::

    w = Tensor(np.ones((3, 2)), requires_grad=True)
    with Tape() as tape:
        loss = (x @ w).sum()
    tape.backward(loss)
    w.grad  # d(loss)/d(w)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    """Dense float64 array with an optional gradient slot.

    Only leaves (tensors not produced by a recorded op) accumulate ``grad``.
    Accumulation is additive and never reset implicitly; call
    :meth:`zero_grad`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_tape", "_is_leaf", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.ascontiguousarray(data, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._tape: Optional[Tape] = None
        self._is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"only single-element tensors convert to float, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        backward(self)

    # operator sugar
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
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported; multiply by a constant instead")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take_rows(self, index)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


_ACTIVE: list["Tape"] = []


class Tape:
    """Ordered record of executed primitives.

    Use as a context manager; nested tapes record to the innermost one.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, out: Tensor, inputs: tuple, fn) -> None:
        out._tape = self
        out._is_leaf = False
        self.nodes.append(_Node(out, inputs, fn))

    def clear(self) -> None:
        for node in self.nodes:
            node.out._tape = None
        self.nodes.clear()

    def backward(self, loss: Tensor) -> None:
        """Propagate d(loss)/d(.) into every ``requires_grad`` leaf."""
        if loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        if loss._is_leaf:
            if loss.requires_grad:
                loss.accumulate_grad(np.ones_like(loss.data))
            return
        if loss._tape is not self:
            raise ValueError("loss was not recorded on this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for inp, ig in zip(node.inputs, node.backward(g)):
                if ig is None or not inp.requires_grad:
                    continue
                if inp._is_leaf:
                    inp.accumulate_grad(ig)
                else:
                    key = id(inp)
                    if key in grads:
                        grads[key] = grads[key] + ig
                    else:
                        grads[key] = ig


def backward(loss: Tensor) -> None:
    """Run reverse-mode accumulation from ``loss`` on the tape that produced it."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._is_leaf:
        if loss.requires_grad:
            loss.accumulate_grad(np.ones_like(loss.data))
        return
    loss._tape.backward(loss)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, inputs: tuple, fn) -> Tensor:
    out = Tensor(data)
    if _ACTIVE and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _ACTIVE[-1].record(out, inputs, fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _make(ad * bd, (a, b), bw)


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return _make(y, (x,), lambda g: (g * y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return _make(np.log(xd), (x,), lambda g: (g / xd,))


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.data > 0
    return _make(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x) -> Tensor:
    """GELU, tanh approximation."""
    x = as_tensor(x)
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * xd**3)
    th = np.tanh(inner)
    y = 0.5 * xd * (1.0 + th)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xd**2)
        return (g * (0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th**2) * dinner),)

    return _make(y, (x,), bw)


def dropout(x, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``p == 0`` or ``rng`` is None (eval mode)."""
    x = as_tensor(x)
    if rng is None or p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return _make(x.data * keep, (x,), lambda g: (g * keep,))


# shape


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _make(ad @ bd, (a, b), bw)


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def take_rows(x, index) -> Tensor:
    """Basic slicing along any axes (``x[a:b]``); gradient scatters back."""
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[index] += g
        return (full,)

    return _make(x.data[index], (x,), bw)


# reductions


def tensor_sum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _make(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), bw)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tensor_sum(x, axis, keepdims), 1.0 / n)


# normalisation and losses


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _make(y, (x,), bw)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=axis, keepdims=True))
    y = z - lse

    def bw(g):
        return (g - np.exp(y) * np.sum(g, axis=axis, keepdims=True),)

    return _make(y, (x,), bw)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then apply ``gain * xhat + bias``."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match last dim {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gain.data

    def bw(g):
        gx = g * gd
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, np.sum(g * xhat, axis=lead), np.sum(g, axis=lead)

    return _make(xhat * gd + bias.data, (x, gain, bias), bw)


def embedding_lookup(table, ids) -> Tensor:
    """Gather rows of ``table``; the backward pass scatter-adds into those rows."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    vocab, dim = table.shape
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        bad = ids[(ids < 0) | (ids >= vocab)][0]
        raise IndexError(f"embedding id {bad} out of range for table with {vocab} rows")

    def bw(g):
        full = np.zeros((vocab, dim), dtype=DTYPE)
        np.add.at(full, ids, g)
        return (full,)

    return _make(table.data[ids], (table,), bw)


def cross_entropy(logits, targets, ignore_id: Optional[int] = None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under ``softmax(logits)``.

    Positions whose target equals ``ignore_id`` are excluded from the mean.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    n, v = logits.shape
    if targets.shape[0] != n:
        raise ShapeError(f"cross_entropy: {n} logit rows but {targets.shape[0]} targets")
    keep = np.ones(n, dtype=bool) if ignore_id is None else targets != ignore_id
    count = int(keep.sum())
    if count == 0:
        raise ValueError("cross_entropy: every position is ignored, mean is undefined")
    if (targets[keep] >= v).any() or (targets[keep] < 0).any():
        raise IndexError(f"cross_entropy: target id out of range for {v} classes")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.nonzero(keep)[0]
    loss = -logp[rows, targets[rows]].sum() / count

    def bw(g):
        grad = np.exp(logp)
        grad[rows, targets[rows]] -= 1.0
        grad[~keep] = 0.0
        return (grad * (g / count),)

    return _make(np.asarray(loss), (logits,), bw)


# verification


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    checked: int
    errors: dict = field(default_factory=dict)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"grad_check {status}: max error {self.max_rel_error:.3e} over {self.checked} coordinates"


def grad_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    abs_floor: float = 1e-6,
    max_per_input: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """Compare tape gradients of ``f()`` against central finite differences.

    ``f`` is re-evaluated after perturbing ``inputs`` in place, so it must
    read them by reference. When both gradients are below ``abs_floor`` the
    absolute difference is used instead of the relative one. Set
    ``max_per_input`` to sample coordinates from large tensors.
    """
    for x in inputs:
        x.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    tape.clear()
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    checked = 0
    errors = {}
    for k, x in enumerate(inputs):
        analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_per_input is not None and flat.size > max_per_input:
            coords = rng.choice(flat.size, size=max_per_input, replace=False)
        errs = np.empty(len(coords))
        for j, c in enumerate(coords):
            orig = flat[c]
            flat[c] = orig + h
            fp = f().item()
            flat[c] = orig - h
            fm = f().item()
            flat[c] = orig
            numeric = (fp - fm) / (2 * h)
            a = analytic.reshape(-1)[c]
            scale = max(abs(a), abs(numeric))
            errs[j] = abs(a - numeric) / scale if scale >= abs_floor else abs(a - numeric)
        errors[x.name or k] = errs
        checked += len(coords)
        if len(errs):
            worst = max(worst, float(errs.max()))
    return GradCheckReport(worst, worst < tol, checked, errors)
