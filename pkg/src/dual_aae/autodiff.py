"""Dense float64 tensors with taped reverse-mode differentiation.

Design is define-by-run: while a `Tape` is active, every operation appends an
op record (inputs, output, vjp closure) to it, so the record order is a
topological order by construction. `Tape.backward` walks the records once in
reverse, accumulating adjoints and depositing `.grad` on leaf tensors. With
no active tape, the same functions run as plain numpy forward math.

Gradient participation is captured at record time (like the usual
define-by-run semantics): temporarily clearing `requires_grad` on a parameter
while an op is recorded keeps that parameter out of the backward pass even if
the flag is restored before `backward` runs.
"""

from __future__ import annotations

import numpy as np

from . import kernels as K
from .errors import ConfigError, DimensionError, NumericError

__all__ = [
    "Tensor",
    "Tape",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "leaky_relu",
    "relu",
    "sigmoid",
    "exp",
    "log",
    "clamp",
    "mean",
    "tsum",
    "reshape",
    "concat",
    "slice_axis",
    "softmax",
    "batch_norm",
    "dropout",
]


class Tensor:
    """A dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise DimensionError("item() needs a size-1 tensor")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # Operator sugar; scalars and arrays are coerced to constant tensors.
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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("op", "inputs", "out", "vjp", "needs")

    def __init__(self, op, inputs, out, vjp, needs):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.vjp = vjp
        self.needs = needs


class Tape:
    """Ordered op records for one forward pass (a computation graph).

    Records are appended in execution order, so every node's inputs precede
    it. Rebuilt per minibatch; must not be shared across threads.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.stochastic = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self, "tapes must nest"
        return False

    def backward(self, loss: Tensor):
        """Reverse accumulation from a scalar loss into leaf `.grad` slots.

        Visits every record exactly once. Leaves that appear in the graph but
        are not on a path to the loss receive zero gradients; gradients
        accumulate across repeated backward calls until cleared.
        """
        if loss.data.size != 1:
            raise DimensionError(
                f"backward needs a scalar loss, got shape {loss.data.shape}")
        produced = {id(n.out) for n in self.nodes}
        adjoint = {id(loss): np.ones_like(loss.data)}
        leaves = {}
        for node in reversed(self.nodes):
            g = adjoint.pop(id(node.out), None)
            if g is None:
                continue  # off every path to the loss
            for slot, (t, gin) in enumerate(zip(node.inputs, node.vjp(g))):
                if gin is None or not node.needs[slot]:
                    continue
                tid = id(t)
                if tid in adjoint:
                    adjoint[tid] = adjoint[tid] + gin
                else:
                    adjoint[tid] = gin
                if tid not in produced:
                    leaves[tid] = t
        for node in self.nodes:
            for slot, t in enumerate(node.inputs):
                tid = id(t)
                if node.needs[slot] and tid not in produced and tid not in leaves:
                    leaves[tid] = t
        for tid, t in leaves.items():
            g = adjoint.get(tid)
            g = np.zeros_like(t.data) if g is None else np.array(g, dtype=np.float64)
            t.grad = g if t.grad is None else t.grad + g


_TAPE_STACK: list[Tape] = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _record(op, inputs, out_data, vjp, stochastic=False) -> Tensor:
    tape = _active_tape()
    if stochastic and tape is not None:
        tape.stochastic = True
    needs = tuple(t.requires_grad for t in inputs)
    track = tape is not None and any(needs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        tape.nodes.append(_Node(op, tuple(inputs), out, vjp, needs))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _record("add", (a, b), out, vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def vjp(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _record("sub", (a, b), out, vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _record("mul", (a, b), out, vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        return (-g,)

    return _record("neg", (a,), -a.data, vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(
            f"matmul needs rank-2 operands, got {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        return (g @ b.data.T, a.data.T @ g)

    return _record("matmul", (a, b), out, vjp)


# ---------------------------------------------------------------------------
# activations


def leaky_relu(x, slope=0.1) -> Tensor:
    if not 0.0 <= slope < 1.0:
        raise ConfigError(f"leaky_relu slope must be in [0, 1), got {slope}")
    x = as_tensor(x)
    out = K.leaky_relu_fwd(x.data, slope)

    def vjp(g):
        # subgradient at exactly 0 is the slope (x > 0 test routes 0 there)
        return (K.leaky_relu_bwd(x.data, g, slope),)

    return _record("leaky_relu", (x,), out, vjp)


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = K.relu_fwd(x.data)

    def vjp(g):
        return (K.relu_bwd(x.data, g),)

    return _record("relu", (x,), out, vjp)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = K.sigmoid_fwd(x.data)
    out_arr = out

    def vjp(g):
        return (K.sigmoid_bwd(out_arr, g),)

    return _record("sigmoid", (x,), out, vjp)


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    if not np.isfinite(out).all():
        raise NumericError("exp overflowed to a non-finite value")

    def vjp(g):
        return (g * out,)

    return _record("exp", (x,), out, vjp)


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0.0) or not np.isfinite(x.data).all():
        raise NumericError("log needs strictly positive finite inputs "
                           "(clamp probabilities before taking logs)")
    out = np.log(x.data)

    def vjp(g):
        return (g / x.data,)

    return _record("log", (x,), out, vjp)


def clamp(x, lo, hi) -> Tensor:
    """Elementwise clip; gradient passes through inside [lo, hi], else 0."""
    x = as_tensor(x)
    out = np.clip(x.data, lo, hi)
    mask = (x.data >= lo) & (x.data <= hi)

    def vjp(g):
        return (g * mask,)

    return _record("clamp", (x,), out, vjp)


# ---------------------------------------------------------------------------
# reductions and shape ops


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = np.mean(x.data, axis=axis)
    count = x.data.size if axis is None else x.data.shape[axis]
    if count == 0:
        raise DimensionError("mean over an empty axis")

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, x.data.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis) / count, x.data.shape),)

    return _record("mean", (x,), out, vjp)


def tsum(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.data.shape),)

    return _record("sum", (x,), out, vjp)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != x.data.size and -1 not in shape:
        raise DimensionError(f"cannot reshape {x.data.shape} to {shape}")
    out = x.data.reshape(shape)

    def vjp(g):
        return (g.reshape(x.data.shape),)

    return _record("reshape", (x,), out, vjp)


def concat(tensors, axis=0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DimensionError("concat of an empty list")
    nd = ts[0].ndim
    for t in ts[1:]:
        if t.ndim != nd:
            raise DimensionError("concat operands must share rank")
        for ax in range(nd):
            if ax != axis and t.shape[ax] != ts[0].shape[ax]:
                raise DimensionError(
                    f"concat shapes incompatible off axis {axis}: "
                    f"{ts[0].shape} vs {t.shape}")
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        pieces = []
        for i in range(len(ts)):
            sl = [slice(None)] * nd
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            pieces.append(np.ascontiguousarray(g[tuple(sl)]))
        return tuple(pieces)

    return _record("concat", tuple(ts), out, vjp)


def slice_axis(x, axis, start, stop) -> Tensor:
    x = as_tensor(x)
    dim = x.shape[axis]
    if not (0 <= start <= stop <= dim):
        raise DimensionError(
            f"slice [{start}:{stop}) out of bounds for axis {axis} of size {dim}")
    key = [slice(None)] * x.ndim
    key[axis] = slice(start, stop)
    key = tuple(key)
    out = np.ascontiguousarray(x.data[key])

    def vjp(g):
        full = np.zeros_like(x.data)
        full[key] = g
        return (full,)

    return _record("slice", (x,), out, vjp)


# ---------------------------------------------------------------------------
# composite neural-net ops


def softmax(logits, axis=-1) -> Tensor:
    x = as_tensor(logits)
    if not np.isfinite(x.data).all():
        raise NumericError("softmax received non-finite logits")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        inner = np.sum(g * out, axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _record("softmax", (x,), out, vjp)


def batch_norm(x, gamma, beta, mode, running_mean, running_var,
               momentum=0.9, eps=1e-5, update_stats=True) -> Tensor:
    """Per-feature batch normalization over axis 0 of a rank-2 input.

    Train mode normalizes by batch statistics (biased variance) and, when
    `update_stats` is set, folds them into the running buffers in place with
    `running = momentum * running + (1 - momentum) * batch`. Eval mode
    normalizes by the running buffers and never touches them.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if mode not in ("train", "eval"):
        raise ConfigError(f"batch_norm mode must be train or eval, got {mode!r}")
    if x.ndim != 2:
        raise DimensionError("batch_norm expects a rank-2 (batch, features) input")
    d = x.shape[1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError("batch_norm gamma/beta must be shape (features,)")

    if mode == "train":
        n = x.shape[0]
        if n < 2:
            raise DimensionError("batch_norm train mode needs a batch of >= 2")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        if update_stats:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mu
            running_var *= momentum
            running_var += (1.0 - momentum) * var
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv
        out = gamma.data * xhat + beta.data

        def vjp(g):
            dgamma = (g * xhat).sum(axis=0)
            dbeta = g.sum(axis=0)
            dxhat = g * gamma.data
            dx = inv * (dxhat - dxhat.mean(axis=0)
                        - xhat * (dxhat * xhat).mean(axis=0))
            return (dx, dgamma, dbeta)

        return _record("batch_norm", (x, gamma, beta), out, vjp)

    inv = 1.0 / np.sqrt(running_var + eps)
    xhat = (x.data - running_mean) * inv
    out = gamma.data * xhat + beta.data

    def vjp(g):
        dgamma = (g * xhat).sum(axis=0)
        dbeta = g.sum(axis=0)
        dx = g * (gamma.data * inv)
        return (dx, dgamma, dbeta)

    return _record("batch_norm", (x, gamma, beta), out, vjp)


def dropout(x, p_drop, mode, rng=None) -> Tensor:
    """Inverted dropout: train mode zeroes with probability p and rescales
    survivors by 1/(1-p); eval mode (or p == 0) is an exact identity."""
    if not 0.0 <= p_drop < 1.0:
        raise ConfigError(f"dropout p_drop must be in [0, 1), got {p_drop}")
    if mode not in ("train", "eval"):
        raise ConfigError(f"dropout mode must be train or eval, got {mode!r}")
    x = as_tensor(x)
    if mode == "eval" or p_drop == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in train mode needs an rng")
    u = rng.random(x.data.shape)
    out = K.dropout_fwd(x.data, u, p_drop)

    def vjp(g):
        return (K.dropout_bwd(u, g, p_drop),)

    return _record("dropout", (x,), out, vjp, stochastic=True)
