"""Minimal dense-tensor reverse-mode autodiff on numpy.

Define-by-run: every op builds a fresh node; calling ``backward()`` on a
scalar walks the recorded graph in reverse topological order.  Only the
ops needed by the codec, the classifier head, and integrated gradients
are implemented.  float32 by default; float64 inputs are respected (the
gradcheck helper relies on this).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class DimensionError(ValueError):
    """Operand shapes do not satisfy an op's contract."""


class Tensor:
    """A dense nd-array plus an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, _op=""):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self):
        """Populate ``grad`` on every requires_grad leaf reachable from this scalar."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # convenience arithmetic used by the model code
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other, self.dtype), -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x, dtype=np.float32):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def tensor(data, requires_grad=False, dtype=np.float32):
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd, _op="add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=bwd, _op="mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward=bwd, _op="matmul")


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="reshape")


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    out_data = np.transpose(x.data, axes)
    inv = tuple(np.argsort(axes))

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.transpose(g, inv))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="transpose")


def tsum(x: Tensor, axis=None) -> Tensor:
    out_data = x.data.sum(axis=axis)

    def bwd(g):
        if not x.requires_grad:
            return
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.data.shape))
        else:
            x._accumulate(np.broadcast_to(np.expand_dims(g, axis), x.data.shape))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="sum")


def tmean(x: Tensor, axis=None) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return scale(tsum(x, axis=axis), 1.0 / n)


def tmax(x: Tensor, axis: int) -> Tensor:
    """Maximum along one axis; the gradient flows to the first-argmax entries."""
    out_data = x.data.max(axis=axis)
    arg = x.data.argmax(axis=axis)

    def bwd(g):
        if not x.requires_grad:
            return
        grad = np.zeros_like(x.data)
        np.put_along_axis(
            grad, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis=axis
        )
        x._accumulate(grad)

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="max")


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * (1.0 - out_data * out_data))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="tanh")


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0.0)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="relu")


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    neg = alpha * np.expm1(np.minimum(x.data, 0.0))
    out_data = np.where(x.data > 0, x.data, neg).astype(x.data.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * np.where(x.data > 0, 1.0, neg + alpha).astype(x.data.dtype))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="elu")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out_data = x.data * np.asarray(c, dtype=x.data.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * np.asarray(c, dtype=x.data.dtype))

    return Tensor(out_data, _parents=(x,), _backward=bwd, _op="scale")


def _with_batch(data):
    """Return (batched_view, had_batch) for 2-D or 3-D conv input."""
    if data.ndim == 2:
        return data[None, ...], False
    if data.ndim == 3:
        return data, True
    raise DimensionError(f"conv input must be (C,N) or (B,C,N), got {data.shape}")


def conv1d(x: Tensor, w: Tensor, stride: int) -> Tensor:
    """Valid (no padding) strided cross-correlation.

    x: (C_in, N) or (B, C_in, N); w: (C_out, C_in, K).
    """
    if stride < 1:
        raise ValueError("stride must be positive")
    xb, had_batch = _with_batch(x.data)
    if w.data.ndim != 3:
        raise DimensionError(f"conv1d kernels must be (C_out,C_in,K), got {w.data.shape}")
    cout, cin, k = w.data.shape
    b, cin_x, n = xb.shape
    if cin_x != cin:
        raise DimensionError(f"conv1d channel mismatch: input {cin_x}, kernels {cin}")
    if n < k:
        raise DimensionError(f"conv1d input length {n} shorter than kernel {k}")
    nout = (n - k) // stride + 1
    win = sliding_window_view(xb, k, axis=2)[:, :, :: stride, :][:, :, :nout, :]
    out_data = np.einsum("bcnk,ock->bon", win, w.data, optimize=True)

    def bwd(g):
        gb = g if g.ndim == 3 else g[None, ...]
        if w.requires_grad:
            w._accumulate(np.einsum("bcnk,bon->ock", win, gb, optimize=True))
        if x.requires_grad:
            gx = np.zeros_like(xb)
            for kk in range(k):
                gx[:, :, kk : kk + nout * stride : stride] += np.einsum(
                    "bon,oc->bcn", gb, w.data[:, :, kk], optimize=True
                )
            x._accumulate(gx if had_batch else gx[0])

    out_data = out_data if had_batch else out_data[0]
    return Tensor(out_data, _parents=(x, w), _backward=bwd, _op="conv1d")


def conv1d_transpose(x: Tensor, w: Tensor, stride: int) -> Tensor:
    """Adjoint of conv1d (fractionally-strided scatter-add).

    x: (C_in, T) or (B, C_in, T); w: (C_in, C_out, K); output length (T-1)*stride + K.
    """
    if stride < 1:
        raise ValueError("stride must be positive")
    xb, had_batch = _with_batch(x.data)
    if w.data.ndim != 3:
        raise DimensionError(f"conv1d_transpose kernels must be (C_in,C_out,K), got {w.data.shape}")
    cin, cout, k = w.data.shape
    b, cin_x, t = xb.shape
    if cin_x != cin:
        raise DimensionError(f"conv1d_transpose channel mismatch: input {cin_x}, kernels {cin}")
    nout = (t - 1) * stride + k
    out_data = np.zeros((b, cout, nout), dtype=xb.dtype)
    for kk in range(k):
        out_data[:, :, kk : kk + t * stride : stride] += np.einsum(
            "bct,co->bot", xb, w.data[:, :, kk], optimize=True
        )

    def bwd(g):
        gb = g if g.ndim == 3 else g[None, ...]
        # windows of the output gradient seen by each input frame
        win = sliding_window_view(gb, k, axis=2)[:, :, :: stride, :][:, :, :t, :]
        if x.requires_grad:
            x._accumulate(
                np.einsum("botk,cok->bct", win, w.data, optimize=True)
                if had_batch
                else np.einsum("botk,cok->bct", win, w.data, optimize=True)[0]
            )
        if w.requires_grad:
            w._accumulate(np.einsum("bct,botk->cok", xb, win, optimize=True))

    out_data = out_data if had_batch else out_data[0]
    return Tensor(out_data, _parents=(x, w), _backward=bwd, _op="conv1d_transpose")


def softmax(logits: np.ndarray, axis=-1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean of -log softmax(logits)[label].

    logits: (C,) with an int label, or (B, C) with a length-B label array.
    """
    single = logits.data.ndim == 1
    lg = logits.data[None, :] if single else logits.data
    lab = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    b, c = lg.shape
    if lab.shape != (b,):
        raise IndexError(f"labels shape {lab.shape} does not match batch {b}")
    if lab.min() < 0 or lab.max() >= c:
        raise IndexError(f"label out of range [0,{c})")
    p = softmax(lg, axis=1)
    rows = np.arange(b)
    zmax = lg.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(lg - zmax).sum(axis=1)) + zmax[:, 0]
    losses = logsumexp - lg[rows, lab]
    out_data = np.asarray(losses.mean(), dtype=lg.dtype)

    def bwd(g):
        if logits.requires_grad:
            grad = p.copy()
            grad[rows, lab] -= 1.0
            grad *= g / b
            logits._accumulate(grad[0] if single else grad)

    return Tensor(out_data, _parents=(logits,), _backward=bwd, _op="softmax_cross_entropy")


def gradcheck(fn, inputs, h=1e-3, rtol=1e-3, atol=1e-6):
    """Compare analytic gradients of ``fn(*tensors) -> scalar Tensor`` to central differences.

    Runs in float64 regardless of input dtype. Returns the worst relative error.
    """
    ts = [Tensor(np.asarray(x, dtype=np.float64), requires_grad=True) for x in inputs]
    out = fn(*ts)
    out.backward()
    worst = 0.0
    for t in ts:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn(*ts).data)
            flat[i] = orig - h
            fm = float(fn(*ts).data)
            flat[i] = orig
            num[i] = (fp - fm) / (2 * h)
        num = num.reshape(t.data.shape)
        denom = np.maximum(np.abs(num), np.abs(analytic))
        err = np.abs(analytic - num) / np.maximum(denom, atol / rtol)
        worst = max(worst, float(err.max()) if err.size else 0.0)
        if not np.allclose(analytic, num, rtol=rtol, atol=atol):
            raise AssertionError(
                f"gradcheck failed: max rel err {err.max():.3e} (shape {t.data.shape})"
            )
    return worst
