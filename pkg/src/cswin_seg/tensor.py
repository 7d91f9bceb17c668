"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a row-major numpy array (f32 or f64) plus an optional
gradient buffer.  Differentiable primitives record themselves onto the
innermost active ``Tape``; ``backward(loss, tape)`` replays the tape in
reverse and accumulates gradients into every ``requires_grad`` leaf.

The tape is rebuilt on every forward pass (define-by-run).  When no tape
is active the primitives run as plain numpy code, so inference costs no
bookkeeping.

Design notes:
  * gelu uses the tanh approximation 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
  * conv2d is an explicit patch gather (im2col) feeding a matmul.
  * Forward ops never check for NaN/Inf; ``backward`` validates the loss
    and names the first op with a non-finite output.
"""

from __future__ import annotations

import struct
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError, FormatError, NumericError

DTYPES = {"f32": np.float32, "f64": np.float64}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}

Scalar = Union[int, float]


class Tensor:
    """Dense N-dimensional array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, dtype: Optional[str] = None, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        np_dtype = DTYPES[dtype] if dtype is not None else None
        arr = np.asarray(data, dtype=np_dtype)
        if arr.dtype not in _DTYPE_NAMES:
            arr = arr.astype(np.float32)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zeros(shape: Sequence[int], dtype: str = "f32", requires_grad: bool = False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=DTYPES[dtype]), requires_grad=requires_grad)

    @staticmethod
    def ones(shape: Sequence[int], dtype: str = "f32", requires_grad: bool = False) -> "Tensor":
        return Tensor(np.ones(shape, dtype=DTYPES[dtype]), requires_grad=requires_grad)

    @staticmethod
    def full(shape: Sequence[int], value: Scalar, dtype: str = "f32") -> "Tensor":
        return Tensor(np.full(shape, value, dtype=DTYPES[dtype]))

    # -- introspection --------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> str:
        return _DTYPE_NAMES[self.data.dtype]

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def astype(self, dtype: str) -> "Tensor":
        return Tensor(self.data.astype(DTYPES[dtype]), requires_grad=self.requires_grad)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- operator sugar (differentiable) --------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        return add(self, self._coerce(other))

    def __radd__(self, other):
        return add(self._coerce(other), self)

    def __sub__(self, other):
        return sub(self, self._coerce(other))

    def __rsub__(self, other):
        return sub(self._coerce(other), self)

    def __mul__(self, other):
        return mul(self, self._coerce(other))

    def __rmul__(self, other):
        return mul(self._coerce(other), self)

    def __truediv__(self, other):
        return div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return div(self._coerce(other), self)

    def __neg__(self):
        return mul(self, Tensor(np.asarray(-1.0, dtype=self.data.dtype)))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        return reshape(self, shape)

    def permute(self, order: Sequence[int]) -> "Tensor":
        return permute(self, order)


class Tape:
    """Ordered record of primitive applications for one forward pass.

    Usage::

        with Tape() as tape:
            loss = model_forward(...)
        backward(loss, tape)

    Entries are appended in execution order, so inputs of every op precede
    it and the backward pass can walk the list once, in reverse.
    """

    _stack: list["Tape"] = []

    def __init__(self):
        self.entries: list[tuple] = []  # (inputs, output, grad_fn, opname)
        self._tracked: set[int] = set()
        self._produced: set[int] = set()
        self.consumed = False

    def __enter__(self) -> "Tape":
        Tape._stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        Tape._stack.pop()

    @staticmethod
    def active() -> Optional["Tape"]:
        return Tape._stack[-1] if Tape._stack else None

    def _wants(self, inputs: Iterable[Tensor]) -> bool:
        return any(t.requires_grad or id(t) in self._tracked for t in inputs)

    def record(self, inputs: tuple, out: Tensor, grad_fn: Callable, opname: str) -> None:
        self.entries.append((inputs, out, grad_fn, opname))
        self._tracked.add(id(out))
        self._produced.add(id(out))
        out.requires_grad = True


def _emit(opname: str, inputs: tuple, out_data: np.ndarray, grad_fn: Callable) -> Tensor:
    """Wrap a primitive's result, recording it if a tape wants gradients.

    ``grad_fn(g)`` must return one gradient array (or None) per input.
    """
    out = Tensor(out_data)
    tape = Tape.active()
    if tape is not None and tape._wants(inputs):
        tape.record(inputs, out, grad_fn, opname)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Propagate d(loss)/d(x) into the grad slot of every requires_grad leaf."""
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape.consumed:
        raise ContractError("backward already ran on this tape; record a new forward pass")
    if not np.isfinite(loss.data).all():
        for inputs, out, _fn, opname in tape.entries:
            if not np.isfinite(out.data).all():
                raise NumericError(f"non-finite loss; first non-finite output produced by op '{opname}'")
        raise NumericError("non-finite loss with no recorded producer")
    tape.consumed = True

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for inputs, out, grad_fn, _opname in reversed(tape.entries):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for t, gi in zip(inputs, grad_fn(g)):
            if gi is None:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if t.requires_grad and key not in tape._produced:
                leaves[key] = t
    for key, t in leaves.items():
        g = grads[key].astype(t.data.dtype, copy=False)
        t.grad = g.copy() if t.grad is None else t.grad + g


# -- broadcasting helpers ------------------------------------------------------


def _check_dtypes(opname: str, *ts: Tensor) -> None:
    d0 = ts[0].data.dtype
    for t in ts[1:]:
        if t.data.dtype != d0:
            raise DimensionError(f"{opname}: mixed dtypes {_DTYPE_NAMES[d0]} vs {t.dtype}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape`, inverting numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise primitives ----------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes("add", a, b)
    try:
        out = a.data + b.data
    except ValueError as e:
        raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}") from e

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit("add", (a, b), out, grad_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes("sub", a, b)
    try:
        out = a.data - b.data
    except ValueError as e:
        raise DimensionError(f"sub: incompatible shapes {a.shape} and {b.shape}") from e

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit("sub", (a, b), out, grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes("mul", a, b)
    try:
        out = a.data * b.data
    except ValueError as e:
        raise DimensionError(f"mul: incompatible shapes {a.shape} and {b.shape}") from e

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit("mul", (a, b), out, grad_fn)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes("div", a, b)
    try:
        out = a.data / b.data
    except ValueError as e:
        raise DimensionError(f"div: incompatible shapes {a.shape} and {b.shape}") from e

    def grad_fn(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _emit("div", (a, b), out, grad_fn)


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    xd = x.data
    u = _GELU_C * (xd + _GELU_A * xd**3)
    t = np.tanh(u)
    out = 0.5 * xd * (1.0 + t)

    def grad_fn(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * xd * xd)
        dx = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du
        return (g * dx,)

    return _emit("gelu", (x,), out, grad_fn)


# -- reductions ----------------------------------------------------------------


def tsum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Sum over one axis, or over everything when axis is None."""
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, x.shape).copy(),)

    return _emit("sum", (x,), out, grad_fn)


def tmean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return tsum(x, axis=axis, keepdims=keepdims) * Tensor(np.asarray(1.0 / n, dtype=x.data.dtype))


# -- structural primitives -----------------------------------------------------


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"reshape: cannot view {x.shape} as {shape}")
    out = x.data.reshape(shape)

    def grad_fn(g):
        return (g.reshape(x.shape),)

    return _emit("reshape", (x,), out.copy(), grad_fn)


def permute(x: Tensor, order: Sequence[int]) -> Tensor:
    order = tuple(order)
    if sorted(order) != list(range(x.ndim)):
        raise DimensionError(f"permute: order {order} is not a permutation of {x.ndim} axes")
    inverse = np.argsort(order)

    def grad_fn(g):
        return (np.ascontiguousarray(g.transpose(inverse)),)

    return _emit("permute", (x,), np.ascontiguousarray(x.data.transpose(order)), grad_fn)


def concat(ts: Sequence[Tensor], axis: int) -> Tensor:
    if not ts:
        raise DimensionError("concat of zero tensors")
    _check_dtypes("concat", *ts)
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}") from e
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, offsets, axis=axis))

    return _emit("concat", tuple(ts), out, grad_fn)


def split(x: Tensor, sizes: Sequence[int], axis: int) -> list[Tensor]:
    """Split into consecutive chunks of the given sizes (must cover the axis)."""
    if sum(sizes) != x.shape[axis]:
        raise DimensionError(f"split: sizes {list(sizes)} do not cover axis of extent {x.shape[axis]}")
    offsets = np.cumsum(sizes)[:-1]
    parts = np.split(x.data, offsets, axis=axis)
    outs = []
    for i, p in enumerate(parts):
        def grad_fn(g, i=i, p_shape=p.shape):
            full = np.zeros_like(x.data)
            sl = [slice(None)] * x.ndim
            start = 0 if i == 0 else int(offsets[i - 1])
            sl[axis] = slice(start, start + p_shape[axis])
            full[tuple(sl)] = g
            return (full,)

        outs.append(_emit("split", (x,), np.ascontiguousarray(p), grad_fn))
    return outs


# -- linear algebra ------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading batch axes on `a` are allowed when `b` is 2-D,
    or both operands may share identical leading axes."""
    _check_dtypes("matmul", a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner extents differ, {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul: batch axes differ, {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def grad_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        if b.ndim == 2 and a.ndim > 2:
            a2 = a.data.reshape(-1, a.shape[-1])
            g2 = g.reshape(-1, g.shape[-1])
            gb = a2.T @ g2
        else:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return _emit("matmul", (a, b), out, grad_fn)


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, w)
    return out if b is None else add(out, b)


# -- normalization and attention scalars ---------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max subtraction)."""
    if x.shape[axis] == 0:
        raise DimensionError("softmax over an empty axis")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _emit("softmax", (x,), y, grad_fn)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    """log(softmax(x)) computed via a stabilized log-sum-exp."""
    if x.shape[axis] == 0:
        raise DimensionError("log_softmax over an empty axis")
    m = x.data.max(axis=axis, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    sm = np.exp(out)

    def grad_fn(g):
        return (g - sm * g.sum(axis=axis, keepdims=True),)

    return _emit("log_softmax", (x,), out, grad_fn)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    c = x.shape[-1]
    if c == 0:
        raise DimensionError("layer_norm over zero channels")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match C={c}")
    _check_dtypes("layer_norm", x, gamma, beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def grad_fn(g):
        dgamma = (g * xhat).reshape(-1, c).sum(axis=0)
        dbeta = g.reshape(-1, c).sum(axis=0)
        dxhat = g * gamma.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, dgamma, dbeta

    return _emit("layer_norm", (x, gamma, beta), out, grad_fn)


# -- convolution machinery -----------------------------------------------------


def _conv_out_extent(n: int, k: int, stride: int, pad: int) -> int:
    out = (n + 2 * pad - k) // stride + 1
    if out < 1:
        raise DimensionError(f"kernel {k} larger than padded input extent {n + 2 * pad}")
    return out


def patches(x: Tensor, kh: int, kw: int, stride: int = 1, padding: int = 0) -> Tensor:
    """Gather k x k neighborhoods: [H,W,C] -> [H',W',kh*kw,C] (im2col).

    Out-of-bounds positions read as zero.  The gradient scatter-adds each
    patch slot back into the padded input.
    """
    if x.ndim != 3:
        raise DimensionError(f"patches expects [H,W,C], got {x.shape}")
    h, w, c = x.shape
    ho = _conv_out_extent(h, kh, stride, padding)
    wo = _conv_out_extent(w, kw, stride, padding)
    xp = np.pad(x.data, ((padding, padding), (padding, padding), (0, 0)))
    out = np.empty((ho, wo, kh * kw, c), dtype=x.data.dtype)
    for p in range(kh * kw):
        ki, kj = divmod(p, kw)
        out[:, :, p, :] = xp[ki : ki + stride * ho : stride, kj : kj + stride * wo : stride, :]

    def grad_fn(g):
        gp = np.zeros_like(xp)
        for p in range(kh * kw):
            ki, kj = divmod(p, kw)
            gp[ki : ki + stride * ho : stride, kj : kj + stride * wo : stride, :] += g[:, :, p, :]
        if padding:
            gp = gp[padding : padding + h, padding : padding + w, :]
        return (np.ascontiguousarray(gp),)

    return _emit("patches", (x,), out, grad_fn)


def conv2d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """2-D cross-correlation: x [H,W,Cin], w [kh,kw,Cin,Cout] -> [H',W',Cout]."""
    if w.ndim != 4:
        raise DimensionError(f"conv2d weight must be [kh,kw,Cin,Cout], got {w.shape}")
    kh, kw, cin, cout = w.shape
    if x.ndim != 3 or x.shape[2] != cin:
        raise DimensionError(f"conv2d: input {x.shape} does not match weight {w.shape}")
    cols = patches(x, kh, kw, stride=stride, padding=padding)
    ho, wo = cols.shape[0], cols.shape[1]
    flat = reshape(cols, (ho * wo, kh * kw * cin))
    out = matmul(flat, reshape(w, (kh * kw * cin, cout)))
    out = reshape(out, (ho, wo, cout))
    if bias is not None:
        if bias.shape != (cout,):
            raise DimensionError(f"conv2d: bias shape {bias.shape} != ({cout},)")
        out = add(out, bias)
    return out


def depthwise_conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Per-channel convolution: x [H,W,C], w [kh,kw,C] -> [H',W',C]."""
    if w.ndim != 3:
        raise DimensionError(f"depthwise weight must be [kh,kw,C], got {w.shape}")
    kh, kw, c = w.shape
    if x.ndim != 3 or x.shape[2] != c:
        raise DimensionError(f"depthwise_conv2d: input {x.shape} does not match weight {w.shape}")
    cols = patches(x, kh, kw, stride=stride, padding=padding)  # [H',W',k*k,C]
    prod = mul(cols, reshape(w, (kh * kw, c)))
    return tsum(prod, axis=2)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Repeat each pixel factor x factor times along the two leading axes."""
    if factor < 1:
        raise DimensionError("upsample factor must be >= 1")
    out = np.repeat(np.repeat(x.data, factor, axis=0), factor, axis=1)

    def grad_fn(g):
        h, w = x.shape[0], x.shape[1]
        gg = g.reshape((h, factor, w, factor) + x.shape[2:])
        return (gg.sum(axis=(1, 3)),)

    return _emit("upsample_nearest", (x,), out, grad_fn)


def upsample_bilinear(x: Tensor, factor: int) -> Tensor:
    """Bilinear upsampling of [H,W,C] by an integer factor (half-pixel centers)."""
    if x.ndim != 3:
        raise DimensionError(f"upsample_bilinear expects [H,W,C], got {x.shape}")
    h, w, _ = x.shape

    def axis_coords(n: int):
        src = (np.arange(n * factor, dtype=np.float64) + 0.5) / factor - 0.5
        lo = np.floor(src)
        t = src - lo
        i0 = np.clip(lo, 0, n - 1).astype(np.intp)
        i1 = np.clip(lo + 1, 0, n - 1).astype(np.intp)
        return i0, i1, t.astype(x.data.dtype)

    i0, i1, ti = axis_coords(h)
    j0, j1, tj = axis_coords(w)
    ti = ti[:, None, None]
    tj = tj[None, :, None]
    corners = ((i0, j0, (1 - ti) * (1 - tj)), (i0, j1, (1 - ti) * tj),
               (i1, j0, ti * (1 - tj)), (i1, j1, ti * tj))
    out = np.zeros((h * factor, w * factor, x.shape[2]), dtype=x.data.dtype)
    for ii, jj, wgt in corners:
        out += wgt * x.data[ii[:, None], jj[None, :], :]

    def grad_fn(g):
        dx = np.zeros_like(x.data)
        for ii, jj, wgt in corners:
            np.add.at(dx, (ii[:, None], jj[None, :]), wgt * g)
        return (dx,)

    return _emit("upsample_bilinear", (x,), out, grad_fn)


def pixel_shuffle(x: Tensor, factor: int, tail: int) -> Tensor:
    """Move factor^2 channel groups to space: [H,W,factor^2*tail] -> [fH,fW,tail].

    Channel index (di*factor + dj)*tail + t lands at output pixel
    (i*factor + di, j*factor + dj), slot t.  Frozen layout; checkpoints
    depend on it.
    """
    h, w, c = x.shape
    if c != factor * factor * tail:
        raise DimensionError(f"pixel_shuffle: {c} channels != {factor}^2 * {tail}")
    y = reshape(x, (h, w, factor, factor, tail))
    y = permute(y, (0, 2, 1, 3, 4))
    return reshape(y, (h * factor, w * factor, tail))


# -- serialization (TSR1) ------------------------------------------------------

_TSR1_MAGIC = b"TSR1\x00\x00\x00\x00"
_DTYPE_CODES = {"f32": 0, "f64": 1}
_CODE_DTYPES = {0: np.float32, 1: np.float64}


def tensor_to_bytes(t: Tensor) -> bytes:
    head = _TSR1_MAGIC + struct.pack("<I", t.ndim)
    head += b"".join(struct.pack("<Q", n) for n in t.shape)
    head += struct.pack("<B", _DTYPE_CODES[t.dtype])
    body = np.ascontiguousarray(t.data).astype(t.data.dtype.newbyteorder("<")).tobytes()
    return head + body


def tensor_from_bytes(buf: bytes) -> Tensor:
    if len(buf) < 13 or buf[:8] != _TSR1_MAGIC:
        raise FormatError("not a TSR1 tensor (bad magic)")
    (rank,) = struct.unpack_from("<I", buf, 8)
    off = 12
    if len(buf) < off + 8 * rank + 1:
        raise FormatError("TSR1 tensor truncated in header")
    shape = struct.unpack_from(f"<{rank}Q", buf, off) if rank else ()
    off += 8 * rank
    code = buf[off]
    off += 1
    if code not in _CODE_DTYPES:
        raise FormatError(f"TSR1: unknown dtype code {code}")
    dt = np.dtype(_CODE_DTYPES[code]).newbyteorder("<")
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    need = count * dt.itemsize
    if len(buf) - off < need:
        raise FormatError("TSR1 tensor truncated in payload")
    data = np.frombuffer(buf[off : off + need], dtype=dt).reshape(shape)
    return Tensor(data.astype(_CODE_DTYPES[code]))


def tsr1_size(t: Tensor) -> int:
    return 13 + 8 * t.ndim + t.data.nbytes


def save_tensor(path, t: Tensor) -> None:
    with open(path, "wb") as f:
        f.write(tensor_to_bytes(t))


def load_tensor(path) -> Tensor:
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read())
