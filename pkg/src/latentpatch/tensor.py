"""Dense float64 tensors with taped reverse-mode automatic differentiation.

Every differentiable computation in this package runs through the ops in
this module. Forward calls executed inside a ``with Tape() as tape:`` block
are recorded in execution order (which is automatically topological);
``tape.backward(loss)`` replays the record once in reverse, accumulating
vector-Jacobian products. Tensors hold 64-bit data; a tape and its tensors
belong to a single thread.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class Tensor:
    """A dense float64 array with an optional gradient slot.

    ``requires_grad`` marks leaves the caller wants gradients for; it is
    propagated automatically to results of ops. ``grad`` is filled by
    ``Tape.backward`` for recorded leaves and holds a plain ndarray of the
    same shape as ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all routed through the module-level ops.
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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def detach(self) -> "Tensor":
        """A copy of this value cut off from gradient flow."""
        return Tensor(self.data.copy())


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------

class _TapeEntry:
    __slots__ = ("op", "out", "parents", "vjp")

    def __init__(self, op, out, parents, vjp):
        self.op = op
        self.out = out
        self.parents = parents
        self.vjp = vjp


_LOCAL = threading.local()


def _stack():
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def _active_tape():
    stack = _stack()
    return stack[-1] if stack else None


_NO_GRAD = object()


@contextmanager
def no_grad():
    """Disable recording for the enclosed block, even inside an open tape."""
    stack = _stack()
    stack.append(_NO_GRAD)
    try:
        yield
    finally:
        stack.pop()


class Tape:
    """An ordered record of one thread's forward operations.

    Entries are appended in execution order, so every entry's inputs were
    produced by earlier entries or are leaves. ``backward`` walks the list
    once in reverse; replaying it is deterministic, so repeated calls yield
    bit-identical gradients.
    """

    def __init__(self):
        self.entries: list[_TapeEntry] = []
        self._output_ids: set[int] = set()

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        top = _stack().pop()
        if top is not self:
            raise RuntimeError("tape context exited out of order")
        return False

    def _append(self, op, out, parents, vjp):
        self.entries.append(_TapeEntry(op, out, parents, vjp))
        self._output_ids.add(id(out))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Accumulate dLoss/dLeaf for every recorded leaf with requires_grad.

        Returns a map from leaf tensor to its gradient array and also stores
        the gradient in each leaf's ``grad`` slot (overwriting, not adding,
        so a second call reproduces the same result bit for bit).
        """
        if not isinstance(loss, Tensor):
            raise TypeError("backward expects a Tensor loss")
        if loss.data.size != 1:
            raise ShapeError(
                f"backward requires a scalar loss, got shape {loss.data.shape}"
            )
        if not self.entries:
            raise ValueError("tape is empty; nothing to differentiate")
        if id(loss) not in self._output_ids:
            raise ValueError("loss was not produced on this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaf_grads: dict[Tensor, np.ndarray] = {}
        for entry in reversed(self.entries):
            g = grads.pop(id(entry.out), None)
            if g is None:
                continue
            parent_grads = entry.vjp(g)
            for parent, pg in zip(entry.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg
                if id(parent) not in self._output_ids:
                    leaf_grads[parent] = grads[id(parent)]
        for leaf, g in leaf_grads.items():
            leaf.grad = np.ascontiguousarray(g.reshape(leaf.data.shape))
        return leaf_grads


def _record(op: str, out: Tensor, parents: tuple, vjp) -> Tensor:
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape = _active_tape()
        if tape is not None and tape is not _NO_GRAD:
            tape._append(op, out, parents, vjp)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (reverses numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_finite(arr: np.ndarray, op: str):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{op} produced non-finite values")
    return arr


# ---------------------------------------------------------------------------
# Elementwise ops (numpy broadcasting rules apply to the binary ones)
# ---------------------------------------------------------------------------

def _binary_forward(op, a, b, fn):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = fn(a.data, b.data)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcastable"
        ) from None
    return a, b, Tensor(data)


def add(a, b) -> Tensor:
    a, b, out = _binary_forward("add", a, b, np.add)

    def vjp(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _record("add", out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b, out = _binary_forward("sub", a, b, np.subtract)

    def vjp(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _record("sub", out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b, out = _binary_forward("mul", a, b, np.multiply)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _record("mul", out, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b, out = _binary_forward("div", a, b, np.divide)

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _record("div", out, (a, b), vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)
    return _record("neg", out, (a,), lambda g: (-g,))


def scalar_scale(a, factor: float) -> Tensor:
    """Multiply by a plain (non-differentiated) real factor."""
    a = as_tensor(a)
    factor = float(factor)
    out = Tensor(a.data * factor)
    return _record("scalar_scale", out, (a,), lambda g: (g * factor,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0))
    mask = a.data > 0.0
    return _record("relu", out, (a,), lambda g: (g * mask,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    out = Tensor(t)
    return _record("tanh", out, (a,), lambda g: (g * (1.0 - t * t),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # Split by sign so exp never overflows.
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s)
    return _record("sigmoid", out, (a,), lambda g: (g * s * (1.0 - s),))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        bad = float(a.data.min())
        raise ValueError(f"log of non-positive input (min value {bad})")
    out = Tensor(np.log(a.data))
    return _record("log", out, (a,), lambda g: (g / a.data,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = _check_finite(np.exp(a.data), "exp")
    out = Tensor(e)
    return _record("exp", out, (a,), lambda g: (g * e,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0.0):
        raise ValueError("sqrt of negative input")
    r = np.sqrt(a.data)
    out = Tensor(r)
    return _record("sqrt", out, (a,), lambda g: (g / (2.0 * r),))


def clamp01(a) -> Tensor:
    """Clip to [0, 1] with a straight-through (identity) backward pass."""
    a = as_tensor(a)
    out = Tensor(np.clip(a.data, 0.0, 1.0))
    return _record("clamp01", out, (a,), lambda g: (g,))


def clamp_min(a, floor: float) -> Tensor:
    """max(a, floor); gradient passes where the input is not floored."""
    a = as_tensor(a)
    floor = float(floor)
    out = Tensor(np.maximum(a.data, floor))
    mask = a.data >= floor
    return _record("clamp_min", out, (a,), lambda g: (g * mask,))


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _record("sum", out, (a,), vjp)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.data.shape).copy(),)

    return _record("mean", out, (a,), vjp)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(
            f"reshape: cannot view shape {a.shape} as {tuple(shape)}"
        ) from None
    out = Tensor(data)
    return _record("reshape", out, (a,), lambda g: (g.reshape(a.data.shape),))


def flip2d(a) -> Tensor:
    """Reverse the first two axes (used to express transposed convolution)."""
    a = as_tensor(a)
    out = Tensor(a.data[::-1, ::-1].copy())
    return _record("flip2d", out, (a,), lambda g: (g[::-1, ::-1].copy(),))


def pad2d(a, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Zero-pad the first two axes of an (H, W, ...) tensor."""
    a = as_tensor(a)
    if min(top, bottom, left, right) < 0:
        raise ShapeError("pad2d: negative padding")
    widths = ((top, bottom), (left, right)) + ((0, 0),) * (a.data.ndim - 2)
    out = Tensor(np.pad(a.data, widths))
    h, w = a.data.shape[:2]

    def vjp(g):
        return (g[top:top + h, left:left + w].copy(),)

    return _record("pad2d", out, (a,), vjp)


def dilate2d(a, stride: int) -> Tensor:
    """Insert stride-1 zeros between rows and columns of the first two axes."""
    a = as_tensor(a)
    s = int(stride)
    if s < 1:
        raise ShapeError("dilate2d: stride must be >= 1")
    if s == 1:
        out = Tensor(a.data.copy())
        return _record("dilate2d", out, (a,), lambda g: (g,))
    h, w = a.data.shape[:2]
    shape = ((h - 1) * s + 1, (w - 1) * s + 1) + a.data.shape[2:]
    data = np.zeros(shape, dtype=np.float64)
    data[::s, ::s] = a.data
    out = Tensor(data)
    return _record("dilate2d", out, (a,), lambda g: (g[::s, ::s].copy(),))


def take_axis(a, indices, axis: int) -> Tensor:
    """Gather along one axis with a constant index vector."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    data = np.take(a.data, idx, axis=axis)
    out = Tensor(data)
    n = a.data.shape[axis]

    def vjp(g):
        moved = np.moveaxis(g, axis, 0).reshape(len(idx), -1)
        acc = np.zeros((n, moved.shape[1]), dtype=np.float64)
        np.add.at(acc, idx, moved)
        back = acc.reshape((n,) + np.moveaxis(g, axis, 0).shape[1:])
        return (np.moveaxis(back, 0, axis).copy(),)

    return _record("take_axis", out, (a,), vjp)


def take_at(a, rows, cols) -> Tensor:
    """Gather a[rows[i], cols[i]] from a 2-D tensor into a vector."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"take_at expects a 2-D tensor, got shape {a.shape}")
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    if rows.shape != cols.shape:
        raise ShapeError("take_at: rows and cols must have equal length")
    out = Tensor(a.data[rows, cols])
    flat_idx = rows * a.data.shape[1] + cols

    def vjp(g):
        acc = np.bincount(flat_idx, weights=g, minlength=a.data.size)
        return (acc.reshape(a.data.shape),)

    return _record("take_at", out, (a,), vjp)


# ---------------------------------------------------------------------------
# Contractions
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-D operands, got {a.shape} and {b.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree for {a.shape} @ {b.shape}"
        )
    out = Tensor(a.data @ b.data)

    def vjp(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return (ga, gb)

    return _record("matmul", out, (a, b), vjp)


_COL_INDEX_CACHE: dict[tuple, tuple] = {}


def _im2col_indices(h, w, c, kh, kw, stride, pad):
    key = (h, w, c, kh, kw, stride, pad)
    cached = _COL_INDEX_CACHE.get(key)
    if cached is not None:
        return cached
    hp, wp = h + 2 * pad, w + 2 * pad
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    oy, ox = np.meshgrid(np.arange(oh), np.arange(ow), indexing="ij")
    dy, dx, dc = np.meshgrid(
        np.arange(kh), np.arange(kw), np.arange(c), indexing="ij"
    )
    rows = oy.reshape(-1, 1) * stride + dy.reshape(1, -1)
    cols = ox.reshape(-1, 1) * stride + dx.reshape(1, -1)
    chans = np.broadcast_to(dc.reshape(1, -1), rows.shape)
    flat = (rows * wp + cols) * c + chans
    result = (oh, ow, np.ascontiguousarray(flat))
    _COL_INDEX_CACHE[key] = result
    return result


def conv2d(x, k, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation of an (H, W, Cin) image with a
    (kh, kw, Cin, Cout) kernel, symmetric zero padding, integer stride."""
    x, k = as_tensor(x), as_tensor(k)
    if x.data.ndim != 3 or k.data.ndim != 4:
        raise ShapeError(
            f"conv2d expects image (H,W,Cin) and kernel (kh,kw,Cin,Cout), "
            f"got {x.shape} and {k.shape}"
        )
    h, w, cin = x.data.shape
    kh, kw, kcin, cout = k.data.shape
    if cin != kcin:
        raise ShapeError(
            f"conv2d: image has {cin} channels but kernel expects {kcin}"
        )
    stride, pad = int(stride), int(pad)
    if stride < 1 or pad < 0:
        raise ShapeError("conv2d: stride must be >= 1 and pad >= 0")
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ShapeError(
            f"conv2d: kernel {k.shape} larger than padded image {x.shape}"
        )
    oh, ow, idx = _im2col_indices(h, w, cin, kh, kw, stride, pad)
    if pad:
        xp = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    else:
        xp = x.data
    cols = xp.reshape(-1)[idx]
    kflat = k.data.reshape(-1, cout)
    out = Tensor((cols @ kflat).reshape(oh, ow, cout))

    def vjp(g):
        gflat = g.reshape(-1, cout)
        gx = None
        if x.requires_grad:
            dcols = gflat @ kflat.T
            acc = np.bincount(
                idx.reshape(-1), weights=dcols.reshape(-1), minlength=xp.size
            )
            gxp = acc.reshape(xp.shape)
            gx = gxp[pad:pad + h, pad:pad + w] if pad else gxp
        gk = (cols.T @ gflat).reshape(k.data.shape) if k.requires_grad else None
        return (gx, gk)

    return _record("conv2d", out, (x, k), vjp)


def corr1d_axis(x, kernel: np.ndarray, axis: int) -> Tensor:
    """Valid 1-D correlation with a constant kernel along axis 0 or 1."""
    x = as_tensor(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    taps = len(kernel)
    n = x.data.shape[axis]
    if taps > n:
        raise ShapeError(
            f"corr1d_axis: kernel of {taps} taps exceeds axis length {n}"
        )
    moved = np.moveaxis(x.data, axis, 0)
    out_len = n - taps + 1
    acc = np.zeros((out_len,) + moved.shape[1:], dtype=np.float64)
    for d in range(taps):
        acc += kernel[d] * moved[d:d + out_len]
    out = Tensor(np.moveaxis(acc, 0, axis).copy())

    def vjp(g):
        gm = np.moveaxis(g, axis, 0)
        back = np.zeros_like(moved)
        for d in range(taps):
            back[d:d + out_len] += kernel[d] * gm
        return (np.moveaxis(back, 0, axis).copy(),)

    return _record("corr1d_axis", out, (x,), vjp)


# ---------------------------------------------------------------------------
# Bilinear sampling
# ---------------------------------------------------------------------------

def grid_sample(x, ys: np.ndarray, xs: np.ndarray) -> Tensor:
    """Bilinearly sample an (H, W, C) image at constant coordinate grids.

    Coordinates are in pixel units of the source; samples outside
    [0, H-1] x [0, W-1] blend toward zero. The grids are fixed data, only
    the image pixels carry gradient.
    """
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeError(f"grid_sample expects an (H,W,C) image, got {x.shape}")
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    if ys.shape != xs.shape:
        raise ShapeError("grid_sample: coordinate grids must share a shape")
    h, w, c = x.data.shape

    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy = ys - y0
    wx = xs - x0
    y0 = y0.astype(np.intp)
    x0 = x0.astype(np.intp)

    taps = []
    for oy, ox, wt in (
        (0, 0, (1.0 - wy) * (1.0 - wx)),
        (0, 1, (1.0 - wy) * wx),
        (1, 0, wy * (1.0 - wx)),
        (1, 1, wy * wx),
    ):
        ty = y0 + oy
        tx = x0 + ox
        valid = (ty >= 0) & (ty < h) & (tx >= 0) & (tx < w)
        flat = np.where(valid, ty * w + tx, 0)
        taps.append((flat, wt * valid))

    flat_img = x.data.reshape(-1, c)
    acc = np.zeros(ys.shape + (c,), dtype=np.float64)
    for flat, wt in taps:
        acc += flat_img[flat] * wt[..., None]
    out = Tensor(acc)

    def vjp(g):
        back = np.zeros((h * w, c), dtype=np.float64)
        for flat, wt in taps:
            contrib = g * wt[..., None]
            for ch in range(c):
                back[:, ch] += np.bincount(
                    flat.reshape(-1),
                    weights=contrib[..., ch].reshape(-1),
                    minlength=h * w,
                )
        return (back.reshape(h, w, c),)

    return _record("grid_sample", out, (x,), vjp)


def _resize_coords(n_in: int, n_out: int) -> np.ndarray:
    """Sample positions for resizing: endpoints align with endpoints."""
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def bilinear_resize(x, out_h: int, out_w: int) -> Tensor:
    """Resize an (H, W, C) image with bilinear sampling.

    The sampling grid aligns image corners, so resizing to the input size
    is the identity.
    """
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeError(
            f"bilinear_resize expects an (H,W,C) image, got {x.shape}"
        )
    h, w, _ = x.data.shape
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ShapeError("bilinear_resize: output size must be positive")
    ys = _resize_coords(h, out_h)
    xs = _resize_coords(w, out_w)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return grid_sample(x, yy, xx)


def grid_translate(x, dy: float, dx: float) -> Tensor:
    """Shift an image by a fractional offset; exposed pixels read as zero.

    Output pixel (i, j) takes the value of the source at (i - dy, j - dx).
    """
    x = as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeError(
            f"grid_translate expects an (H,W,C) image, got {x.shape}"
        )
    h, w, _ = x.data.shape
    yy, xx = np.meshgrid(
        np.arange(h) - float(dy), np.arange(w) - float(dx), indexing="ij"
    )
    return grid_sample(x, yy, xx)


def paste(background, region, top: int, left: int) -> Tensor:
    """Replace a rectangle of the background with ``region`` (both H,W,C)."""
    background, region = as_tensor(background), as_tensor(region)
    if background.data.ndim != 3 or region.data.ndim != 3:
        raise ShapeError("paste expects (H,W,C) images")
    bh, bw, bc = background.data.shape
    rh, rw, rc = region.data.shape
    top, left = int(top), int(left)
    if rc != bc:
        raise ShapeError("paste: channel counts differ")
    if top < 0 or left < 0 or top + rh > bh or left + rw > bw:
        raise ShapeError(
            f"paste: region {region.shape} at ({top},{left}) exceeds "
            f"background {background.shape}"
        )
    data = background.data.copy()
    data[top:top + rh, left:left + rw] = region.data
    out = Tensor(data)

    def vjp(g):
        gb = None
        if background.requires_grad:
            gb = g.copy()
            gb[top:top + rh, left:left + rw] = 0.0
        gr = g[top:top + rh, left:left + rw].copy() if region.requires_grad else None
        return (gb, gr)

    return _record("paste", out, (background, region), vjp)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def grad_check(fn, point: Tensor, step: float = 1e-5) -> float:
    """Max relative disagreement between taped and central-difference grads.

    ``fn`` maps a Tensor to a scalar Tensor and must be deterministic. The
    metric per coordinate is |analytic - numeric| / max(1, |analytic|);
    the maximum over coordinates is returned.
    """
    base = as_tensor(point).data.astype(np.float64, copy=True)
    probe = Tensor(base, requires_grad=True)
    with Tape() as tape:
        loss = fn(probe)
    tape.backward(loss)
    analytic = probe.grad.reshape(-1).copy()

    flat = probe.data.reshape(-1)
    numeric = np.empty_like(flat)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(fn(probe).data)
            flat[i] = orig - step
            lo = float(fn(probe).data)
            flat[i] = orig
            numeric[i] = (hi - lo) / (2.0 * step)

    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))
