"""
Differentiable operator catalog

Every operator is a forward function returning ``(output, ctx)`` and a VJP
``(ctx, cotangent) -> input cotangents``.  ``apply`` validates shapes, rejects
non-finite outputs and links the result into the gradient graph.
"""

import builtins
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..utils.errors import NonFiniteError, ShapeError
from .tensor import DTYPE, Tensor, as_tensor, is_grad_enabled


@dataclass(frozen=True)
class DifferentiableOp:
    """One catalog entry: analytic forward plus vector-Jacobian product"""
    name: str
    forward: Callable[..., Tuple[np.ndarray, Any]]
    vjp: Callable[[Any, np.ndarray], Tuple[Optional[np.ndarray], ...]]
    near_kink: Optional[Callable[..., np.ndarray]] = None


OP_SET: Dict[str, DifferentiableOp] = {}


def register(name: str, forward, vjp, near_kink=None) -> DifferentiableOp:
    op = DifferentiableOp(name, forward, vjp, near_kink)
    OP_SET[name] = op
    return op


def op_set() -> Dict[str, DifferentiableOp]:
    """The catalog of differentiable operators"""
    return dict(OP_SET)


def apply(op: DifferentiableOp, *inputs, **params) -> Tensor:
    tensors = tuple(as_tensor(x) for x in inputs)
    try:
        out, ctx = op.forward(*(t.data for t in tensors), **params)
    except ShapeError:
        raise
    except (ValueError, IndexError) as exc:
        raise ShapeError(f"{op.name}: {exc}", operator=op.name,
                         shapes=[t.shape for t in tensors]) from exc
    out = np.asarray(out, dtype=DTYPE)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{op.name} produced non-finite values", operator=op.name,
                             shapes=[t.shape for t in tensors])
    if not (is_grad_enabled() and any(t.requires_grad for t in tensors)):
        return Tensor(out)

    def vjp(g, _ctx=ctx):
        return op.vjp(_ctx, g)

    return Tensor(out, requires_grad=True, _parents=tensors, _vjp=vjp, op=op.name)


def _check(condition: bool, name: str, message: str, *shapes) -> None:
    if not condition:
        raise ShapeError(f"{name}: {message}", operator=name, shapes=list(shapes))


def unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast cotangent back down to ``shape``"""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shapes(name: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: cannot broadcast {a.shape} with {b.shape}",
                         operator=name, shapes=[a.shape, b.shape]) from None


# -- elementwise binary ---------------------------------------------------------

def _add_fwd(a, b):
    _broadcast_shapes('add', a, b)
    return a + b, (a.shape, b.shape)


def _add_vjp(ctx, g):
    sa, sb = ctx
    return unbroadcast(g, sa), unbroadcast(g, sb)


def _sub_fwd(a, b):
    _broadcast_shapes('sub', a, b)
    return a - b, (a.shape, b.shape)


def _sub_vjp(ctx, g):
    sa, sb = ctx
    return unbroadcast(g, sa), unbroadcast(-g, sb)


def _mul_fwd(a, b):
    _broadcast_shapes('mul', a, b)
    return a * b, (a, b)


def _mul_vjp(ctx, g):
    a, b = ctx
    return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)


def _div_fwd(a, b):
    _broadcast_shapes('div', a, b)
    return a / b, (a, b)


def _div_vjp(ctx, g):
    a, b = ctx
    return unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)


ADD = register('add', _add_fwd, _add_vjp)
SUB = register('sub', _sub_fwd, _sub_vjp)
MUL = register('mul', _mul_fwd, _mul_vjp)
DIV = register('div', _div_fwd, _div_vjp)


def add(a, b) -> Tensor:
    if np.isscalar(b):
        return add_scalar(a, b)
    if np.isscalar(a):
        return add_scalar(b, a)
    return apply(ADD, a, b)


def sub(a, b) -> Tensor:
    if np.isscalar(b):
        return add_scalar(a, -b)
    if np.isscalar(a):
        return add_scalar(neg(b), a)
    return apply(SUB, a, b)


def mul(a, b) -> Tensor:
    if np.isscalar(b):
        return mul_scalar(a, b)
    if np.isscalar(a):
        return mul_scalar(b, a)
    return apply(MUL, a, b)


def div(a, b) -> Tensor:
    if np.isscalar(b):
        return mul_scalar(a, 1.0 / b)
    return apply(DIV, a, b)


# -- scalar and unary -------------------------------------------------------------

ADD_SCALAR = register('add_scalar', lambda x, c: (x + c, None), lambda ctx, g: (g,))
MUL_SCALAR = register('mul_scalar', lambda x, c: (x * c, c), lambda ctx, g: (g * ctx,))
NEG = register('neg', lambda x: (-x, None), lambda ctx, g: (-g,))


def add_scalar(x, c: float) -> Tensor:
    return apply(ADD_SCALAR, x, c=float(c))


def mul_scalar(x, c: float) -> Tensor:
    return apply(MUL_SCALAR, x, c=float(c))


def neg(x) -> Tensor:
    return apply(NEG, x)


def _power_fwd(x, p):
    return np.power(x, p), (x, p)


def _power_vjp(ctx, g):
    x, p = ctx
    return (g * p * np.power(x, p - 1),)


POWER = register('power', _power_fwd, _power_vjp)


def power(x, p: float) -> Tensor:
    return apply(POWER, x, p=float(p))


def _exp_fwd(x):
    y = np.exp(x)
    return y, y


EXP = register('exp', _exp_fwd, lambda y, g: (g * y,))


def exp(x) -> Tensor:
    return apply(EXP, x)


def _log_fwd(x):
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.log(x), x


LOG = register('log', _log_fwd, lambda x, g: (g / x,))


def log(x) -> Tensor:
    return apply(LOG, x)


ABS = register('abs', lambda x: (np.abs(x), np.sign(x)), lambda s, g: (g * s,),
               near_kink=lambda x, h: np.abs(x) <= 2 * h)


def abs(x) -> Tensor:  # noqa: A001
    return apply(ABS, x)


def _clamp_fwd(x, lo, hi):
    inside = np.ones_like(x, dtype=bool)
    if lo is not None:
        inside &= x >= lo
    if hi is not None:
        inside &= x <= hi
    return np.clip(x, lo, hi), inside


def _clamp_near_kink(x, h, lo=None, hi=None):
    near = np.zeros(x.shape, dtype=bool)
    for bound in (lo, hi):
        if bound is not None:
            near |= np.abs(x - bound) <= 2 * h
    return near


CLAMP = register('clamp', _clamp_fwd, lambda inside, g: (g * inside,), near_kink=_clamp_near_kink)


def clamp(x, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    """Clip with subgradient 1 inside ``[lo, hi]`` (ties included) and 0 outside"""
    return apply(CLAMP, x, lo=lo, hi=hi)


RELU = register('relu', lambda x: (np.maximum(x, 0.0), x > 0), lambda pos, g: (g * pos,),
                near_kink=lambda x, h: np.abs(x) <= 2 * h)


def relu(x) -> Tensor:
    return apply(RELU, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sigmoid_fwd(x):
    y = _sigmoid(x)
    return y, y


SIGMOID = register('sigmoid', _sigmoid_fwd, lambda y, g: (g * y * (1.0 - y),))


def sigmoid(x) -> Tensor:
    return apply(SIGMOID, x)


def _tanh_fwd(x):
    y = np.tanh(x)
    return y, y


TANH = register('tanh', _tanh_fwd, lambda y, g: (g * (1.0 - y * y),))


def tanh(x) -> Tensor:
    return apply(TANH, x)


def _softmax_fwd(x, axis):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return y, (y, axis)


def _softmax_vjp(ctx, g):
    y, axis = ctx
    return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)


SOFTMAX = register('softmax', _softmax_fwd, _softmax_vjp)


def softmax(x, axis: int = -1) -> Tensor:
    return apply(SOFTMAX, x, axis=axis)


def _log_softmax_fwd(x, axis):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    y = shifted - lse
    return y, (np.exp(y), axis)


def _log_softmax_vjp(ctx, g):
    p, axis = ctx
    return (g - p * np.sum(g, axis=axis, keepdims=True),)


LOG_SOFTMAX = register('log_softmax', _log_softmax_fwd, _log_softmax_vjp)


def log_softmax(x, axis: int = -1) -> Tensor:
    return apply(LOG_SOFTMAX, x, axis=axis)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def _diff_round_fwd(x):
    n = _round_half_up(x)
    r = x - n
    return n + r ** 3, r


DIFF_ROUND = register('diff_round', _diff_round_fwd, lambda r, g: (g * 3.0 * r * r,),
                      near_kink=lambda x, h: np.abs(x - np.floor(x) - 0.5) <= 2 * h)


def diff_round(x) -> Tensor:
    """round(x) + (x - round(x))**3, a rounding surrogate with non-zero slope"""
    return apply(DIFF_ROUND, x)


# -- linear algebra ------------------------------------------------------------------

def _swap_last(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _matmul_fwd(a, b):
    _check(a.ndim >= 2 and b.ndim >= 2, 'matmul', 'operands must be at least 2-D', a.shape, b.shape)
    _check(a.shape[-1] == b.shape[-2], 'matmul', f'inner dimensions {a.shape[-1]} != {b.shape[-2]}',
           a.shape, b.shape)
    return np.matmul(a, b), (a, b)


def _matmul_vjp(ctx, g):
    a, b = ctx
    ga = np.matmul(g, _swap_last(b))
    gb = np.matmul(_swap_last(a), g)
    return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)


MATMUL = register('matmul', _matmul_fwd, _matmul_vjp)


def matmul(a, b) -> Tensor:
    return apply(MATMUL, a, b)


# -- convolution and pooling --------------------------------------------------------

def _conv2d_fwd(x, w, b=None, stride=1, pad=0):
    _check(x.ndim == 3 and w.ndim == 4, 'conv2d', 'expects x (C,H,W) and w (O,C,kh,kw)', x.shape, w.shape)
    _check(x.shape[0] == w.shape[1], 'conv2d', f'channel mismatch {x.shape[0]} != {w.shape[1]}',
           x.shape, w.shape)
    kh, kw = w.shape[2:]
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    _check(xp.shape[1] >= kh and xp.shape[2] >= kw, 'conv2d', 'kernel larger than padded input',
           x.shape, w.shape)
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(w, windows, axes=([1, 2, 3], [0, 3, 4]))
    if b is not None:
        _check(b.shape == (w.shape[0],), 'conv2d', 'bias must have one entry per output channel',
               w.shape, b.shape)
        out = out + b[:, None, None]
    return out, (x.shape, xp.shape, w, windows, stride, pad, b is not None)


def _conv2d_vjp(ctx, g):
    x_shape, xp_shape, w, windows, stride, pad, has_bias = ctx
    kh, kw = w.shape[2:]
    ho, wo = g.shape[1:]
    gw = np.tensordot(g, windows, axes=([1, 2], [1, 2]))
    cols = np.tensordot(w, g, axes=([0], [0]))  # (C, kh, kw, Ho, Wo)
    gxp = np.zeros(xp_shape, dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            gxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, i, j]
    gx = gxp[:, pad:pad + x_shape[1], pad:pad + x_shape[2]] if pad else gxp
    gb = g.sum(axis=(1, 2)) if has_bias else None
    return (gx, gw, gb) if has_bias else (gx, gw)


CONV2D = register('conv2d', _conv2d_fwd, _conv2d_vjp)


def conv2d(x, w, b=None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation of a (C,H,W) image with zero padding"""
    if b is None:
        return apply(CONV2D, x, w, stride=stride, pad=pad)
    return apply(CONV2D, x, w, b, stride=stride, pad=pad)


def _depthwise_fwd(x, w):
    _check(x.ndim == 3 and w.ndim == 3 and x.shape[0] == w.shape[0], 'depthwise_conv2d',
           'expects x (C,H,W) and w (C,kh,kw)', x.shape, w.shape)
    kh, kw = w.shape[1:]
    _check(x.shape[1] >= kh and x.shape[2] >= kw, 'depthwise_conv2d', 'kernel larger than input',
           x.shape, w.shape)
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
    out = np.einsum('chwij,cij->chw', windows, w, optimize=True)
    return out, (x.shape, w, windows)


def _depthwise_vjp(ctx, g):
    x_shape, w, windows = ctx
    kh, kw = w.shape[1:]
    ho, wo = g.shape[1:]
    gw = np.einsum('chwij,chw->cij', windows, g, optimize=True)
    gx = np.zeros(x_shape, dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            gx[:, i:i + ho, j:j + wo] += w[:, i, j][:, None, None] * g
    return gx, gw


DEPTHWISE_CONV2D = register('depthwise_conv2d', _depthwise_fwd, _depthwise_vjp)


def depthwise_conv2d(x, w) -> Tensor:
    """Per-channel valid cross-correlation"""
    return apply(DEPTHWISE_CONV2D, x, w)


def _pool_view(x, k, name):
    _check(x.ndim == 3, name, 'expects (C,H,W)', x.shape)
    c, h, w = x.shape
    ho, wo = h // k, w // k
    _check(ho > 0 and wo > 0, name, f'input smaller than pool size {k}', x.shape)
    return x[:, :ho * k, :wo * k].reshape(c, ho, k, wo, k)


def _avg_pool_fwd(x, k):
    view = _pool_view(x, k, 'avg_pool2d')
    return view.mean(axis=(2, 4)), (x.shape, k)


def _avg_pool_vjp(ctx, g):
    shape, k = ctx
    gx = np.zeros(shape, dtype=DTYPE)
    ho, wo = g.shape[1:]
    expanded = np.repeat(np.repeat(g, k, axis=1), k, axis=2) / (k * k)
    gx[:, :ho * k, :wo * k] = expanded
    return (gx,)


def _max_pool_fwd(x, k):
    view = _pool_view(x, k, 'max_pool2d')
    out = view.max(axis=(2, 4))
    hits = view == out[:, :, None, :, None]
    hits = hits / hits.sum(axis=(2, 4), keepdims=True)
    return out, (x.shape, k, hits)


def _max_pool_vjp(ctx, g):
    shape, k, hits = ctx
    gx = np.zeros(shape, dtype=DTYPE)
    c, ho, _, wo, _ = hits.shape
    gx[:, :ho * k, :wo * k] = (hits * g[:, :, None, :, None]).reshape(c, ho * k, wo * k)
    return (gx,)


AVG_POOL2D = register('avg_pool2d', _avg_pool_fwd, _avg_pool_vjp)
MAX_POOL2D = register('max_pool2d', _max_pool_fwd, _max_pool_vjp)


def avg_pool2d(x, k: int = 2) -> Tensor:
    return apply(AVG_POOL2D, x, k=k)


def max_pool2d(x, k: int = 2) -> Tensor:
    return apply(MAX_POOL2D, x, k=k)


# -- resampling ----------------------------------------------------------------------

def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Linear interpolation weights with half-pixel centers, edges clamped"""
    m = np.zeros((n_out, n_in), dtype=DTYPE)
    if n_in == n_out:
        np.fill_diagonal(m, 1.0)
        return m
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    return m


def _resize_fwd(x, out_h, out_w):
    _check(x.ndim == 3, 'resize_bilinear', 'expects (C,H,W)', x.shape)
    ry = interp_matrix(x.shape[1], out_h)
    rx = interp_matrix(x.shape[2], out_w)
    return np.matmul(np.matmul(ry, x), rx.T), (ry, rx)


def _resize_vjp(ctx, g):
    ry, rx = ctx
    return (np.matmul(np.matmul(ry.T, g), rx),)


RESIZE_BILINEAR = register('resize_bilinear', _resize_fwd, _resize_vjp)


def resize_bilinear(x, out_h: int, out_w: int) -> Tensor:
    return apply(RESIZE_BILINEAR, x, out_h=int(out_h), out_w=int(out_w))


def _sample_fwd(x, ys, xs):
    _check(x.ndim == 3, 'bilinear_sample', 'expects (C,H,W)', x.shape)
    _check(ys.shape == xs.shape, 'bilinear_sample', 'coordinate grids differ', ys.shape, xs.shape)
    c, h, w = x.shape
    ys = np.clip(ys, 0.0, h - 1)
    xs = np.clip(xs, 0.0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = ys - y0
    wx = xs - x0
    corners = (
        (y0 * w + x0, (1 - wy) * (1 - wx)),
        (y0 * w + x1, (1 - wy) * wx),
        (y1 * w + x0, wy * (1 - wx)),
        (y1 * w + x1, wy * wx),
    )
    flat = x.reshape(c, -1)
    out = builtins.sum(flat[:, idx] * wt for idx, wt in corners)
    return out, (x.shape, corners)


def _sample_vjp(ctx, g):
    shape, corners = ctx
    c = shape[0]
    gflat = np.zeros((c, shape[1] * shape[2]), dtype=DTYPE)
    for idx, wt in corners:
        contribution = (g * wt).reshape(c, -1)
        for ch in range(c):
            gflat[ch] += np.bincount(idx.ravel(), weights=contribution[ch], minlength=gflat.shape[1])
    return gflat.reshape(shape), None, None


BILINEAR_SAMPLE = register('bilinear_sample', _sample_fwd, _sample_vjp)


def bilinear_sample(x, ys: np.ndarray, xs: np.ndarray) -> Tensor:
    """Sample ``x`` at fractional pixel coordinates, clamping to the edge; no gradient to coordinates"""
    return apply(BILINEAR_SAMPLE, x, Tensor(ys), Tensor(xs))


# -- reductions and shape ------------------------------------------------------------

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _sum_fwd(x, axis, keepdims):
    return np.sum(x, axis=axis, keepdims=keepdims), (x.shape, _norm_axes(axis, x.ndim), keepdims)


def _sum_vjp(ctx, g):
    shape, axes, keepdims = ctx
    if not keepdims:
        g = np.expand_dims(g, axes)
    return (np.broadcast_to(g, shape).copy(),)


def _mean_fwd(x, axis, keepdims):
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    _check(count > 0, 'mean', 'mean of an empty axis', x.shape)
    return np.mean(x, axis=axis, keepdims=keepdims), (x.shape, axes, keepdims, count)


def _mean_vjp(ctx, g):
    shape, axes, keepdims, count = ctx
    if not keepdims:
        g = np.expand_dims(g, axes)
    return (np.broadcast_to(g / count, shape).copy(),)


SUM = register('sum', _sum_fwd, _sum_vjp)
MEAN = register('mean', _mean_fwd, _mean_vjp)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return apply(SUM, x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    return apply(MEAN, x, axis=axis, keepdims=keepdims)


def _concat_fwd(*xs, axis):
    out = np.concatenate(xs, axis=axis)
    sizes = [x.shape[axis] for x in xs]
    return out, (np.cumsum(sizes)[:-1], axis)


def _concat_vjp(ctx, g):
    splits, axis = ctx
    return tuple(np.split(g, splits, axis=axis))


CONCAT = register('concat', _concat_fwd, _concat_vjp)


def concat(xs: Sequence, axis: int = 0) -> Tensor:
    return apply(CONCAT, *xs, axis=axis)


def _getitem_fwd(x, index):
    return x[index], (x.shape, index)


def _getitem_vjp(ctx, g):
    shape, index = ctx
    gx = np.zeros(shape, dtype=DTYPE)
    np.add.at(gx, index, g)
    return (gx,)


GETITEM = register('getitem', _getitem_fwd, _getitem_vjp)


def getitem(x, index) -> Tensor:
    """Slicing and integer-array indexing"""
    return apply(GETITEM, x, index=index)


def _reshape_fwd(x, shape):
    return x.reshape(shape), x.shape


RESHAPE = register('reshape', _reshape_fwd, lambda shape, g: (g.reshape(shape),))


def reshape(x, shape) -> Tensor:
    return apply(RESHAPE, x, shape=tuple(shape))


def _transpose_fwd(x, axes):
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    return np.transpose(x, axes), np.argsort(axes)


TRANSPOSE = register('transpose', _transpose_fwd, lambda inv, g: (np.transpose(g, inv),))


def transpose(x, axes=None) -> Tensor:
    return apply(TRANSPOSE, x, axes=axes)


def _pad_fwd(x, pad_width, mode):
    pad_width = tuple((int(a), int(b)) for a, b in pad_width)
    _check(len(pad_width) == x.ndim, 'pad', 'one (before, after) pair per axis', x.shape)
    if mode == 'constant':
        out = np.pad(x, pad_width)
        return out, (mode, x.shape, pad_width, None)
    _check(mode in ('reflect', 'edge'), 'pad', f'unknown mode {mode}', x.shape)
    if mode == 'reflect':
        for (before, after), n in zip(pad_width, x.shape):
            _check(builtins.max(before, after) < n, 'pad', 'reflect padding must be smaller than the axis',
                   x.shape)
    index = np.ix_(*[np.pad(np.arange(n), pw, mode=mode) for n, pw in zip(x.shape, pad_width)])
    return x[index], (mode, x.shape, pad_width, index)


def _pad_vjp(ctx, g):
    mode, shape, pad_width, index = ctx
    if mode == 'constant':
        crop = tuple(slice(a, a + n) for (a, _), n in zip(pad_width, shape))
        return (g[crop].copy(),)
    gx = np.zeros(shape, dtype=DTYPE)
    np.add.at(gx, index, g)
    return (gx,)


PAD = register('pad', _pad_fwd, _pad_vjp)


def pad(x, pad_width, mode: str = 'constant') -> Tensor:
    """Zero, reflect (edge excluded) or edge padding"""
    return apply(PAD, x, pad_width=pad_width, mode=mode)
