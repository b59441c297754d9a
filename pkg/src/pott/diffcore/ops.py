"""Differentiable operations over :class:`Tensor`.

Each op computes its forward value with numpy and registers a closure that
maps the output gradient to one gradient per input. Binary elementwise ops
broadcast like numpy; their backward rules sum over the broadcast axes.

Spectral ops use an unnormalized forward transform and a ``1/n`` inverse.
A complex spectrum of ``m`` modes is carried as a real tensor of shape
``(..., 2, m)`` holding real and imaginary parts.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import erf

from .tensor import FFTLengthError, ShapeError, Tensor, as_tensor, record

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    sa, sb = a.shape, b.shape
    return record(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")
    sa, sb = a.shape, b.shape
    return record(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        return (_unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(g * ad, bd.shape) if b.requires_grad else None)

    return record(ad * bd, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "div")
    ad, bd = a.data, b.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ad / bd

    def bw(g):
        ga = _unbroadcast(g / bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None
        return ga, gb

    return record(out, (a, b), bw, "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return record(-a.data, (a,), lambda g: (-g,), "neg")


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return record(ad * ad, (a,), lambda g: (2.0 * ad * g,), "square")


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return record(out, (a,), lambda g: (g * out,), "exp")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return record(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return record(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def gelu(a) -> Tensor:
    """Exact (erf-based) GELU."""
    a = as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))

    def bw(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)

    return record(x * cdf, (a,), bw, "gelu")


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    """``a @ b`` for ``a`` of shape (..., m, k) and ``b`` of shape (..., k, n)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    try:
        out = ad @ bd
    except ValueError:
        raise ShapeError(f"matmul: batch dims {a.shape} vs {b.shape}") from None

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return record(out, (a, b), bw, "matmul")


def affine(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` laid out as (in, out)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[0] or weight.ndim != 2:
        raise ShapeError(f"affine: input {x.shape} vs weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (wd.shape[1],):
            raise ShapeError(f"affine: bias {bias.shape} vs weight {weight.shape}")
        out = out + bias.data
        parents.append(bias)

    def bw(g):
        gx = g @ wd.T if x.requires_grad else None
        gw = None
        if weight.requires_grad:
            gw = xd.reshape(-1, wd.shape[0]).T @ g.reshape(-1, wd.shape[1])
        if bias is None:
            return gx, gw
        gb = g.reshape(-1, wd.shape[1]).sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return record(out, parents, bw, "affine")


def einsum(subscripts: str, a, b) -> Tensor:
    """Two-operand einsum, e.g. ``"bim,iom->bom"``.

    Every index of an operand must appear in the other operand or the
    output, which keeps the backward rule an einsum as well.
    """
    a, b = as_tensor(a), as_tensor(b)
    lhs, out_sub = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    for own, other in ((sa, sb), (sb, sa)):
        if len(set(own)) != len(own) or not set(own) <= set(other) | set(out_sub):
            raise ShapeError(f"einsum: unsupported subscripts {subscripts!r}")
    try:
        out = np.einsum(subscripts, a.data, b.data, optimize=True)
    except ValueError as exc:
        raise ShapeError(f"einsum {subscripts!r}: {exc}") from None
    ad, bd = a.data, b.data

    def bw(g):
        ga = np.einsum(f"{out_sub},{sb}->{sa}", g, bd, optimize=True) if a.requires_grad else None
        gb = np.einsum(f"{out_sub},{sa}->{sb}", g, ad, optimize=True) if b.requires_grad else None
        return ga, gb

    return record(np.asarray(out, dtype=np.float64), (a, b), bw, "einsum")


# ---------------------------------------------------------------- reductions & shape

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape
    kept = tuple(1 if i in axes else n for i, n in enumerate(shape))

    def bw(g):
        return (np.broadcast_to(g.reshape(kept), shape).copy(),)

    return record(np.sum(a.data, axis=axes, keepdims=keepdims), (a,), bw, "sum")


def reduce_mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    return reduce_sum(a, axes, keepdims) * (1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: {old} -> {shape}") from None
    return record(out, (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),),
                  "transpose")


def slice_(a, idx) -> Tensor:
    """Basic (view) indexing: ints, slices, ``None`` and ``Ellipsis``."""
    a = as_tensor(a)
    items = idx if isinstance(idx, tuple) else (idx,)
    if any(not (isinstance(i, (int, slice)) or i is None or i is Ellipsis) for i in items):
        raise ShapeError("slice_ supports basic indexing only")
    shape = a.shape
    out = np.array(a.data[idx])

    def bw(g):
        full = np.zeros(shape)
        full[idx] = g
        return (full,)

    return record(out, (a,), bw, "slice")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record(out, ts, bw, "concat")


def pad_last(a, width: int) -> Tensor:
    """Append ``width`` zeros along the last axis."""
    a = as_tensor(a)
    n = a.shape[-1]
    pad = [(0, 0)] * (a.ndim - 1) + [(0, width)]
    return record(np.pad(a.data, pad), (a,), lambda g: (g[..., :n],), "pad")


# ---------------------------------------------------------------- spectral

def _check_pow2(n: int, op: str):
    if n < 2 or n & (n - 1):
        raise FFTLengthError(f"{op}: length {n} is not a power of two")


def rfft(a) -> Tensor:
    """Real-to-complex FFT over the last axis; returns shape (..., 2, n//2 + 1)."""
    a = as_tensor(a)
    n = a.shape[-1]
    _check_pow2(n, "rfft")
    spec = np.fft.rfft(a.data, axis=-1)
    out = np.stack([spec.real, spec.imag], axis=-2)
    m = n // 2 + 1

    def bw(g):
        # adjoint of the unnormalized transform: interior modes appear twice
        # in the full spectrum, so they are halved before the 1/n inverse
        z = g[..., 0, :] + 1j * g[..., 1, :]
        z[..., 1:m - 1] *= 0.5
        return (n * np.fft.irfft(z, n=n, axis=-1),)

    return record(out, (a,), bw, "rfft")


def irfft(a, n: int) -> Tensor:
    """Inverse of :func:`rfft` for a (..., 2, m) spectrum, m <= n//2 + 1.

    Missing high modes are treated as zero; imaginary parts of the DC and
    Nyquist bins are ignored, as for any real signal.
    """
    a = as_tensor(a)
    _check_pow2(n, "irfft")
    if a.ndim < 2 or a.shape[-2] != 2:
        raise ShapeError(f"irfft expects (..., 2, m), got {a.shape}")
    m = a.shape[-1]
    if m > n // 2 + 1:
        raise ShapeError(f"irfft: {m} modes exceed n//2+1 for n={n}")
    z = a.data[..., 0, :] + 1j * a.data[..., 1, :]
    out = np.fft.irfft(z, n=n, axis=-1)

    def bw(g):
        spec = np.fft.rfft(g, axis=-1)[..., :m]
        weight = np.full(m, 2.0 / n)
        weight[0] = 1.0 / n
        if m == n // 2 + 1:
            weight[-1] = 1.0 / n
        gr = spec.real * weight
        gi = spec.imag * weight
        gi[..., 0] = 0.0
        if m == n // 2 + 1:
            gi[..., -1] = 0.0
        return (np.stack([gr, gi], axis=-2),)

    return record(out, (a,), bw, "irfft")


def complex_mode_mul(x, w_real, w_imag) -> Tensor:
    """Per-mode complex channel mixing used by spectral convolutions.

    ``x`` has shape (batch, in, 2, modes); the weights are (in, out, modes).
    Returns (batch, out, 2, modes).
    """
    xr = slice_(x, (slice(None), slice(None), 0))
    xi = slice_(x, (slice(None), slice(None), 1))
    spec = "bim,iom->bom"
    yr = einsum(spec, xr, w_real) - einsum(spec, xi, w_imag)
    yi = einsum(spec, xr, w_imag) + einsum(spec, xi, w_real)
    b, o, m = yr.shape
    return concat([reshape(yr, (b, o, 1, m)), reshape(yi, (b, o, 1, m))], axis=2)
