"""Differentiable operators on :class:`Tensor`.

Layout is N,C,H,W for feature maps.  FLOPs follow one rule: conv-like ops
count 2 per multiply-accumulate (bias adds excluded), everything else counts
one per output element.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .core import Tensor, as_tensor, make_result

# --------------------------------------------------------------------------
# helpers


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _norm_axes(axis, ndim: int) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# --------------------------------------------------------------------------
# elementwise arithmetic


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "add")
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(out, (a, b), bw, "add", flops=out.size)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "sub")
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(out, (a, b), bw, "sub", flops=out.size)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "mul")
    out = a.data * b.data

    def bw(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(out, (a, b), bw, "mul", flops=out.size)


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,), "neg", flops=a.size)


def channel_scale(x: Tensor, weights: Tensor) -> Tensor:
    """Scale each channel of ``x[N,C,H,W]`` by ``weights[N,C,1,1]``."""
    n, c = x.shape[:2]
    if x.ndim != 4 or weights.shape != (n, c, 1, 1):
        raise ValueError(f"channel_scale: weights {weights.shape} do not match input {x.shape}")
    return mul(x, weights)


def spatial_scale(x: Tensor, spatial_map: Tensor) -> Tensor:
    """Scale every channel of ``x[N,C,H,W]`` by the same ``map[N,1,H,W]``."""
    n, _, h, w = x.shape
    if spatial_map.shape != (n, 1, h, w):
        raise ValueError(f"spatial_scale: map {spatial_map.shape} does not match input {x.shape}")
    return mul(x, spatial_map)


# --------------------------------------------------------------------------
# reductions and shape ops


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _norm_axes(axis, x.ndim)
    out = np.sum(x.data, axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(np.asarray(out, dtype=x.dtype), (x,), bw, "sum", flops=x.size)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = math.prod(x.shape[a] for a in axes)
    out = np.mean(x.data, axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape).astype(x.dtype),)

    return make_result(np.asarray(out, dtype=x.dtype), (x,), bw, "mean", flops=x.size)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over H and W: ``[N,C,H,W] -> [N,C,1,1]``."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool expects a 4-D input, got {x.shape}")
    return mean(x, axis=(2, 3), keepdims=True)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = x.data.reshape(shape)
    return make_result(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def concat(inputs: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not inputs:
        raise ValueError("concat needs at least one input")
    ndim = inputs[0].ndim
    ax = axis % ndim
    for t in inputs[1:]:
        if t.ndim != ndim or any(t.shape[i] != inputs[0].shape[i] for i in range(ndim) if i != ax):
            raise ValueError(f"concat: incompatible shapes {[t.shape for t in inputs]}")
    out = np.concatenate([t.data for t in inputs], axis=ax)
    bounds = np.cumsum([t.shape[ax] for t in inputs])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return make_result(out, tuple(inputs), bw, "concat")


# --------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype, copy=False)
    return make_result(out, (x,), lambda g: (g * mask,), "relu", flops=x.size)


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return make_result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid", flops=x.size)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise ValueError(f"softmax axis {axis} invalid for shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result(y, (x,), bw, "softmax", flops=x.size)


# --------------------------------------------------------------------------
# convolutions


def conv_output_size(size: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def _pad_hw(x: np.ndarray, p: int) -> np.ndarray:
    """Zero-pad the last two axes by ``p`` (cheaper than np.pad for small maps)."""
    out = np.zeros(x.shape[:-2] + (x.shape[-2] + 2 * p, x.shape[-1] + 2 * p), dtype=x.dtype)
    out[..., p : p + x.shape[-2], p : p + x.shape[-1]] = x
    return out


def _im2col(xp: np.ndarray, k: int, ho: int, wo: int, stride: int, dilation: int) -> np.ndarray:
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, ho, wo), dtype=xp.dtype)
    hspan, wspan = stride * (ho - 1) + 1, stride * (wo - 1) + 1
    for i in range(k):
        for j in range(k):
            r, s = i * dilation, j * dilation
            cols[:, :, i, j] = xp[:, :, r : r + hspan : stride, s : s + wspan : stride]
    return cols.reshape(n, c * k * k, ho * wo)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    """2-D cross-correlation, ``[N,Cin,H,W] * [Cout,Cin,k,k] -> [N,Cout,H',W']``."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, k, k2 = weight.shape
    if wcin != cin or k != k2:
        raise ValueError(f"conv2d: weight {weight.shape} incompatible with input {x.shape}")
    if k % 2 == 0 and k != 1:
        raise ValueError(f"conv2d: kernel size must be odd, got {k}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"conv2d: bias shape {bias.shape} != ({cout},)")
    ho = conv_output_size(h, k, stride, padding, dilation)
    wo = conv_output_size(w, k, stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d: non-positive output size {ho}x{wo} for input {h}x{w}")

    wmat = weight.data.reshape(cout, cin * k * k)
    pointwise = k == 1 and stride == 1 and padding == 0
    if pointwise:
        cols = x.data.reshape(n, cin, h * w)
        xp = None
    else:
        xp = _pad_hw(x.data, padding) if padding else x.data
        cols = _im2col(xp, k, ho, wo, stride, dilation)
    out = np.matmul(wmat, cols).reshape(n, cout, ho, wo)
    if bias is not None:
        out += bias.data.reshape(1, cout, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        g2 = g.reshape(n, cout, ho * wo)
        gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape) if weight.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(wmat.T, g2)
            if pointwise:
                gx = gcols.reshape(x.shape)
            else:
                gxp = np.zeros(xp.shape, dtype=x.dtype)
                gcols = gcols.reshape(n, cin, k, k, ho, wo)
                hspan, wspan = stride * (ho - 1) + 1, stride * (wo - 1) + 1
                for i in range(k):
                    for j in range(k):
                        r, s = i * dilation, j * dilation
                        gxp[:, :, r : r + hspan : stride, s : s + wspan : stride] += gcols[:, :, i, j]
                gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return make_result(out, parents, bw, "conv2d", flops=2 * n * cout * cin * k * k * ho * wo)


def conv1d(x: Tensor, weight: Tensor, padding: Optional[int] = None) -> Tensor:
    """Length-preserving single-channel 1-D cross-correlation ``[N,1,L] * [1,1,k]``."""
    if x.ndim != 3 or x.shape[1] != 1:
        raise ValueError(f"conv1d expects [N,1,L] input, got {x.shape}")
    if weight.ndim != 3 or weight.shape[:2] != (1, 1):
        raise ValueError(f"conv1d expects [1,1,k] weight, got {weight.shape}")
    k = weight.shape[2]
    if k % 2 == 0:
        raise ValueError(f"conv1d: kernel size must be odd, got {k}")
    pad = (k - 1) // 2
    if padding is not None and padding != pad:
        raise ValueError(f"conv1d: padding must be {pad} for kernel {k}, got {padding}")
    n, _, length = x.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad))) if pad else x.data
    wv = weight.data.reshape(k)
    out = np.zeros_like(x.data)
    for j in range(k):
        out += wv[j] * xp[:, :, j : j + length]

    def bw(g):
        gx = gw = None
        if x.requires_grad:
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            for j in range(k):
                gxp[:, :, j : j + length] += wv[j] * g
            gx = gxp[:, :, pad : pad + length] if pad else gxp
        if weight.requires_grad:
            gw = np.array([np.sum(g * xp[:, :, j : j + length]) for j in range(k)], dtype=x.dtype).reshape(weight.shape)
        return gx, gw

    return make_result(out, (x, weight), bw, "conv1d", flops=2 * n * k * length)


# --------------------------------------------------------------------------
# normalization


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization of ``[N,C,H,W]``.

    In training mode batch statistics are used and the running buffers are
    updated in place as ``running = momentum * running + (1 - momentum) * batch``
    (the variance buffer tracks the unbiased estimate).
    """
    if eps <= 0:
        raise ValueError("batch_norm: eps must be positive")
    if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ValueError(f"batch_norm: channel mismatch between input {x.shape} and affine {gamma.shape}")
    c = x.shape[1]
    shape = (1, c, 1, 1)
    if training:
        axes = (0, 2, 3)
        m = x.size // c
        mu = x.data.mean(axis=axes, keepdims=True)
        xc = x.data - mu
        var = (xc * xc).mean(axis=axes, keepdims=True)
        running_mean *= momentum
        running_mean += (1 - momentum) * mu.reshape(c)
        running_var *= momentum
        running_var += (1 - momentum) * var.reshape(c) * (m / max(m - 1, 1))
    else:
        m = None
        xc = x.data - running_mean.reshape(shape).astype(x.dtype)
        var = running_var.reshape(shape).astype(x.dtype)
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = xc * inv
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def bw(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        gxhat = g * gamma.data.reshape(shape)
        if training:
            s1 = gxhat.sum(axis=(0, 2, 3), keepdims=True)
            s2 = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            gx = (inv / m) * (m * gxhat - s1 - xhat * s2)
        else:
            gx = gxhat * inv
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), bw, "batch_norm", flops=4 * x.size)


def layer_norm(x: Tensor, normalized_ndim: int, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each sample over its last ``normalized_ndim`` dims.

    ``gamma``/``beta`` broadcast against those trailing dims, so a per-channel
    affine on a ``[N,C,H,W]`` map uses shape ``[C,1,1]``.
    """
    if eps <= 0:
        raise ValueError("layer_norm: eps must be positive")
    if not 1 <= normalized_ndim <= x.ndim:
        raise ValueError(f"layer_norm: cannot normalize {normalized_ndim} dims of {x.shape}")
    tail = x.shape[-normalized_ndim:]
    for p in (gamma, beta):
        if p.ndim > normalized_ndim:
            raise ValueError(f"layer_norm: affine shape {p.shape} exceeds normalized dims {tail}")
        try:
            np.broadcast_shapes(p.shape, tail)
        except ValueError:
            raise ValueError(f"layer_norm: affine shape {p.shape} incompatible with {tail}") from None
    axes = tuple(range(x.ndim - normalized_ndim, x.ndim))
    m = math.prod(tail)
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        ggamma = _unbroadcast(g * xhat, gamma.shape)
        gbeta = _unbroadcast(g, beta.shape)
        gxhat = g * gamma.data
        s1 = gxhat.sum(axis=axes, keepdims=True)
        s2 = (gxhat * xhat).sum(axis=axes, keepdims=True)
        gx = (inv / m) * (m * gxhat - s1 - xhat * s2)
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), bw, "layer_norm", flops=4 * x.size)


# --------------------------------------------------------------------------
# resampling


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2, ceil mode.  Gradient goes to the first maximum."""
    n, c, h, w = x.shape
    ho, wo = -(-h // 2), -(-w // 2)
    xp = x.data
    if (2 * ho, 2 * wo) != (h, w):
        xp = np.full((n, c, 2 * ho, 2 * wo), -np.inf, dtype=x.dtype)
        xp[:, :, :h, :w] = x.data
    win = xp.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    idx = win.argmax(axis=-1)[..., None]
    out = np.take_along_axis(win, idx, axis=-1)[..., 0]

    def bw(g):
        gw = np.zeros((n, c, ho, wo, 4), dtype=x.dtype)
        np.put_along_axis(gw, idx, g[..., None], axis=-1)
        gfull = gw.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
        return (gfull[:, :, :h, :w],)

    return make_result(out, (x,), bw, "maxpool2", flops=out.size * 3)


def interp_matrix(n_in: int, n_out: int, dtype=np.float32) -> np.ndarray:
    """Bilinear weights with half-pixel centres: row ``i`` gives output sample ``i``."""
    m = np.zeros((n_out, n_in), dtype=np.float64)
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, None)
    i0 = np.minimum(np.floor(src).astype(int), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1 - lam)
    np.add.at(m, (rows, i1), lam)
    return m.astype(dtype)


def upsample_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of ``[N,C,h,w]`` to ``[N,C,out_h,out_w]`` (align_corners=False)."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"upsample_bilinear: zero target size {out_h}x{out_w}")
    n, c, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x
    mh = interp_matrix(h, out_h, x.dtype)
    mw = interp_matrix(w, out_w, x.dtype)
    out = np.matmul(np.matmul(mh, x.data), mw.T)

    def bw(g):
        return (np.matmul(np.matmul(mh.T, g), mw),)

    return make_result(out, (x,), bw, "upsample_bilinear", flops=out.size)


# --------------------------------------------------------------------------
# loss


def bce_with_logits(logits: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross-entropy of ``sigmoid(logits)`` against a {0,1} target.

    Uses ``max(x,0) - x*y + log1p(exp(-|x|))`` so large logits never overflow.
    """
    if logits.shape != target.shape:
        raise ValueError(f"bce: logits {logits.shape} and target {target.shape} differ")
    x, y = logits.data, target.data
    per = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    out = np.asarray(per.mean(), dtype=x.dtype)
    count = x.size

    def bw(g):
        return ((_sigmoid(x) - y) * (g / count),)

    return make_result(out, (logits,), bw, "bce_with_logits", flops=5 * x.size)
