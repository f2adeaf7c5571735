"""Differentiable operations on NCHW tensors.

Every op returns a new Tensor and never writes into its inputs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, make_result


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise / reductions ------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    return make_result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    return make_result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def sum(x: Tensor) -> Tensor:  # noqa: A001
    return make_result(np.asarray(x.data.sum(), dtype=x.dtype), (x,),
                       lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype),), "sum")


def mean(x: Tensor) -> Tensor:
    n = x.size
    return make_result(np.asarray(x.data.mean(), dtype=x.dtype), (x,),
                       lambda g: (np.full(x.shape, g / n, dtype=x.dtype),), "mean")


def reshape(x: Tensor, shape) -> Tensor:
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(np.ascontiguousarray(x.data.transpose(axes)), (x,),
                       lambda g: (g.transpose(inverse),), "transpose")


def flatten(x: Tensor) -> Tensor:
    """(N, ...) -> (N, prod(...))."""
    return reshape(x, (x.shape[0], -1))


def log(x: Tensor) -> Tensor:
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


# -- activations -------------------------------------------------------------

def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    s = x.dtype.type(slope)
    out = np.maximum(x.data, x.data * s) if 0 <= slope <= 1 else np.where(x.data >= 0, x.data, x.data * s)
    pos = x.data >= 0
    return make_result(out, (x,), lambda g: (np.where(pos, g, g * s),), "leaky_relu")


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def _stable_sigmoid(v):
    z = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(v.dtype)


def sigmoid(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


# -- dense / concat ----------------------------------------------------------

def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map ``x @ w.T + b`` with w of shape (out, in)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"dense: cannot apply weight {w.shape} to input {x.shape}")
    out = x.data @ w.data.T
    parents = (x, w)
    if b is not None:
        if b.shape != (w.shape[0],):
            raise ValueError(f"dense: bias shape {b.shape} does not match {w.shape[0]} outputs")
        out = out + b.data
        parents = (x, w, b)

    def backward_fn(g):
        grads = (g @ w.data, g.T @ x.data)
        return grads + (g.sum(axis=0),) if b is not None else grads

    return make_result(out, parents, backward_fn, "dense")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 4 or b.data.ndim != 4:
        raise ValueError("concat_channels expects NCHW tensors")
    if (a.shape[0],) + a.shape[2:] != (b.shape[0],) + b.shape[2:]:
        raise ValueError(f"concat_channels: shapes {a.shape} and {b.shape} disagree outside channels")
    ca = a.shape[1]
    return make_result(
        np.concatenate([a.data, b.data], axis=1),
        (a, b),
        lambda g: (g[:, :ca], g[:, ca:]),
        "concat",
    )


def concat_batch(a: Tensor, b: Tensor) -> Tensor:
    """Stack two tensors along the leading (batch) axis."""
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"concat_batch: shapes {a.shape} and {b.shape} disagree outside the batch axis")
    na = a.shape[0]
    return make_result(np.concatenate([a.data, b.data]), (a, b), lambda g: (g[:na], g[na:]), "concat_batch")


def slice_batch(x: Tensor, start: int, stop: int) -> Tensor:
    """Rows ``start:stop`` of the leading axis."""
    shape = x.shape

    def backward_fn(g):
        out = np.zeros(shape, dtype=g.dtype)
        out[start:stop] = g
        return (out,)

    return make_result(x.data[start:stop], (x,), backward_fn, "slice_batch")


# -- convolution -------------------------------------------------------------

def conv_output_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def _im2col(xp, kh, kw, stride, ho, wo):
    """(N, Hp, Wp, C) channels-last -> (N*Ho*Wo, kh*kw*C)."""
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    # win: (N, Ho, Wo, C, kh, kw) -> (N, Ho, Wo, kh, kw, C) so copies move whole channel runs.
    n, c = xp.shape[0], xp.shape[3]
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)


def _col2im(cols, shape, kh, kw, stride, ho, wo):
    """Scatter-add (N, Ho, Wo, kh, kw, C) patches into a channels-last (N, Hp, Wp, C) array."""
    out = np.zeros(shape, dtype=cols.dtype)
    if kh == stride and kw == stride:
        n, c = shape[0], shape[3]
        out[:, :ho * kh, :wo * kw] = cols.transpose(0, 1, 3, 2, 4, 5).reshape(n, ho * kh, wo * kw, c)
        return out
    for i in range(kh):
        for j in range(kw):
            out[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, :, i, j]
    return out


def _nhwc(a):
    return np.ascontiguousarray(a.transpose(0, 2, 3, 1))


def _nchw(a):
    return np.ascontiguousarray(a.transpose(0, 3, 1, 2))


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation with zero padding. w has shape (C_out, C_in, kh, kw)."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects NCHW input and a 4-D kernel")
    n, c, h, wd = x.shape
    cout, cin, kh, kw = w.shape
    if c != cin:
        raise ValueError(f"conv2d: input has {c} channels, kernel expects {cin}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d: stride must be >= 1 and padding >= 0")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(wd, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{wd}")
    p = padding
    xh = _nhwc(x.data)
    xp = np.pad(xh, ((0, 0), (p, p), (p, p), (0, 0))) if p else xh
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    # Kernel rows ordered (kh, kw, C_in) to match the column layout.
    wmat = w.data.transpose(0, 2, 3, 1).reshape(cout, -1)
    out = _nchw((cols @ wmat.T).reshape(n, ho, wo, cout))
    if b is not None:
        out += b.data.reshape(1, -1, 1, 1)
    parents = (x, w) if b is None else (x, w, b)

    def backward_fn(g):
        g2 = _nhwc(g).reshape(-1, cout)
        dw = None
        if w.requires_grad:
            dw = (g2.T @ cols).reshape(cout, kh, kw, c).transpose(0, 3, 1, 2)
        dx = None
        if x.requires_grad and stride == 1 and p <= kh - 1 and p <= kw - 1:
            # Stride 1: the input gradient is a full correlation of g with the
            # flipped kernel, a gather instead of a kh*kw-way scatter-add.
            gh = g2.reshape(n, ho, wo, cout)
            gp = np.pad(gh, ((0, 0), (kh - 1 - p, kh - 1 - p), (kw - 1 - p, kw - 1 - p), (0, 0)))
            wflip = w.data[:, :, ::-1, ::-1].transpose(2, 3, 0, 1).reshape(-1, c)
            dx = _nchw((_im2col(gp, kh, kw, 1, h, wd) @ wflip).reshape(n, h, wd, c))
        elif x.requires_grad:
            # Tap-major layout so every scatter-add reads contiguous memory.
            dcols = np.ascontiguousarray((g2 @ wmat).reshape(n, ho, wo, kh * kw, c).transpose(3, 0, 1, 2, 4))
            dxp = np.zeros(xp.shape, dtype=g2.dtype)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[i * kw + j]
            dx = _nchw(dxp[:, p:p + h, p:p + wd] if p else dxp)
        grads = (dx, dw)
        return grads + (g.sum(axis=(0, 2, 3)),) if b is not None else grads

    return make_result(out, parents, backward_fn, "conv2d")


def transposed_conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Adjoint of conv2d. w has shape (C_in, C_out, kh, kw).

    Output size is (H - 1) * stride + kh - 2 * padding.
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("transposed_conv2d expects NCHW input and a 4-D kernel")
    n, c, h, wd = x.shape
    cin, cout, kh, kw = w.shape
    if c != cin:
        raise ValueError(f"transposed_conv2d: input has {c} channels, kernel expects {cin}")
    if stride < 1 or padding < 0:
        raise ValueError("transposed_conv2d: stride must be >= 1 and padding >= 0")
    p = padding
    hf, wf = (h - 1) * stride + kh, (wd - 1) * stride + kw
    if hf - 2 * p < 1 or wf - 2 * p < 1:
        raise ValueError("transposed_conv2d: padding removes the whole output")
    x2 = _nhwc(x.data).reshape(-1, c)
    # Columns ordered (kh, kw, C_out), the layout _col2im expects.
    wmat = w.data.transpose(0, 2, 3, 1).reshape(c, -1)
    cols = (x2 @ wmat).reshape(n, h, wd, kh, kw, cout)
    full = _col2im(cols, (n, hf, wf, cout), kh, kw, stride, h, wd)
    out = _nchw(full[:, p:hf - p, p:wf - p] if p else full)
    if b is not None:
        out += b.data.reshape(1, -1, 1, 1)
    parents = (x, w) if b is None else (x, w, b)

    def backward_fn(g):
        gh = _nhwc(g)
        gp = np.pad(gh, ((0, 0), (p, p), (p, p), (0, 0))) if p else gh
        dcols = _im2col(gp, kh, kw, stride, h, wd)
        dx = _nchw((dcols @ wmat.T).reshape(n, h, wd, c)) if x.requires_grad else None
        dw = None
        if w.requires_grad:
            dw = (x2.T @ dcols).reshape(c, kh, kw, cout).transpose(0, 3, 1, 2)
        grads = (dx, dw)
        return grads + (g.sum(axis=(0, 2, 3)),) if b is not None else grads

    return make_result(out, parents, backward_fn, "transposed_conv2d")


# -- pooling -----------------------------------------------------------------

def _windows(x):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"2x2 pooling needs even spatial dims, got {h}x{w}")
    return x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)


def _unwindows(g4, shape):
    n, c, h, w = shape
    return g4.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(shape)


def max_pool2(x: Tensor) -> Tensor:
    """2x2 max pool, stride 2. Ties send the gradient to the first element in scan order."""
    win = _windows(x.data)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def backward_fn(g):
        g4 = np.zeros(win.shape, dtype=g.dtype)
        np.put_along_axis(g4, idx[..., None], g[..., None], axis=-1)
        return (_unwindows(g4, x.shape),)

    return make_result(out, (x,), backward_fn, "max_pool2")


def avg_pool2(x: Tensor) -> Tensor:
    win = _windows(x.data)
    out = win.mean(axis=-1)

    def backward_fn(g):
        g4 = np.repeat((g * 0.25)[..., None], 4, axis=-1)
        return (_unwindows(g4, x.shape),)

    return make_result(out, (x,), backward_fn, "avg_pool2")


# -- batch normalization -----------------------------------------------------

class BatchNormState:
    """Running statistics for one batch-norm layer."""

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps


def batch_norm2d(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, training: bool = True) -> Tensor:
    """Per-channel normalization over (N, H, W) followed by an affine map.

    In training mode batch statistics are used and the running averages in
    ``state`` are updated; otherwise the running averages are used.
    """
    n, c, h, w = x.shape
    m = n * h * w
    eps = state.eps
    shape = (1, c, 1, 1)
    if training:
        if m < 2:
            raise ValueError("batch_norm2d needs more than one value per channel in training mode")
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        mom = state.momentum
        state.mean = (mom * state.mean + (1 - mom) * mu).astype(state.mean.dtype)
        state.var = (mom * state.var + (1 - mom) * var).astype(state.var.dtype)
    else:
        mu, var = state.mean, state.var
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(shape).astype(x.dtype)) * inv.reshape(shape)
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def backward_fn(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * gamma.data.reshape(shape)
        if training:
            dx = inv.reshape(shape) / m * (
                m * dxhat
                - dxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            )
        else:
            dx = dxhat * inv.reshape(shape)
        return dx, dgamma, dbeta

    return make_result(out, (x, gamma, beta), backward_fn, "batch_norm2d")
