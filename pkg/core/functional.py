"""
Layer kernels for the VAE: valid-padding convolution, transposed convolution,
max pooling, affine maps, activations and the loss primitives.

Convolutions go through im2col/col2im so every kernel is one batched matmul;
the transposed convolution is the adjoint of the convolution and reuses the
same two helpers with their roles swapped.
"""

from typing import Optional, Tuple

import numpy as np

from core.tensor import Tensor
from models.error_models import DimensionError

Pair = Tuple[int, int]

BCE_CLAMP = 1e-7


def _pair(value) -> Pair:
    if isinstance(value, int):
        return value, value
    return int(value[0]), int(value[1])


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


def tconv_output_size(size: int, kernel: int, stride: int) -> int:
    return (size - 1) * stride + kernel


def im2col(x: np.ndarray, kernel: Pair, stride: Pair) -> np.ndarray:
    """(N, C, H, W) -> (N, C*kh*kw, Ho*Wo), contiguous"""
    n, c, h, w = x.shape
    kh, kw = kernel
    sh, sw = stride
    ho, wo = conv_output_size(h, kh, sh), conv_output_size(w, kw, sw)
    x = np.ascontiguousarray(x)
    sn, sc, shh, sww = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, kh, kw, ho, wo),
        strides=(sn, sc, shh, sww, sh * shh, sw * sww),
        writeable=False,
    )
    return patches.reshape(n, c * kh * kw, ho * wo)


def col2im(cols: np.ndarray, x_shape: Tuple[int, int, int, int], kernel: Pair, stride: Pair) -> np.ndarray:
    """Scatter-add columns back into an (N, C, H, W) image; adjoint of im2col"""
    n, c, h, w = x_shape
    kh, kw = kernel
    sh, sw = stride
    ho, wo = conv_output_size(h, kh, sh), conv_output_size(w, kw, sw)
    out = np.zeros(x_shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        i_end = i + sh * ho
        for j in range(kw):
            j_end = j + sw * wo
            out[:, :, i:i_end:sh, j:j_end:sw] += cols[:, :, i, j, :, :]
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride=1) -> Tensor:
    """Valid cross-correlation: x (N,C,H,W), weight (O,C,kh,kw) -> (N,O,H',W')"""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise DimensionError(f"conv2d needs 4-d input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, wc, kh, kw = weight.shape
    if c != wc:
        raise DimensionError(f"conv2d input has {c} channels but weight expects {wc}")
    if h < kh or w < kw:
        raise DimensionError(f"conv2d input {h}x{w} is smaller than kernel {kh}x{kw}")
    sh, sw = _pair(stride)
    ho, wo = conv_output_size(h, kh, sh), conv_output_size(w, kw, sw)

    cols = im2col(x.data, (kh, kw), (sh, sw))
    w_mat = weight.data.reshape(o, c * kh * kw)
    out = np.matmul(w_mat, cols)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1)
    out = out.reshape(n, o, ho, wo)

    def _backward(g: np.ndarray):
        g_mat = g.reshape(n, o, ho * wo)
        dx = col2im(np.matmul(w_mat.T, g_mat), x.shape, (kh, kw), (sh, sw))
        dw = np.einsum("nop,nkp->ok", g_mat, cols).reshape(weight.shape)
        db = g_mat.sum(axis=(0, 2)) if bias is not None else None
        return dx, dw, db

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, _backward)


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride=1) -> Tensor:
    """Transposed convolution: x (N,C,H,W), weight (C,O,kh,kw) -> (N,O,(H-1)s+kh,(W-1)s+kw)"""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise DimensionError(f"tconv2d needs 4-d input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    wc, o, kh, kw = weight.shape
    if c != wc:
        raise DimensionError(f"tconv2d input has {c} channels but weight expects {wc}")
    sh, sw = _pair(stride)
    ho, wo = tconv_output_size(h, kh, sh), tconv_output_size(w, kw, sw)
    out_shape = (n, o, ho, wo)

    w_mat = weight.data.reshape(c, o * kh * kw)
    x_mat = x.data.reshape(n, c, h * w)
    out = col2im(np.matmul(w_mat.T, x_mat), out_shape, (kh, kw), (sh, sw))
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)

    def _backward(g: np.ndarray):
        g_cols = im2col(g, (kh, kw), (sh, sw))
        dx = np.matmul(w_mat, g_cols).reshape(x.shape)
        dw = np.einsum("ncp,nkp->ck", x_mat, g_cols).reshape(weight.shape)
        db = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return dx, dw, db

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, _backward)


def max_pool2d(x: Tensor, window=2) -> Tuple[Tensor, np.ndarray]:
    """
    Non-overlapping max pooling with floor division of the spatial dims.

    Returns the pooled tensor and, per output cell, the flat index of the
    winning element inside its window (first maximum on ties).
    """
    if x.data.ndim != 4:
        raise DimensionError(f"max_pool2d needs 4-d input, got {x.shape}")
    kh, kw = _pair(window)
    n, c, h, w = x.shape
    if h < kh or w < kw:
        raise DimensionError(f"max_pool2d window {kh}x{kw} exceeds input {h}x{w}")
    ho, wo = h // kh, w // kw
    cropped = x.data[:, :, : ho * kh, : wo * kw]
    windows = cropped.reshape(n, c, ho, kh, wo, kw).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, kh * kw)
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def _backward(g: np.ndarray):
        g_windows = np.zeros((n, c, ho, wo, kh * kw), dtype=g.dtype)
        np.put_along_axis(g_windows, argmax[..., None], g[..., None], axis=-1)
        dx = np.zeros(x.shape, dtype=g.dtype)
        dx[:, :, : ho * kh, : wo * kw] = (
            g_windows.reshape(n, c, ho, wo, kh, kw).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * kh, wo * kw)
        )
        return (dx,)

    return Tensor.from_op(out, (x,), _backward), argmax


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor]) -> Tensor:
    """x (N,D) @ weight (D,K) + bias (K)"""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise DimensionError(f"linear needs 2-d input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise DimensionError(f"linear inner dimensions differ: {x.shape[1]} vs {weight.shape[0]}")
    a, w_data = x.data, weight.data
    out = a @ w_data
    if bias is not None:
        out = out + bias.data

    def _backward(g: np.ndarray):
        db = g.sum(axis=0) if bias is not None else None
        return g @ w_data.T, a.T @ g, db

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, _backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    """
    Logistic function, saturating strictly inside (0, 1).

    In float32 the plain formula already rounds to 1.0 at x = 17; the output
    is clamped to [tiny, nextafter(1, 0)] of the working dtype so it never
    reaches either bound.
    """
    a = x.data
    e = np.exp(-np.abs(a))
    s = np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(a.dtype)
    one = np.asarray(1, dtype=a.dtype)
    s = np.clip(s, np.finfo(a.dtype).tiny, np.nextafter(one, np.asarray(0, dtype=a.dtype)))
    return Tensor.from_op(s, (x,), lambda g: (g * s * (1 - s),))


def flatten(x: Tensor) -> Tensor:
    shape = x.shape
    return Tensor.from_op(x.data.reshape(shape[0], -1), (x,), lambda g: (g.reshape(shape),))


def reshape(x: Tensor, target: Tuple[int, ...]) -> Tensor:
    """Reshape keeping the batch axis: (N, ...) -> (N, *target)"""
    shape = x.shape
    if int(np.prod(shape[1:])) != int(np.prod(target)):
        raise DimensionError(f"cannot reshape {shape} to (N, {', '.join(map(str, target))})")
    return Tensor.from_op(x.data.reshape((shape[0],) + tuple(target)), (x,), lambda g: (g.reshape(shape),))


def binary_cross_entropy_sum(pred: Tensor, target: np.ndarray) -> Tensor:
    """Summed BCE; predictions are clamped to [1e-7, 1-1e-7] (no gradient where clamped)"""
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {target.shape}")
    p = pred.data
    t = target.astype(p.dtype)
    clamped = np.clip(p, BCE_CLAMP, 1 - BCE_CLAMP)
    loss = -(t * np.log(clamped) + (1 - t) * np.log(1 - clamped)).sum()
    inside = (p >= BCE_CLAMP) & (p <= 1 - BCE_CLAMP)

    def _backward(g: np.ndarray):
        return (g * inside * (clamped - t) / (clamped * (1 - clamped)),)

    return Tensor.from_op(np.asarray(loss, dtype=p.dtype), (pred,), _backward)


def kl_divergence(mean: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mean, exp(logvar)) || N(0, I)) summed over every element"""
    if mean.shape != logvar.shape:
        raise DimensionError(f"mean shape {mean.shape} != logvar shape {logvar.shape}")
    return ((1.0 + logvar - mean.square() - logvar.exp()).sum()) * -0.5

