"""Sliding-window unrolling so a convolution becomes one matrix product."""

import numpy as np


def conv_output_shape(height: int, width: int, kernel: int, stride: int = 1):
    return (height - kernel) // stride + 1, (width - kernel) // stride + 1


def im2col(x: np.ndarray, kernel: int, stride: int = 1) -> np.ndarray:
    """Unroll a (C, H, W) tensor into a (C*k*k, P) matrix of valid windows.

    Rows are ordered channel-major then kernel row then kernel column, the
    same order as a (out_ch, C, k, k) kernel flattened per output channel.
    Columns run over output positions in row-major order.
    """
    if x.ndim != 3:
        raise ValueError(f"expected a (C, H, W) tensor, got shape {x.shape}")
    c, h, w = x.shape
    if kernel > h or kernel > w:
        raise ValueError("kernel larger than input")
    oh, ow = conv_output_shape(h, w, kernel, stride)
    windows = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    windows = windows[:, ::stride, ::stride][:, :oh, :ow]
    # (C, oh, ow, k, k) -> (C, k, k, oh, ow)
    return np.ascontiguousarray(windows.transpose(0, 3, 4, 1, 2)).reshape(c * kernel * kernel, oh * ow)


def col2im(cols: np.ndarray, shape, kernel: int, stride: int = 1) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back onto a (C, H, W) grid."""
    c, h, w = shape
    oh, ow = conv_output_shape(h, w, kernel, stride)
    cols = cols.reshape(c, kernel, kernel, oh, ow)
    out = np.zeros(shape)
    for ki in range(kernel):
        for kj in range(kernel):
            out[:, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += cols[:, ki, kj]
    return out


def maxpool2(x: np.ndarray):
    """Non-overlapping 2x2 max pooling; returns the pooled map and the argmax mask."""
    c, h, w = x.shape
    blocks = x[:, :h - h % 2, :w - w % 2].reshape(c, h // 2, 2, w // 2, 2)
    pooled = blocks.max(axis=(2, 4))
    mask = blocks == pooled[:, :, None, :, None]
    # keep a single winner per window so the gradient is routed once
    flat = mask.transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)
    first = np.zeros_like(flat)
    idx = flat.argmax(axis=-1)
    np.put_along_axis(first, idx[..., None], True, axis=-1)
    mask = first.reshape(c, h // 2, w // 2, 2, 2).transpose(0, 1, 3, 2, 4)
    return pooled, mask


def maxpool2_backward(grad: np.ndarray, mask: np.ndarray, shape) -> np.ndarray:
    c, h, w = shape
    out = np.zeros(shape)
    g = mask * grad[:, :, None, :, None]
    out[:, :h - h % 2, :w - w % 2] = g.reshape(c, (h // 2) * 2, (w // 2) * 2)
    return out
