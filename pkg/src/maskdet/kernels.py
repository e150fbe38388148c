"""Dense NCHW tensor kernels.

Every architecture block in this package is composed from the forward-only
kernels in this module.  A "tensor" is a plain ``numpy.ndarray`` with four
axes in (batch, channels, height, width) order, stored as 32-bit floats and
row-major over those axes.  Kernels may accumulate in 64-bit internally but
always return float32; given finite inputs they produce finite outputs.

Convolution here is cross-correlation (no kernel flip), padding is always
zero-padding, and there is no autodiff: the network is inference-only.
All functions are pure and safe to call from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Tensor = np.ndarray


def _as_pair(value, name: str) -> tuple[int, int]:
    if isinstance(value, (int, np.integer)):
        value = (int(value), int(value))
    pair = tuple(int(v) for v in value)
    if len(pair) != 2:
        raise ValueError(f"{name} must be an int or a pair, got {value!r}")
    return pair


def _require_nchw(x: np.ndarray, name: str = "input") -> None:
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        raise ValueError(f"{name} must be a 4-D (n, c, h, w) array, got "
                         f"{getattr(x, 'shape', type(x))}")


@dataclass
class ConvParams:
    """Parameters of a 2-D convolution.

    ``kernel`` has shape (out_channels, in_channels // groups, kh, kw).
    ``groups == 1`` is a standard convolution; ``groups == in_channels ==
    out_channels`` is a depthwise convolution.  ``stride`` and ``padding``
    accept an int or an (h, w) pair.
    """

    kernel: np.ndarray
    bias: np.ndarray | None = None
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    groups: int = 1

    def __post_init__(self):
        if self.kernel.ndim != 4:
            raise ValueError(f"kernel must be 4-D (out_c, in_c/groups, kh, kw), "
                             f"got shape {self.kernel.shape}")
        self.stride = _as_pair(self.stride, "stride")
        self.padding = _as_pair(self.padding, "padding")
        if self.stride[0] < 1 or self.stride[1] < 1:
            raise ValueError(f"stride must be positive, got {self.stride}")
        if self.padding[0] < 0 or self.padding[1] < 0:
            raise ValueError(f"padding must be non-negative, got {self.padding}")
        if self.groups < 1:
            raise ValueError(f"groups must be positive, got {self.groups}")
        out_c = self.kernel.shape[0]
        if out_c % self.groups != 0:
            raise ValueError(f"out_channels {out_c} not divisible by "
                             f"groups {self.groups}")
        if self.bias is not None and self.bias.shape != (out_c,):
            raise ValueError(f"bias must have shape ({out_c},), got "
                             f"{self.bias.shape}")


def conv_output_extent(extent: int, kernel: int, stride: int, pad: int) -> int:
    """Output extent of a convolution along one spatial axis."""
    return (extent + 2 * pad - kernel) // stride + 1


def _pad2d(x: np.ndarray, pad_h: int, pad_w: int, dtype) -> np.ndarray:
    n, c, h, w = x.shape
    if pad_h == 0 and pad_w == 0:
        return np.ascontiguousarray(x, dtype=dtype)
    out = np.zeros((n, c, h + 2 * pad_h, w + 2 * pad_w), dtype=dtype)
    out[:, :, pad_h:pad_h + h, pad_w:pad_w + w] = x
    return out


def _windows(x: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    # (n, c, h', w', kh, kw) strided view over the padded input
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    return win[:, :, ::sh, ::sw]


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    """2-D cross-correlation of an NCHW tensor with a weight kernel.

    Output extents follow h' = floor((h + 2*pad - kh) / stride) + 1 and must
    be at least 1.  Accumulation happens in float64; the result is float32.
    """
    _require_nchw(x)
    n, c, h, w = x.shape
    out_c, in_c_per_group, kh, kw = params.kernel.shape
    g = params.groups
    if c % g != 0:
        raise ValueError(f"input channels {c} not divisible by groups {g}")
    if in_c_per_group != c // g:
        raise ValueError(f"kernel expects {in_c_per_group} channels per group "
                         f"but input provides {c // g} (in_channels={c}, "
                         f"groups={g})")
    sh, sw = params.stride
    ph, pw = params.padding
    out_h = conv_output_extent(h, kh, sh, ph)
    out_w = conv_output_extent(w, kw, sw, pw)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"kernel {kh}x{kw} with stride {params.stride} and "
                         f"padding {params.padding} does not fit input "
                         f"{h}x{w} (output would be {out_h}x{out_w})")

    padded = _pad2d(x, ph, pw, np.float64)
    kernel = params.kernel.astype(np.float64)

    if g == 1:
        win = _windows(padded, kh, kw, sh, sw)
        # (n, h', w', out_c) <- sum over (c, kh, kw)
        out = np.tensordot(win, kernel, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2)
    elif g == c and g == out_c:
        # depthwise: one kernel per channel
        win = _windows(padded, kh, kw, sh, sw)
        out = np.einsum("nchwuv,cuv->nchw", win, kernel[:, 0])
    else:
        cg = c // g
        og = out_c // g
        out = np.empty((n, out_c, out_h, out_w), dtype=np.float64)
        for i in range(g):
            win = _windows(padded[:, i * cg:(i + 1) * cg], kh, kw, sh, sw)
            part = np.tensordot(win, kernel[i * og:(i + 1) * og],
                                axes=([1, 4, 5], [1, 2, 3]))
            out[:, i * og:(i + 1) * og] = part.transpose(0, 3, 1, 2)

    if params.bias is not None:
        out = out + params.bias.astype(np.float64)[None, :, None, None]
    return out.astype(np.float32)


def pool2d(x: Tensor, mode: str, window, stride) -> Tensor:
    """Max or average pooling with the conv2d output-extent formula (no padding)."""
    _require_nchw(x)
    if mode not in ("max", "avg"):
        raise ValueError(f"pool mode must be 'max' or 'avg', got {mode!r}")
    wh, ww = _as_pair(window, "window")
    sh, sw = _as_pair(stride, "stride")
    n, c, h, w = x.shape
    if wh > h or ww > w:
        raise ValueError(f"pool window {wh}x{ww} larger than input {h}x{w}")
    win = _windows(x, wh, ww, sh, sw)
    if mode == "max":
        out = win.max(axis=(4, 5))
    else:
        out = win.mean(axis=(4, 5), dtype=np.float64)
    return out.astype(np.float32)


def global_pool(x: Tensor, mode: str) -> Tensor:
    """Per-channel max or mean over all spatial positions; output (n, c, 1, 1)."""
    _require_nchw(x)
    if mode not in ("max", "avg"):
        raise ValueError(f"pool mode must be 'max' or 'avg', got {mode!r}")
    n, c, h, w = x.shape
    if h < 1 or w < 1:
        raise ValueError(f"global_pool needs non-empty spatial extents, got {h}x{w}")
    if mode == "max":
        out = x.max(axis=(2, 3), keepdims=True)
    else:
        out = x.mean(axis=(2, 3), keepdims=True, dtype=np.float64)
    return out.astype(np.float32)


def activate(x: Tensor, kind: str) -> Tensor:
    """Elementwise relu or sigmoid; shape preserved."""
    if kind == "relu":
        return np.maximum(x, 0).astype(np.float32)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"activation kind must be 'relu' or 'sigmoid', got {kind!r}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, float32 result."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.astype(np.float32)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Replicate each spatial value into a factor x factor block."""
    _require_nchw(x)
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return x.astype(np.float32)
    out = np.repeat(np.repeat(x, factor, axis=2), factor, axis=3)
    return out.astype(np.float32)


def add_scaled(a: Tensor, b: Tensor, coeff: float) -> Tensor:
    """Elementwise a + coeff * b; shapes must match exactly."""
    if a.shape != b.shape:
        raise ValueError(f"add_scaled shape mismatch: {a.shape} vs {b.shape}")
    return (a.astype(np.float64) + float(coeff) * b.astype(np.float64)).astype(np.float32)


def concat_channels(inputs) -> Tensor:
    """Stack tensors along the channel axis in input order."""
    inputs = list(inputs)
    if not inputs:
        raise ValueError("concat_channels needs at least one input")
    first = inputs[0]
    _require_nchw(first)
    for i, t in enumerate(inputs[1:], start=1):
        _require_nchw(t, f"input {i}")
        if (t.shape[0], t.shape[2], t.shape[3]) != (first.shape[0], first.shape[2], first.shape[3]):
            raise ValueError(f"concat_channels spatial mismatch: input 0 has "
                             f"shape {first.shape}, input {i} has {t.shape}")
    return np.concatenate(inputs, axis=1).astype(np.float32)


def linear(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map of a length-k vector through a (k, m) matrix plus length-m bias."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"linear expects a 1-D input, got shape {x.shape}")
    if weights.ndim != 2 or weights.shape[0] != x.shape[0]:
        raise ValueError(f"linear weight shape {weights.shape} incompatible "
                         f"with input length {x.shape[0]}")
    if bias.shape != (weights.shape[1],):
        raise ValueError(f"linear bias shape {bias.shape} incompatible with "
                         f"output length {weights.shape[1]}")
    out = x.astype(np.float64) @ weights.astype(np.float64) + bias.astype(np.float64)
    return out.astype(np.float32)
