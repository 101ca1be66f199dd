"""Layer kernels for the channel-refinement CNN.

Public kernels take NCHW tensors (batch, channels, height, width). The
model itself runs channels-last (NHWC) so every GEMM operand is a
contiguous row block; the ``*_nhwc`` functions are that fast path and the public ones
are thin layout wrappers around them.

Every kernel works in whatever float dtype it is given, so the same code
runs the float32 training path and the float64 shadow used in gradient
checks.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidBatchError, InvalidDimensionError

KERNEL = 3
PAD = 1


@dataclass
class ConvLayer:
    weights: np.ndarray  # (out, in, 3, 3)
    bias: np.ndarray  # (out,)

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]

    def params(self):
        return [self.weights, self.bias]


@dataclass
class BatchNormLayer:
    scale: np.ndarray
    shift: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5
    momentum: float = 0.9

    @classmethod
    def create(cls, channels, dtype=np.float32, epsilon=1e-5, momentum=0.9):
        return cls(
            scale=np.ones(channels, dtype),
            shift=np.zeros(channels, dtype),
            running_mean=np.zeros(channels, dtype),
            running_var=np.ones(channels, dtype),
            epsilon=epsilon,
            momentum=momentum,
        )

    def params(self):
        return [self.scale, self.shift]


class ReLU:
    """Marker for an activation in the layer list."""

    def __repr__(self):
        return "ReLU()"

    def params(self):
        return []


def complex_to_planes(m):
    """(H, W) or (B, H, W) complex -> (B, 2, H, W) real; plane 0 real, plane 1 imaginary."""
    m = np.asarray(m)
    if m.ndim == 2:
        m = m[None]
    if m.ndim != 3:
        raise InvalidDimensionError(f"expected (H, W) or (B, H, W) complex input, got {m.shape}")
    return np.stack([m.real, m.imag], axis=1)


def planes_to_complex(t):
    if t.ndim != 4 or t.shape[1] != 2:
        raise InvalidDimensionError(f"expected (B, 2, H, W) planes, got {t.shape}")
    return t[:, 0] + 1j * t[:, 1]


def to_nhwc(x):
    return np.ascontiguousarray(x.transpose(0, 2, 3, 1))


def to_nchw(x):
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


# -- convolution -----------------------------------------------------------


def _pad_flat(x):
    """Zero-pad (B, H, W, C) by one pixel and flatten to (B*(H+2)*(W+2), C)."""
    b, h, w, c = x.shape
    xp = np.zeros((b, h + 2 * PAD, w + 2 * PAD, c), dtype=x.dtype)
    xp[:, PAD:-PAD, PAD:-PAD] = x
    return xp.reshape(-1, c)


def _shifts(w):
    """Flat row offsets of the nine taps in a padded image of width ``w``."""
    wp = w + 2 * PAD
    return [(u, v, u * wp + v) for u in range(KERNEL) for v in range(KERNEL)]


def conv_forward_nhwc(x, layer):
    """Channels-last convolution; returns ``(out, padded_flat_input)``.

    In the flattened padded image the tap (u, v) of output pixel p sits at
    row ``p + u*(W+2) + v``, so each tap is one GEMM on a contiguous row
    slice. Rows that land in the padding border are computed and discarded.
    """
    if x.ndim != 4 or x.shape[3] != layer.in_channels:
        raise InvalidDimensionError(f"conv expects {layer.in_channels} input channels, got shape {x.shape}")
    b, h, w, _ = x.shape
    o = layer.out_channels
    xf = _pad_flat(x)
    taps = _shifts(w)
    m = xf.shape[0] - taps[-1][2]
    wt = np.ascontiguousarray(layer.weights.transpose(2, 3, 1, 0))  # (3, 3, in, out)
    acc = np.zeros((xf.shape[0], o), dtype=x.dtype)
    for u, v, s in taps:
        acc[:m] += xf[s : s + m] @ wt[u, v]
    out = acc.reshape(b, h + 2 * PAD, w + 2 * PAD, o)[:, :h, :w]
    out += layer.bias
    return out, xf


def conv_backward_nhwc(x_shape, grad_out, layer, xf, need_input_grad=True):
    b, h, w, c = x_shape
    o = layer.out_channels
    if grad_out.shape != (b, h, w, o):
        raise InvalidDimensionError(f"grad_out shape {grad_out.shape} does not match conv output {(b, h, w, o)}")
    gfull = np.zeros((b, h + 2 * PAD, w + 2 * PAD, o), dtype=grad_out.dtype)
    gfull[:, :h, :w] = grad_out
    gf = gfull.reshape(-1, o)
    taps = _shifts(w)
    m = gf.shape[0] - taps[-1][2]
    wt = np.ascontiguousarray(layer.weights.transpose(2, 3, 1, 0))
    grad_w = np.empty(layer.weights.shape, dtype=layer.weights.dtype)
    gx = np.zeros((gf.shape[0], c), dtype=grad_out.dtype) if need_input_grad else None
    for u, v, s in taps:
        grad_w[:, :, u, v] = (xf[s : s + m].T @ gf[:m]).T
        if need_input_grad:
            gx[s : s + m] += gf[:m] @ wt[u, v].T
    grad_b = grad_out.reshape(-1, o).sum(axis=0)
    if need_input_grad:
        gx = gx.reshape(b, h + 2 * PAD, w + 2 * PAD, c)[:, PAD:-PAD, PAD:-PAD]
    return gx, grad_w, grad_b


def conv_forward(x, layer):
    """Stride-1, zero-padded 3x3 convolution on NCHW input; spatial size is preserved.

    ``out[b, o, i, j] = bias[o] + sum_{c,u,v} w[o, c, u, v] * x_pad[b, c, i+u, j+v]``
    """
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise InvalidDimensionError(f"conv expects {layer.in_channels} input channels, got shape {x.shape}")
    out, _ = conv_forward_nhwc(to_nhwc(x), layer)
    return to_nchw(out)


def conv_backward(x, grad_out, layer):
    """Gradients of :func:`conv_forward` w.r.t. input, weights and bias (NCHW)."""
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise InvalidDimensionError(f"conv expects {layer.in_channels} input channels, got shape {x.shape}")
    if grad_out.shape != (x.shape[0], layer.out_channels) + x.shape[2:]:
        raise InvalidDimensionError(f"grad_out shape {grad_out.shape} does not match conv output")
    xn = to_nhwc(x)
    gx, gw, gb = conv_backward_nhwc(xn.shape, to_nhwc(grad_out), layer, _pad_flat(xn))
    return to_nchw(gx), gw, gb


# -- activation ------------------------------------------------------------


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    # derivative at exactly 0 is taken as 0
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


# -- batch normalisation ---------------------------------------------------


def bn_forward_nhwc(x, layer, mode="train"):
    """Channels-last batch norm; returns ``(y, cache)`` (cache is None in infer mode)."""
    if mode == "infer":
        inv = 1.0 / np.sqrt(layer.running_var + layer.epsilon)
        a = (inv * layer.scale).astype(x.dtype)
        y = (x - layer.running_mean.astype(x.dtype)) * a + layer.shift.astype(x.dtype)
        return y, None
    if mode != "train":
        raise ValueError(f"unknown batch-norm mode {mode!r}")
    if x.shape[0] < 2:
        raise InvalidBatchError("batch normalisation in train mode needs a batch of at least 2")
    c = x.shape[-1]
    flat = x.reshape(-1, c)
    n = flat.shape[0]
    mean = flat.mean(axis=0)
    xc = flat - mean
    var = np.einsum("ij,ij->j", xc, xc) / n
    inv = (1.0 / np.sqrt(var + layer.epsilon)).astype(x.dtype)
    xhat = xc * inv
    y = xhat * layer.scale + layer.shift
    m = layer.momentum
    layer.running_mean[...] = m * layer.running_mean + (1 - m) * mean
    layer.running_var[...] = m * layer.running_var + (1 - m) * var * (n / max(n - 1, 1))
    return y.reshape(x.shape), (xhat, inv)


def bn_backward_nhwc(grad_out, layer, cache):
    xhat, inv = cache
    c = grad_out.shape[-1]
    g = grad_out.reshape(-1, c)
    n = g.shape[0]
    grad_shift = g.sum(axis=0)
    grad_scale = np.einsum("ij,ij->j", g, xhat)
    grad_x = (layer.scale * inv) * (g - grad_shift / n - xhat * (grad_scale / n))
    return grad_x.reshape(grad_out.shape), grad_scale, grad_shift


def bn_forward(x, layer, mode="train"):
    """Per-channel batch normalisation of NCHW input over (batch, height, width).

    ``train`` normalises with batch statistics and updates the running
    estimates in place (``running = momentum * running + (1 - momentum) * batch``);
    ``infer`` uses the running estimates. Returns ``(y, cache)``.
    """
    y, cache = bn_forward_nhwc(to_nhwc(x), layer, mode)
    return to_nchw(y), cache


def bn_backward(grad_out, layer, cache):
    """Returns ``(grad_x, grad_scale, grad_shift)`` for a train-mode :func:`bn_forward`."""
    gx, gs, gsh = bn_backward_nhwc(to_nhwc(grad_out), layer, cache)
    return to_nchw(gx), gs, gsh
