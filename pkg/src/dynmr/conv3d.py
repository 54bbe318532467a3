"""3x3x3 convolution layers on (channels, h, w, t) tensors.

Convolutions are cross-correlations (no kernel flip), stride 1, zero padded
by one voxel on every spatial/temporal side so output size equals input size.
The forward pass lowers each layer to a single matmul over an im2col patch
matrix; the backward pass is the exact adjoint (input gradients come from the
same patch machinery with a flipped, transposed kernel).

A stack is a plain list of layers applied in order.  Factory helpers build
the two stacks the reconstruction network needs: an encode stack 2 -> nc and
a decode stack nc -> 2, ReLU between layers and a linear final layer.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL = 3


@dataclass
class Conv3dLayer:
    weights: np.ndarray  # (out_ch, in_ch, 3, 3, 3)
    bias: np.ndarray  # (out_ch,)
    activation: str = "linear"

    def __post_init__(self):
        w = self.weights
        if w.ndim != 5 or w.shape[2:] != (KERNEL, KERNEL, KERNEL):
            raise ValueError(f"weights shape {w.shape}, expected (*, *, 3, 3, 3)")
        if self.bias.shape != (w.shape[0],):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match {w.shape[0]} outputs"
            )
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite layer parameters")

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]


@dataclass
class Conv3dCache:
    x: np.ndarray  # layer input, (in_ch, h, w, t)
    pre: np.ndarray  # pre-activation output, (out_ch, h, w, t)


def _patch_matrix(x):
    """im2col: (in_ch, h, w, t) -> (h*w*t, in_ch*27) with zero padding 1."""
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1)))
    win = sliding_window_view(padded, (KERNEL, KERNEL, KERNEL), axis=(1, 2, 3))
    # (in_ch, h, w, t, 3, 3, 3) -> (h, w, t, in_ch, 3, 3, 3) -> flat
    win = win.transpose(1, 2, 3, 0, 4, 5, 6)
    nvox = x.shape[1] * x.shape[2] * x.shape[3]
    return win.reshape(nvox, x.shape[0] * KERNEL**3)


def conv3d_forward(x, layer):
    """Apply one layer; returns (output, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[0] != layer.in_channels:
        raise ValueError(
            f"input shape {x.shape} does not match {layer.in_channels} in-channels"
        )
    _, h, w, t = x.shape
    patches = _patch_matrix(x)
    w_flat = layer.weights.reshape(layer.out_channels, -1)
    pre = (patches @ w_flat.T + layer.bias).T.reshape(layer.out_channels, h, w, t)
    out = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    return out, Conv3dCache(x=x, pre=pre)


def conv3d_backward(grad_out, cache, layer):
    """Gradients of one layer; returns (grad_input, grad_weights, grad_bias)."""
    if grad_out.shape != cache.pre.shape:
        raise ValueError(
            f"grad shape {grad_out.shape} does not match output {cache.pre.shape}"
        )
    g_pre = grad_out * (cache.pre > 0) if layer.activation == "relu" else grad_out
    g_bias = g_pre.sum(axis=(1, 2, 3))
    g_flat = g_pre.reshape(layer.out_channels, -1)  # (out_ch, h*w*t)
    g_weights = (g_flat @ _patch_matrix(cache.x)).reshape(layer.weights.shape)
    # d/d input: correlate the output gradient with the flipped, transposed kernel
    w_adj = np.transpose(layer.weights[:, :, ::-1, ::-1, ::-1], (1, 0, 2, 3, 4))
    _, h, w, t = cache.x.shape
    patches = _patch_matrix(g_pre)
    w_adj_flat = np.ascontiguousarray(w_adj).reshape(layer.in_channels, -1)
    grad_in = (patches @ w_adj_flat.T).T.reshape(layer.in_channels, h, w, t)
    return grad_in, g_weights, g_bias


def stack_forward(x, layers):
    """Run a list of layers; returns (output, list of caches)."""
    caches = []
    for layer in layers:
        x, cache = conv3d_forward(x, layer)
        caches.append(cache)
    return x, caches


def stack_backward(grad_out, caches, layers):
    """Backprop a stack; returns (grad_input, [(grad_w, grad_b), ...])."""
    grads = [None] * len(layers)
    g = grad_out
    for j in range(len(layers) - 1, -1, -1):
        g, gw, gb = conv3d_backward(g, caches[j], layers[j])
        grads[j] = (gw, gb)
    return g, grads


def init_conv_layer(in_ch, out_ch, activation, rng):
    """Seeded uniform init with bound sqrt(6 / fan_in), zero bias."""
    bound = np.sqrt(6.0 / (in_ch * KERNEL**3))
    return Conv3dLayer(
        weights=rng.uniform(-bound, bound, size=(out_ch, in_ch, KERNEL, KERNEL, KERNEL)),
        bias=np.zeros(out_ch),
        activation=activation,
    )


def _plan(ch_in, ch_out, nc, depth):
    if depth < 1:
        raise ValueError("stack depth must be >= 1")
    widths = [ch_in] + [nc] * (depth - 1) + [ch_out]
    acts = ["relu"] * (depth - 1) + ["linear"]
    return list(zip(widths[:-1], widths[1:], acts))


def make_encode_stack(nc, depth, rng):
    """2 -> nc feature stack (ReLU between layers, linear last)."""
    return [init_conv_layer(i, o, a, rng) for i, o, a in _plan(2, nc, nc, depth)]


def make_decode_stack(nc, depth, rng):
    """nc -> 2 feature stack (ReLU between layers, linear last)."""
    return [init_conv_layer(i, o, a, rng) for i, o, a in _plan(nc, 2, nc, depth)]


def _center_tap(weights, out_ch, in_ch, value):
    weights[out_ch, in_ch, 1, 1, 1] = value


def identity_encode_stack(nc):
    """Depth-2 encode stack computing the identity on channels 0 and 1.

    Layer 1 splits each input channel into positive and negative ReLU halves,
    layer 2 recombines them, so the composite is exact (relu(x) - relu(-x) = x)
    for any input sign.  Needs nc >= 4 for the four half channels.
    """
    if nc < 4:
        raise ValueError("identity stacks need nc >= 4")
    w1 = np.zeros((nc, 2, KERNEL, KERNEL, KERNEL))
    _center_tap(w1, 0, 0, 1.0)
    _center_tap(w1, 1, 1, 1.0)
    _center_tap(w1, 2, 0, -1.0)
    _center_tap(w1, 3, 1, -1.0)
    w2 = np.zeros((nc, nc, KERNEL, KERNEL, KERNEL))
    _center_tap(w2, 0, 0, 1.0)
    _center_tap(w2, 0, 2, -1.0)
    _center_tap(w2, 1, 1, 1.0)
    _center_tap(w2, 1, 3, -1.0)
    return [
        Conv3dLayer(weights=w1, bias=np.zeros(nc), activation="relu"),
        Conv3dLayer(weights=w2, bias=np.zeros(nc), activation="linear"),
    ]


def identity_decode_stack(nc):
    """Depth-2 decode stack inverting identity_encode_stack exactly."""
    if nc < 4:
        raise ValueError("identity stacks need nc >= 4")
    w1 = np.zeros((nc, nc, KERNEL, KERNEL, KERNEL))
    _center_tap(w1, 0, 0, 1.0)
    _center_tap(w1, 1, 1, 1.0)
    _center_tap(w1, 2, 0, -1.0)
    _center_tap(w1, 3, 1, -1.0)
    w2 = np.zeros((2, nc, KERNEL, KERNEL, KERNEL))
    _center_tap(w2, 0, 0, 1.0)
    _center_tap(w2, 0, 2, -1.0)
    _center_tap(w2, 1, 1, 1.0)
    _center_tap(w2, 1, 3, -1.0)
    return [
        Conv3dLayer(weights=w1, bias=np.zeros(nc), activation="relu"),
        Conv3dLayer(weights=w2, bias=np.zeros(2), activation="linear"),
    ]
