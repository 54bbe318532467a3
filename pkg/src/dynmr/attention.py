"""Channel-attention soft thresholding with an analytic backward pass.

One learned threshold per channel of a (nc, h, w, t) feature tensor:

    a_i  = mean over h*w*t of |u_i|          (global average pooling)
    v    = w2 @ relu(w1 @ a + b1) + b2       (two fully connected layers)
    s    = sigmoid(v)                        (gate in [0, 1])
    tau_i = s_i * a_i
    out_i = sign(u_i) * max(|u_i| - tau_i, 0)

Since 0 <= s <= 1, the threshold never exceeds the channel's mean absolute
value.  The backward pass is the exact chain rule through this map, with the
usual subgradient conventions at the shrinkage kink (derivative 0 where
|u| <= tau) and at u = 0 (sign contributes 0).
"""

from dataclasses import dataclass

import numpy as np

from .mathutil import relu, sigmoid


@dataclass
class AttnParams:
    """Two FC layers of the gating network; all matrices are nc x nc."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        nc = self.b1.shape[0]
        for name, want in (
            ("w1", (nc, nc)),
            ("b1", (nc,)),
            ("w2", (nc, nc)),
            ("b2", (nc,)),
        ):
            got = getattr(self, name).shape
            if got != want:
                raise ValueError(f"{name} shape {got}, expected {want}")

    @property
    def nc(self):
        return self.b1.shape[0]


@dataclass
class AttnCache:
    u: np.ndarray
    a: np.ndarray
    pre1: np.ndarray
    pre2: np.ndarray
    s: np.ndarray
    tau: np.ndarray
    active: np.ndarray  # |u| > tau, the shrink-active voxels


def init_attn_params(nc, rng):
    """Seeded init: uniform(+-1/sqrt(nc)) weights, zero biases (gate starts ~0.5)."""
    bound = 1.0 / np.sqrt(nc)
    return AttnParams(
        w1=rng.uniform(-bound, bound, size=(nc, nc)),
        b1=np.zeros(nc),
        w2=rng.uniform(-bound, bound, size=(nc, nc)),
        b2=np.zeros(nc),
    )


def attn_forward(u, params):
    """Apply the operator; returns (output, cache for the backward pass)."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 4 or u.shape[0] != params.nc:
        raise ValueError(
            f"input shape {u.shape} does not match nc={params.nc} channel tensor"
        )
    a = np.mean(np.abs(u), axis=(1, 2, 3))
    pre1 = params.w1 @ a + params.b1
    hidden = relu(pre1)
    pre2 = params.w2 @ hidden + params.b2
    s = sigmoid(pre2)
    tau = s * a
    tau_b = tau[:, None, None, None]
    active = np.abs(u) > tau_b
    out = np.sign(u) * np.maximum(np.abs(u) - tau_b, 0.0)
    return out, AttnCache(u=u, a=a, pre1=pre1, pre2=pre2, s=s, tau=tau, active=active)


def attn_backward(grad_out, cache, params):
    """Exact gradients of a scalar loss through attn_forward.

    Returns (grad_input, AttnParams-shaped gradients).  The threshold feeds
    back along two routes: through the gate s (FC stack) and through the
    pooled magnitude a (d a_i / d u = sign(u) / (h*w*t)).
    """
    u = cache.u
    if grad_out.shape != u.shape:
        raise ValueError(f"grad shape {grad_out.shape} does not match {u.shape}")
    nvox = u[0].size
    sign_u = np.sign(u)
    g_active = grad_out * cache.active

    # direct shrinkage route: d out/d u = 1 on active voxels
    grad_in = g_active.copy()
    # d out/d tau_i = -sign(u) on active voxels
    g_tau = -np.sum(g_active * sign_u, axis=(1, 2, 3))

    # tau = s * a
    g_s = g_tau * cache.a
    g_a = g_tau * cache.s
    # gate: sigmoid then the two FC layers
    g_pre2 = g_s * cache.s * (1.0 - cache.s)
    hidden = relu(cache.pre1)
    g_w2 = np.outer(g_pre2, hidden)
    g_b2 = g_pre2.copy()
    g_hidden = params.w2.T @ g_pre2
    g_pre1 = g_hidden * (cache.pre1 > 0)
    g_w1 = np.outer(g_pre1, cache.a)
    g_b1 = g_pre1.copy()
    g_a = g_a + params.w1.T @ g_pre1

    # pooling route back to the input
    grad_in += (g_a[:, None, None, None] / nvox) * sign_u
    return grad_in, AttnParams(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)
