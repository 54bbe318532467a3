"""Fourier sampling operator and k-space undersampling masks.

k-space arrays use the centered convention: the DC component sits at index
(h//2, w//2) of each frame.  The per-frame 2-D DFT is unitary, so the adjoint
of the masked forward operator is mask-then-inverse-DFT with no extra scaling.
Masks are uint8 arrays of shape (h, w, t) with entries in {0, 1}.
"""

import math

import numpy as np

from .volume import check_same_shape

_AXES = (0, 1)

GOLDEN_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0


def fft2_frames(v, direction="forward"):
    """Centered unitary 2-D DFT applied independently to every frame."""
    if direction == "forward":
        shifted = np.fft.ifftshift(v, axes=_AXES)
        k = np.fft.fft2(shifted, axes=_AXES, norm="ortho")
        return np.fft.fftshift(k, axes=_AXES)
    if direction == "inverse":
        shifted = np.fft.ifftshift(v, axes=_AXES)
        x = np.fft.ifft2(shifted, axes=_AXES, norm="ortho")
        return np.fft.fftshift(x, axes=_AXES)
    raise ValueError(f"unknown direction {direction!r}")


class Encoder:
    """Masked Fourier sampling operator; forward and adjoint share one mask."""

    def __init__(self, mask):
        mask = np.asarray(mask)
        if mask.ndim != 3:
            raise ValueError(f"mask must be (h, w, t), got shape {mask.shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("mask entries must be 0 or 1")
        if not np.all(mask.reshape(-1, mask.shape[2]).sum(axis=0) >= 1):
            raise ValueError("every frame needs at least one sampled location")
        self.mask = mask.astype(np.uint8)

    @property
    def shape(self):
        return self.mask.shape

    def forward(self, x):
        """Sample k-space: mask * FFT(x).  Unsampled entries are exactly zero."""
        check_same_shape(x, self.mask)
        return np.where(self.mask == 1, fft2_frames(x, "forward"), 0.0 + 0.0j)

    def adjoint(self, b):
        """Adjoint of forward: inverse FFT of the masked data."""
        check_same_shape(b, self.mask)
        return fft2_frames(np.where(self.mask == 1, b, 0.0 + 0.0j), "inverse")


def make_pseudo_radial_mask(shape, n_spokes, seed=0):
    """Rasterize straight spokes through the k-space center, per frame.

    Spoke angles are uniformly spaced by pi/n_spokes.  Frame f rotates the
    whole set by f * (pi/n_spokes) * golden-fraction so consecutive frames
    sample different lines; the seed draws an additional global base rotation.
    Each spoke is walked in half-pixel radius steps in both directions and
    rounded to the nearest grid point, which keeps every frame point-symmetric
    about the center.  The DC sample is always on.
    """
    h, w, t = shape
    if n_spokes < 1:
        raise ValueError("n_spokes must be >= 1")
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, math.pi / n_spokes)
    cy, cx = h // 2, w // 2
    rmax = math.hypot(max(cy, h - 1 - cy), max(cx, w - 1 - cx))
    radii = np.arange(0.0, rmax + 0.5, 0.5)
    mask = np.zeros((h, w, t), dtype=np.uint8)
    for f in range(t):
        offset = base + f * (math.pi / n_spokes) * GOLDEN_FRACTION
        for s in range(n_spokes):
            ang = offset + s * math.pi / n_spokes
            dy = radii * math.sin(ang)
            dx = radii * math.cos(ang)
            for sign in (1.0, -1.0):
                ys = np.rint(cy + sign * dy).astype(np.int64)
                xs = np.rint(cx + sign * dx).astype(np.int64)
                keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
                mask[ys[keep], xs[keep], f] = 1
        mask[cy, cx, f] = 1
    return mask


def make_vds_mask(shape, acceleration, center_lines=4, seed=0):
    """Variable-density Cartesian mask: full ky lines, Gaussian-weighted draw.

    Per frame, ceil(w / acceleration) lines are on: `center_lines` consecutive
    lines around DC always, the rest drawn without replacement with
    probability decaying as a Gaussian (std w/6) of the distance from center.
    Frames draw independently from the seeded generator.
    """
    h, w, t = shape
    if acceleration < 1:
        raise ValueError("acceleration must be >= 1")
    if center_lines >= w:
        raise ValueError("center_lines must be smaller than w")
    target = math.ceil(w / acceleration)
    if target < center_lines:
        raise ValueError(
            f"target line count {target} is below center_lines {center_lines}"
        )
    rng = np.random.default_rng(seed)
    center = w // 2
    start = center - center_lines // 2
    center_idx = np.arange(start, start + center_lines)
    lines = np.arange(w)
    density = np.exp(-0.5 * ((lines - center) / (w / 6.0)) ** 2)
    rest = np.setdiff1d(lines, center_idx)
    weights = density[rest] / density[rest].sum()
    mask = np.zeros((h, w, t), dtype=np.uint8)
    for f in range(t):
        extra = rng.choice(rest, size=target - center_lines, replace=False, p=weights)
        mask[:, center_idx, f] = 1
        mask[:, extra, f] = 1
    return mask


def add_noise(b, sigma, seed=0, mask=None):
    """Add i.i.d. complex Gaussian noise (std sigma per real component).

    Noise lands only on sampled locations.  Pass the sampling mask when
    available; otherwise support is inferred from the nonzero entries of b
    (exact for outputs of a masked forward operator).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    out = np.array(b, copy=True)
    if sigma == 0:
        return out
    if mask is not None:
        check_same_shape(b, mask)
        support = mask != 0
    else:
        support = b != 0
    n = int(support.sum())
    rng = np.random.default_rng(seed)
    noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    out[support] += noise
    return out
