"""Synthetic dynamic phantoms: soft ellipses with periodic motion.

A phantom is a sum of smooth-edged ellipses whose centers translate
sinusoidally over the frame axis (one full cycle per clip, each ellipse with
its own phase and direction).  Geometry, intensities, and motion phases are
drawn from a seeded generator, so a spec maps to exactly one volume.  The
complex phase is a fixed smooth ramp over (y, x), identical for every seed,
which keeps both real channels exercised without coupling phase to the draw.
Peak magnitude is normalized to 1.
"""

from dataclasses import dataclass

import numpy as np

from .mathutil import sigmoid

EDGE_SOFTNESS = 0.08


@dataclass
class PhantomSpec:
    shape: tuple  # (h, w, t)
    n_ellipses: int = 6
    motion: float = 0.08  # center excursion as a fraction of the field of view
    seed: int = 0

    def __post_init__(self):
        if len(self.shape) != 3 or any(d < 1 for d in self.shape):
            raise ValueError(f"bad shape {self.shape}")
        if self.n_ellipses < 1:
            raise ValueError("n_ellipses must be >= 1")
        if not 0 <= self.motion < 0.5:
            raise ValueError("motion must be in [0, 0.5)")


def _phase_map(h, w):
    """Smooth fixed phase over the unit square, seed-independent."""
    y = np.linspace(-1.0, 1.0, h)[:, None]
    x = np.linspace(-1.0, 1.0, w)[None, :]
    return 0.6 * np.sin(1.7 * y + 0.9) + 0.5 * np.cos(2.3 * x - 0.4) + 0.4 * y * x


def generate_phantom(spec):
    """Render the phantom volume for a spec; pure function of its fields."""
    h, w, t = spec.shape
    rng = np.random.default_rng(spec.seed)
    n = spec.n_ellipses
    centers = rng.uniform(-0.55, 0.55, size=(n, 2))
    axes = rng.uniform(0.12, 0.45, size=(n, 2))
    intensities = rng.uniform(0.3, 1.0, size=n)
    angles = rng.uniform(0.0, np.pi, size=n)
    motion_phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    motion_dirs = rng.uniform(0.0, 2.0 * np.pi, size=n)

    y = np.linspace(-1.0, 1.0, h)[:, None]
    x = np.linspace(-1.0, 1.0, w)[None, :]
    mag = np.zeros((h, w, t))
    for f in range(t):
        frame = np.zeros((h, w))
        for e in range(n):
            # field of view spans 2 in normalized units
            shift = 2.0 * spec.motion * np.sin(
                2.0 * np.pi * f / t + motion_phases[e]
            )
            cy = centers[e, 0] + shift * np.sin(motion_dirs[e])
            cx = centers[e, 1] + shift * np.cos(motion_dirs[e])
            ca, sa = np.cos(angles[e]), np.sin(angles[e])
            yr = (y - cy) * ca + (x - cx) * sa
            xr = -(y - cy) * sa + (x - cx) * ca
            rho2 = (yr / axes[e, 0]) ** 2 + (xr / axes[e, 1]) ** 2
            frame += intensities[e] * sigmoid((1.0 - rho2) / EDGE_SOFTNESS)
        mag[:, :, f] = frame
    v = mag * np.exp(1j * _phase_map(h, w))[:, :, None]
    peak = np.max(np.abs(v))
    if peak > 0:
        v = v / peak
    return v


def make_phantom_dataset(n_samples, shape, n_ellipses=6, motion=0.08, seed=0):
    """n_samples phantoms with consecutive derived seeds."""
    return [
        generate_phantom(
            PhantomSpec(shape=shape, n_ellipses=n_ellipses, motion=motion, seed=seed + i)
        )
        for i in range(n_samples)
    ]
