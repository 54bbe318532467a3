"""Model-based solver for the transformed-l1 reconstruction objective.

Minimizes 0.5*||A(x) - b||_F^2 + lam*||T(x)||_1 by alternating-direction
splitting with auxiliary variable z and scaled multiplier l.  The sparsifying
transform T is the unitary temporal DFT (configurable to identity for tests).
One iteration:

    z <- T^H( ST( T(x + l), lam/mu ) )
    x <- argmin 0.5*||A(x) - b||^2 + mu/2*||z - x - l||^2
    l <- l - eta*(z - x)

The x step has a closed form on Cartesian grids because the encoding DFT is
unitary: per k-space entry, x_hat = (m*b + mu*y_hat) / (m + mu) with
y = z - l.  A conjugate-gradient solve of the same normal equations is
available as an alternative route.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .encoding import fft2_frames
from .errors import NumericalError
from .volume import check_same_shape, fro_norm


@dataclass
class AdmmConfig:
    lam: float = 0.01
    mu: float = 0.1
    eta: float = 1.0
    n_iters: int = 50
    cg_tol: float = 1e-8
    cg_max_iters: int = 100
    x_update: str = "closed_form"
    transform: str = "temporal_fft"

    def __post_init__(self):
        if self.lam < 0 or self.mu <= 0 or self.eta <= 0:
            raise ValueError("lam must be >= 0 and mu, eta > 0")
        if self.cg_tol <= 0:
            raise ValueError("cg_tol must be > 0")
        if self.x_update not in ("closed_form", "cg"):
            raise ValueError(f"unknown x_update {self.x_update!r}")
        if self.transform not in ("temporal_fft", "identity"):
            raise ValueError(f"unknown transform {self.transform!r}")


@dataclass
class AdmmState:
    x: np.ndarray
    z: np.ndarray
    l: np.ndarray


class CgInfo(NamedTuple):
    n_iters: int
    residual: float  # relative to ||rhs||


@dataclass
class IterRecord:
    iteration: int
    objective: float
    fidelity: float
    l1_term: float
    constraint: float  # ||z - x||_F


def soft_threshold_complex(v, tau):
    """Magnitude shrinkage u * max(1 - tau/|u|, 0); zero stays zero."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    mag = np.abs(v)
    shrunk = np.maximum(mag - tau, 0.0)
    return v * (shrunk / np.where(mag > 0, mag, 1.0))


def temporal_fft(v, direction="forward"):
    """Unitary 1-D DFT along the temporal axis of a (h, w, t) volume."""
    if direction == "forward":
        return np.fft.fft(v, axis=2, norm="ortho")
    if direction == "inverse":
        return np.fft.ifft(v, axis=2, norm="ortho")
    raise ValueError(f"unknown direction {direction!r}")


def _transform(v, cfg, direction):
    if cfg.transform == "identity":
        return v
    return temporal_fft(v, direction)


def z_update(state, cfg):
    """Shrinkage step: T^H(ST(T(x + l), lam/mu))."""
    coeffs = _transform(state.x + state.l, cfg, "forward")
    shrunk = soft_threshold_complex(coeffs, cfg.lam / cfg.mu)
    return _transform(shrunk, cfg, "inverse")


def x_update_closed_form(z, l, b, encoder, mu):
    """Exact minimizer of the data-consistency subproblem on a Cartesian grid."""
    if mu <= 0:
        raise ValueError("mu must be > 0")
    check_same_shape(z, l)
    check_same_shape(z, b)
    y_hat = fft2_frames(z - l, "forward")
    m = encoder.mask.astype(np.float64)
    x_hat = (m * b + mu * y_hat) / (m + mu)
    return fft2_frames(x_hat, "inverse")


def x_update_cg(z, l, b, encoder, mu, tol=1e-8, max_iters=100):
    """Solve (A^H A + mu I) x = A^H b + mu (z - l) by conjugate gradients.

    Returns (x, CgInfo).  The operator is Hermitian positive definite with
    spectrum {mu, 1 + mu}, so a handful of iterations suffices.
    """
    if mu <= 0:
        raise ValueError("mu must be > 0")
    check_same_shape(z, l)
    check_same_shape(z, b)

    def apply(v):
        return encoder.adjoint(encoder.forward(v)) + mu * v

    rhs = encoder.adjoint(b) + mu * (z - l)
    rhs_norm = fro_norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), CgInfo(0, 0.0)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rs = np.vdot(r, r).real
    n_done = 0
    for _ in range(max_iters):
        if np.sqrt(rs) <= tol * rhs_norm:
            break
        ap = apply(p)
        alpha = rs / np.vdot(p, ap).real
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = np.vdot(r, r).real
        if not np.isfinite(rs_new):
            raise NumericalError("non-finite residual in CG x-update")
        p = r + (rs_new / rs) * p
        rs = rs_new
        n_done += 1
    return x, CgInfo(n_done, float(np.sqrt(rs) / rhs_norm))


def l_update(state, eta):
    """Scaled multiplier step l - eta*(z - x)."""
    check_same_shape(state.z, state.x)
    return state.l - eta * (state.z - state.x)


def objective(x, b, encoder, cfg):
    """Objective value split into (total, fidelity, l1 term)."""
    residual = encoder.forward(x) - b
    fidelity = 0.5 * fro_norm(residual) ** 2
    l1 = float(np.sum(np.abs(_transform(x, cfg, "forward"))))
    return fidelity + cfg.lam * l1, fidelity, l1


def reconstruct(b, encoder, cfg):
    """Run n_iters alternating steps from the zero-filled start.

    Returns (x, diagnostics): the final iterate and one IterRecord per
    iteration.  Objectives are reported, not asserted monotone.
    """
    x0 = encoder.adjoint(b)
    state = AdmmState(x=x0, z=x0.copy(), l=np.zeros_like(x0))
    diagnostics = []
    for it in range(1, cfg.n_iters + 1):
        state.z = z_update(state, cfg)
        if cfg.x_update == "closed_form":
            state.x = x_update_closed_form(state.z, state.l, b, encoder, cfg.mu)
        else:
            state.x, _ = x_update_cg(
                state.z, state.l, b, encoder, cfg.mu, cfg.cg_tol, cfg.cg_max_iters
            )
        state.l = l_update(state, cfg.eta)
        total, fidelity, l1 = objective(state.x, b, encoder, cfg)
        if not np.isfinite(total):
            raise NumericalError(f"non-finite objective at iteration {it}")
        diagnostics.append(
            IterRecord(
                iteration=it,
                objective=total,
                fidelity=fidelity,
                l1_term=l1,
                constraint=fro_norm(state.z - state.x),
            )
        )
    return state.x, diagnostics
