"""The bilinear fractional kernel and its smooth truncations.

The untruncated kernel is K(x,y,z) = (|x-y|^2 + |x-z|^2)^-(n - alpha/2).
Truncations K_delta multiply K by a quintic smoothstep in the Euclidean
radius rho = (|x-y|^2 + |x-z|^2)^(1/2), rising from 0 at sqrt(2) delta to 1
at 2 delta.  Because max(|x-y|, |x-z|) < delta forces rho < sqrt(2) delta
and max > 2 delta forces rho > 2 delta, the truncation vanishes inside the
max-ball of radius delta and agrees with K outside radius 2 delta, with a
gradient of order (|x-y| + |x-z|)^-(2n - alpha + 1) in the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)


class SingularNode(ValueError):
    """Evaluation exactly at y = z = x, where the kernel is infinite."""


@dataclass(frozen=True)
class KernelParams:
    """Kernel exponent data: dimension n, order alpha, optional delta."""

    dim: int
    alpha: float
    delta: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not (0 < self.alpha < 2 * self.dim):
            raise ValueError(
                f"alpha must lie in (0, {2 * self.dim}), got {self.alpha}"
            )
        if self.delta is not None and not (self.delta > 0):
            raise ValueError("delta must be positive when present")

    @property
    def exponent(self) -> float:
        """The decay exponent n - alpha/2 applied to the squared radius."""
        return self.dim - 0.5 * self.alpha

    def truncated(self, delta: float | None) -> "KernelParams":
        return KernelParams(self.dim, self.alpha, delta)


def smoothstep(s):
    """Quintic smoothstep 6 s^5 - 15 s^4 + 10 s^3, clamped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def window(rho_sq, delta: float):
    """Truncation factor as a function of the squared radius rho^2."""
    rho = np.sqrt(rho_sq)
    s = (rho - _SQRT2 * delta) / ((2.0 - _SQRT2) * delta)
    return smoothstep(s)


def _rho_sq(x, y, z) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return float(np.sum((x - y) ** 2) + np.sum((x - z) ** 2))


def k_alpha(x, y, z, params: KernelParams) -> float:
    """Untruncated kernel at points x, y, z of R^n."""
    rho_sq = _rho_sq(x, y, z)
    if rho_sq == 0.0:
        raise SingularNode("singular node: y = z = x")
    return rho_sq ** (-params.exponent)


def k_delta(x, y, z, params: KernelParams) -> float:
    """Smoothly truncated kernel; zero inside the dead zone (incl. y=z=x)."""
    if params.delta is None:
        raise ValueError("k_delta requires params.delta")
    rho_sq = _rho_sq(x, y, z)
    psi = float(window(rho_sq, params.delta))
    if psi == 0.0:
        return 0.0
    return psi * rho_sq ** (-params.exponent)


def kernel_value(x, y, z, params: KernelParams) -> float:
    """k_delta when params carry delta, else k_alpha."""
    if params.delta is not None:
        return k_delta(x, y, z, params)
    return k_alpha(x, y, z, params)


def kernel_from_rho_sq(rho_sq: np.ndarray, params: KernelParams) -> np.ndarray:
    """Vectorized kernel from squared radii; rho_sq == 0 entries map to 0.

    The zero entry implements the quadrature policy for the untruncated
    kernel (the single singular node is dropped); truncated kernels vanish
    there anyway.
    """
    rho_sq = np.asarray(rho_sq, dtype=float)
    out = np.zeros_like(rho_sq)
    nz = rho_sq > 0
    out[nz] = rho_sq[nz] ** (-params.exponent)
    if params.delta is not None:
        out[nz] *= window(rho_sq[nz], params.delta)
    return out
