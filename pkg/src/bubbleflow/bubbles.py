"""Closed forms for the ground-state bubble family and its generators.

The stationary profile in dimension D >= 3 is

    W(r) = (1 + r^2 / (D(D-2)))^(-(D-2)/2),

with the gradient-invariant rescaling W_lam(r) = lam^(-(D-2)/2) W(r/lam).
The scaling generator (r d/dr + (D-2)/2) acts as

    LW(r) = ((D-2)/2 - r^2/(2D)) (1 + r^2/(D(D-2)))^(-D/2),

positive in the core with a single sign change at r = sqrt(D(D-2)).  This
profile spans the kernel of the linearized operator (dilation invariance),
which pins the closed form: the kernel residual of any other prefactor stays
O(1) under refinement.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import integrate

from .grids import BubbleConfig, RadialField, RadialGrid

__all__ = [
    "eval_bubble",
    "eval_bubble_deriv",
    "eval_lambda_bubble",
    "multi_bubble",
    "multi_bubble_values",
    "multi_bubble_deriv_values",
    "f_nonlin",
    "f_prime",
    "bubble_energy",
    "bubble_enorm",
    "lambda_bubble_root",
]


def _check_dimension(D: int) -> int:
    D = int(D)
    if D < 3:
        raise ValueError(f"dimension must be >= 3, got {D}")
    return D


def eval_bubble(D: int, lam: float, r) -> np.ndarray | float:
    """Rescaled bubble W_lam(r) = lam^(-(D-2)/2) W(r/lam)."""
    D = _check_dimension(D)
    if lam <= 0:
        raise ValueError(f"scale must be positive, got {lam}")
    r = np.asarray(r, dtype=float)
    s2 = (r / lam) ** 2 / (D * (D - 2))
    out = lam ** (-(D - 2) / 2.0) * (1.0 + s2) ** (-(D - 2) / 2.0)
    return out if out.ndim else float(out)


def eval_bubble_deriv(D: int, lam: float, r) -> np.ndarray | float:
    """Radial derivative of W_lam, analytic."""
    D = _check_dimension(D)
    if lam <= 0:
        raise ValueError(f"scale must be positive, got {lam}")
    r = np.asarray(r, dtype=float)
    c = D * (D - 2)
    s = r / lam
    # W'(s) = -(D-2) s / c * (1 + s^2/c)^(-D/2); chain rule adds lam^(-D/2)
    out = lam ** (-D / 2.0) * (-(D - 2) * s / c) * (1.0 + s**2 / c) ** (-D / 2.0)
    return out if out.ndim else float(out)


def eval_lambda_bubble(D: int, r) -> np.ndarray | float:
    """Scaling generator applied to the bubble, (r d/dr + (D-2)/2) W."""
    D = _check_dimension(D)
    r = np.asarray(r, dtype=float)
    c = D * (D - 2)
    out = ((D - 2) / 2.0 - r**2 / (2.0 * D)) * (1.0 + r**2 / c) ** (-D / 2.0)
    return out if out.ndim else float(out)


def lambda_bubble_root(D: int) -> float:
    """The unique positive zero of the generator profile: sqrt(D(D-2))."""
    _check_dimension(D)
    return float(np.sqrt(D * (D - 2.0)))


def multi_bubble_values(D: int, config: BubbleConfig, r) -> np.ndarray:
    """Pointwise values of the signed bubble superposition at radii r."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for iota, lam in zip(config.signs, config.scales):
        out += iota * eval_bubble(D, lam, r)
    return out


def multi_bubble_deriv_values(D: int, config: BubbleConfig, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for iota, lam in zip(config.signs, config.scales):
        out += iota * eval_bubble_deriv(D, lam, r)
    return out


def multi_bubble(config: BubbleConfig, grid: RadialGrid) -> RadialField:
    """Sample a multi-bubble configuration on a grid (zero field for M = 0)."""
    vals = multi_bubble_values(grid.dimension, config, grid.nodes)
    tag = "exact-bubble" if config.M == 1 else "exact-multibubble"
    if config.M == 0:
        tag = "generic"
    return RadialField(grid, vals, tag=tag)


def f_nonlin(D: int, u):
    """Critical focusing nonlinearity |u|^(4/(D-2)) u."""
    u = np.asarray(u, dtype=float)
    out = np.abs(u) ** (4.0 / (D - 2)) * u
    return out if out.ndim else float(out)


def f_prime(D: int, u):
    """Derivative of the nonlinearity, (D+2)/(D-2) |u|^(4/(D-2))."""
    u = np.asarray(u, dtype=float)
    out = (D + 2.0) / (D - 2.0) * np.abs(u) ** (4.0 / (D - 2))
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def bubble_energy(D: int) -> float:
    """Static energy E(W), by adaptive quadrature of the closed form.

    Scale invariance makes this the per-bubble energy quantum for every lam.
    """
    D = _check_dimension(D)
    p1 = 2.0 * D / (D - 2)

    def dens(r):
        du = eval_bubble_deriv(D, 1.0, r)
        u = eval_bubble(D, 1.0, r)
        return (0.5 * du**2 - (D - 2) / (2.0 * D) * np.abs(u) ** p1) * r ** (D - 1)

    core = np.sqrt(D * (D - 2.0))
    val = 0.0
    for a, b in ((0.0, core), (core, 100.0 * core), (100.0 * core, np.inf)):
        part, _ = integrate.quad(dens, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        val += part
    return val


@lru_cache(maxsize=None)
def bubble_enorm(D: int) -> float:
    """Hardy energy norm of the bubble, by adaptive quadrature."""
    D = _check_dimension(D)

    def dens(r):
        du = eval_bubble_deriv(D, 1.0, r)
        u = eval_bubble(D, 1.0, r)
        return (du**2 + (u / r) ** 2) * r ** (D - 1)

    core = np.sqrt(D * (D - 2.0))
    val = 0.0
    for a, b in ((0.0, core), (core, 100.0 * core), (100.0 * core, np.inf)):
        part, _ = integrate.quad(dens, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        val += part
    return float(np.sqrt(val))
