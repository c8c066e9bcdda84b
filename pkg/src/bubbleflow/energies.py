"""Discrete energies, local norms, tension, and the static inequalities.

All quadratures use the grid's own edge/volume data and the same gradient
stencil as the time stepper, so the discrete summation-by-parts identity
< -Lap u | u >_V = grad2(u) holds to rounding.  Windows (r1, r2) follow a
half-open convention: a cell or edge belongs to the window iff its
center/position lies in (r1, r2], which makes window sums exactly additive.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .bubbles import bubble_enorm, f_nonlin
from .grids import RadialField

__all__ = [
    "grad2",
    "energy",
    "local_energy",
    "enorm",
    "enorm2",
    "tension",
    "radial_sobolev_bound",
    "hardy_tail_constant_check",
    "TrappingCertificate",
    "trapping_delta_admissible",
    "trapping_default_delta",
    "trapping_constant",
    "trapping_bound",
    "l2_norm",
    "inner_product",
]


def _window_masks(grid, r1: float, r2: float):
    """Boolean masks (cells, edges) selecting the window (r1, r2]."""
    if not 0.0 <= r1 < r2:
        raise ValueError(f"window must satisfy 0 <= r1 < r2, got ({r1}, {r2})")
    cells = (grid.nodes > r1) & (grid.nodes <= r2)
    edges = (grid.edges[1:] > r1) & (grid.edges[1:] <= r2)
    return cells, edges


def _edge_grad_terms(field: RadialField) -> np.ndarray:
    """Per-edge contributions c_i (u_{i+1} - u_i)^2, Dirichlet edge included."""
    v = field.values
    c = field.grid.conductances
    terms = np.empty(field.grid.n)
    terms[:-1] = c[:-1] * (v[1:] - v[:-1]) ** 2
    terms[-1] = c[-1] * v[-1] ** 2
    return terms


def grad2(field: RadialField, r1: float = 0.0, r2: float = math.inf) -> float:
    """Windowed discrete Dirichlet integral int (d_r u)^2 r^(D-1) dr."""
    _, edges = _window_masks(field.grid, r1, r2)
    return float(np.sum(_edge_grad_terms(field)[edges]))


def local_energy(field: RadialField, r1: float, r2: float) -> float:
    """Static energy restricted to the window (r1, r2).

    The integrand is e(u) = (1/2)(d_r u)^2 - ((D-2)/(2D)) |u|^(2D/(D-2)),
    integrated against r^(D-1) dr; r2 = inf means up to r_max, relying on
    the field being supported well inside the domain (bubble tails beyond
    r_max decay like r^-(D-2) and are dropped).
    """
    D = field.dimension
    cells, edges = _window_masks(field.grid, r1, r2)
    g2 = np.sum(_edge_grad_terms(field)[edges])
    pot = np.sum(
        np.abs(field.values[cells]) ** (2.0 * D / (D - 2)) * field.grid.volumes[cells]
    )
    return float(0.5 * g2 - (D - 2) / (2.0 * D) * pot)


def energy(field: RadialField) -> float:
    """Total static energy of a sampled field."""
    return local_energy(field, 0.0, math.inf)


def enorm2(field: RadialField, r1: float = 0.0, r2: float = math.inf) -> float:
    """Squared Hardy energy norm on the window (r1, r2)."""
    cells, edges = _window_masks(field.grid, r1, r2)
    g2 = np.sum(_edge_grad_terms(field)[edges])
    hardy = np.sum(field.values[cells] ** 2 * field.grid.hardy_weights[cells])
    return float(g2 + hardy)


def enorm(field: RadialField, r1: float = 0.0, r2: float = math.inf) -> float:
    """Hardy energy norm ( int (d_r u)^2 + u^2/r^2 against r^(D-1) dr )^(1/2)."""
    return math.sqrt(enorm2(field, r1, r2))


def l2_norm(field: RadialField) -> float:
    return float(np.sqrt(np.sum(field.values**2 * field.grid.volumes)))


def inner_product(grid, u: np.ndarray, v: np.ndarray) -> float:
    """Volume-weighted inner product of two sample arrays."""
    return float(np.sum(u * v * grid.volumes))


def tension(field: RadialField) -> RadialField:
    """Right-hand side Lap u + |u|^(4/(D-2)) u with the solver's Laplacian.

    Vanishes on exact bubbles up to O(h^2); equals du/dt along the flow.
    """
    vals = field.grid.apply_laplacian(field.values) + f_nonlin(field.dimension, field.values)
    return RadialField(field.grid, vals)


def radial_sobolev_bound(field: RadialField, R: float) -> tuple[float, float]:
    """Pointwise tail bound |v(R)| <= sqrt(2) R^(-(D-2)/2) ||v||_E(R, inf).

    Returns (lhs, rhs).  The exponent follows the chain of estimates behind
    the embedding (the (D-2)/2 power is the dimensionally consistent one).
    """
    if R <= 0:
        raise ValueError("R must be positive")
    D = field.dimension
    lhs = abs(float(field.grid.interpolate(field.values, R)))
    rhs = math.sqrt(2.0) * R ** (-(D - 2) / 2.0) * enorm(field, R, math.inf)
    return lhs, rhs


def hardy_tail_constant_check(field: RadialField, R: float) -> tuple[float, float]:
    """Tail Hardy inequality with the sharp constant 4/(D-2)^2.

    Returns (lhs, rhs) = (int_R^inf v^2/r^2, (4/(D-2)^2) int_R^inf (d_r v)^2),
    both against r^(D-1) dr; the contract is lhs <= rhs.
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    D = field.dimension
    cells, edges = _window_masks(field.grid, R, math.inf)
    lhs = float(np.sum(field.values[cells] ** 2 * field.grid.hardy_weights[cells]))
    g2 = float(np.sum(_edge_grad_terms(field)[edges]))
    return lhs, 4.0 / (D - 2) ** 2 * g2


class TrappingCertificate(NamedTuple):
    energy: float
    enorm2: float
    certified: bool
    constant: float
    delta: float


def trapping_constant(D: int) -> float:
    """Coercivity constant C = C3inv / (4 (1 + C3inv)) with C3inv = (D-2)^2/4."""
    c3inv = (D - 2) ** 2 / 4.0
    return c3inv / (4.0 * (1.0 + c3inv))


def trapping_delta_admissible(D: int) -> float:
    """Largest smallness threshold the tail-trapping derivation supports.

    The derivation needs delta^(4/(D-2)) < C3inv / (2 C1) with
    C1 = 2^(2/(D-2)).
    """
    c3inv = (D - 2) ** 2 / 4.0
    c1 = 2.0 ** (2.0 / (D - 2))
    return (c3inv / (2.0 * c1)) ** ((D - 2) / 4.0)


def trapping_default_delta(D: int) -> float:
    """Default smallness threshold: 0.1 ||W||_E, capped at the admissible one."""
    return min(0.1 * bubble_enorm(D), 0.999 * trapping_delta_admissible(D))


def trapping_bound(field: RadialField, R: float, delta: float | None = None) -> TrappingCertificate:
    """Energy-trapping certificate on the tail (R, inf).

    If ||v||_E(R, inf) <= delta the nonlinear energy controls the norm:
    E(v; R, inf) >= C ||v||^2_E(R, inf) with the concrete constant from
    trapping_constant.  Returns both sides and whether the smallness
    hypothesis held; an uncertified result carries the values anyway.
    """
    D = field.dimension
    if delta is None:
        delta = trapping_default_delta(D)
    n2 = enorm2(field, R, math.inf)
    en = local_energy(field, R, math.inf)
    certified = math.sqrt(n2) <= delta
    return TrappingCertificate(en, n2, certified, trapping_constant(D), delta)
