#!/usr/bin/env python3
"""Tour of the bubble family and the static energy calculus.

Samples the ground-state profile on a graded grid, checks scale invariance
of the energies, evaluates the tail inequalities, and prints a trapping
certificate.
"""

import math

import numpy as np

from bubbleflow.bubbles import (
    bubble_energy,
    bubble_enorm,
    eval_bubble,
    eval_lambda_bubble,
    lambda_bubble_root,
)
from bubbleflow.energies import (
    energy,
    enorm,
    hardy_tail_constant_check,
    local_energy,
    radial_sobolev_bound,
    tension,
    trapping_bound,
)
from bubbleflow.grids import RadialField, RadialGrid

D = 5
grid = RadialGrid.geometric(D, 2048, 2e4, 1.015)
print(f"dimension D={D};  grid: {grid.n} cells, r_max={grid.r_max:g}")
print(f"bubble at the origin:  W(0) = {eval_bubble(D, 1.0, 0.0):.6f}")
print(f"generator zero crossing at r = {lambda_bubble_root(D):.6f} "
      f"(LW there = {eval_lambda_bubble(D, lambda_bubble_root(D)):.2e})")

W = RadialField(grid, eval_bubble(D, 1.0, grid.nodes), tag="exact-bubble")
print(f"\nE(W)  discrete {energy(W):.8f}   closed-form quadrature {bubble_energy(D):.8f}")
print(f"||W||_E discrete {enorm(W):.8f}   closed-form quadrature {bubble_enorm(D):.8f}")

print("\nscale invariance on mapped grids (exact to rounding):")
for lam in (0.5, 2.0):
    mapped = RadialGrid.geometric(D, 2048, lam * 2e4, 1.015)
    Wl = RadialField(mapped, eval_bubble(D, lam, mapped.nodes))
    print(f"  lam={lam}: |E(W_lam) - E(W)| = {abs(energy(Wl) - energy(W)):.2e}")

print("\nwindow additivity:")
E_in = local_energy(W, 0.0, 4.0)
E_out = local_energy(W, 4.0, math.inf)
print(f"  E(W;0,4) + E(W;4,inf) - E(W) = {E_in + E_out - energy(W):.2e}")

T = tension(W)
print(f"\nstationarity: ||T(W)||_L2 = "
      f"{math.sqrt(float(np.sum(T.values**2 * grid.volumes))):.2e}  (O(h^2) residual)")

print("\ntail inequalities for W:")
for R in (1.0, 5.0, 20.0):
    lhs, rhs = radial_sobolev_bound(W, R)
    hl, hr = hardy_tail_constant_check(W, R)
    print(f"  R={R:5.1f}:  |W(R)|={lhs:.4e} <= {rhs:.4e};   hardy {hl:.4e} <= {hr:.4e}")

cert = trapping_bound(0.01 * W, 0.0)
print(f"\ntrapping certificate for 0.01 W: certified={cert.certified}, "
      f"E={cert.energy:.3e} >= C*||.||^2 = {cert.constant * cert.enorm2:.3e}")
cert_big = trapping_bound(W, 0.0)
print(f"full bubble: certified={cert_big.certified} (norm {math.sqrt(cert_big.enorm2):.2f} "
      f"exceeds delta={cert_big.delta:.3f})")
