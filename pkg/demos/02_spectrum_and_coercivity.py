#!/usr/bin/env python3
"""The linearized operator: its single unstable direction and coercivity.

Computes the negative eigenpair on the recommended uniform grid, balances
the orthogonality profile, and demonstrates the coercivity form on a
Z-orthogonal random field versus the kernel direction.
"""

import numpy as np

from bubbleflow.bubbles import eval_lambda_bubble
from bubbleflow.energies import enorm2, inner_product
from bubbleflow.grids import BubbleConfig, RadialField
from bubbleflow.manifests import load_constants
from bubbleflow.spectral import (
    build_z_profile,
    coercivity_form,
    negative_eigenpair,
    spectrum_grid,
)

D = 4
grid = spectrum_grid(D, n=2**17)
ep = negative_eigenpair(D, grid)
print(f"D={D}: unique negative eigenvalue -kappa^2 = {-ep.kappa2:.8f} (kappa={ep.kappa:.6f})")

lw = np.asarray(eval_lambda_bubble(D, grid.nodes))
pair = inner_product(grid, ep.values, lw)
cos = pair / np.sqrt(inner_product(grid, lw, lw))
print(f"ground state vs kernel direction: <Y|LW> = {pair:.2e} (normalized {cos:.2e})")

zp = build_z_profile(D, ep)
print(f"Z profile amplitudes: inner {zp.amp_inner:+.4f}, outer {zp.amp_outer:+.4f}")
print(f"  <Z|Y>  = {inner_product(grid, zp(grid.nodes), ep.values):.2e}")
print(f"  <Z|LW> = {inner_product(grid, zp(grid.nodes), lw):.4f} (positive)")

consts = load_constants(D)
print(f"\npackaged constants: kappa2={consts.kappa2:.8f}, c0={consts.c0:.4f}, eta={consts.eta:.4f}")

from bubbleflow.grids import RadialGrid

work = RadialGrid.geometric(D, 2048, 1e5, 1.015)  # coarse far cells: boundary closure negligible
rng = np.random.default_rng(3)
r = work.nodes
g0 = np.exp(-((r - 2.5) ** 2)) * rng.uniform(0.5, 1.0) + 0.3 * np.exp(-((r - 6.0) ** 2) / 4.0)
z1 = zp.rescaled(1.0, r)
g0 -= (inner_product(work, z1, g0) / inner_product(work, z1, z1)) * z1
g = RadialField(work, g0)
rep = coercivity_form(g, BubbleConfig((1,), (1.0,)), ep, zp, c0=consts.c0)
print(f"\nZ-orthogonal random field: form = {rep.form:.4f} >= c0 ||g||_E^2 = {rep.lower_bound:.4f}")

lw_field = RadialField(work, np.asarray(eval_lambda_bubble(D, work.nodes)))
rep_k = coercivity_form(lw_field, BubbleConfig((1,), (1.0,)), ep, zp, c0=consts.c0)
print(f"kernel direction LW: form = {rep_k.form:.2e} while ||LW||_E^2 = {enorm2(lw_field):.3f} "
      f"(tiny form despite O(1) norm; Z-orthogonality hypothesis violated: {not rep_k.hypothesis_ok})")
