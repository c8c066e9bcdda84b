#!/usr/bin/env python3
"""Modulation decompositions: proximity values and constrained fits.

Fits exact and perturbed bubble data, evaluates the multi-bubble energy
expansion and the interaction pairing against their leading terms.
"""

from bubbleflow.bubbles import eval_bubble
from bubbleflow.grids import BubbleConfig, RadialField, RadialGrid
from bubbleflow.modulation import (
    energy_expansion_check,
    fit_modulation,
    interaction_pairing,
    proximity_dM,
    proximity_deltaR,
)
from bubbleflow.spectral import default_spectral_pack

D = 5
grid = RadialGrid.geometric(D, 1024, 2e4, 1.02)
ep, zp = default_spectral_pack(D)

W = RadialField(grid, eval_bubble(D, 1.0, grid.nodes))
print(f"proximity of W to the 1-bubble family: d_1 = {proximity_dM(W, 1).value:.2e}")
print(f"proximity of 1.5 W:                    d_1 = {proximity_dM(1.5 * W, 1).value:.4f}")

rep = proximity_deltaR(W, 50.0)
print(f"windowed delta_R(W, R=50): value={rep.value:.4f} with M={rep.config.M} "
      f"(boundary ratio (lam/R)^((D-2)/2) only)")

print("\nconstrained fits (orthogonality <Z_lam|g> = 0):")
for lam_star in (0.3, 1.0, 3.0):
    v = RadialField(grid, eval_bubble(D, lam_star, grid.nodes))
    st = fit_modulation(v, 1, BubbleConfig((1,), (1.3 * lam_star,)), ep, zp)
    print(f"  exact W_{lam_star}: fitted lam = {st.config.scales[0]:.10f}, "
          f"||g||_E = {st.gnorm_e:.2e}, a- = {st.a_minus[0]:+.2e}")

v2 = RadialField(grid, eval_bubble(D, 0.02, grid.nodes) - eval_bubble(D, 1.0, grid.nodes))
st2 = fit_modulation(v2, 2, BubbleConfig((1, -1), (0.015, 1.2)), ep, zp)
print(f"  two-bubble W_.02 - W_1: fitted scales {tuple(round(s, 6) for s in st2.config.scales)}")

print("\nenergy expansion around two same-sign bubbles (D=5):")
for eps in (1e-1, 10**-1.5, 1e-2):
    lhs, lead, rsum = energy_expansion_check(D, BubbleConfig((1, 1), (eps, 1.0)))
    print(f"  eps={eps:.4f}: E(W)-2E(W) = {lhs:+.6e}, leading = {-lead:+.6e}, "
          f"defect/|leading| = {abs(lhs + lead) / abs(lead):.4f}")

print("\ninteraction pairing vs leading term:")
for eps in (10**-1.5, 1e-2, 10**-2.5):
    pairing, lead = interaction_pairing(D, BubbleConfig((1, 1), (eps, 1.0)), 2)
    print(f"  eps={eps:.5f}: pairing/leading = {pairing / lead:.4f}")
