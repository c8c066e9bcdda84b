"""Acceptance criteria, one test per criterion, each printing PASS/FAIL.

These pin the package-level contracts: stationarity of the ground state,
first-order energy-ledger convergence, the variational balance of W, the
spectral pipeline against an independent shooting oracle, the two-bubble
expansion constants, modulation round-trips, the inequality corpus, the
dissipation/blow-up phase boundary, and byte-level determinism.
"""

import json
import math
import time

import numpy as np
from scipy.integrate import quad

import oracles
from bubbleflow.analyzer import analyze
from bubbleflow.bubbles import (
    bubble_enorm,
    eval_bubble,
    eval_bubble_deriv,
    eval_lambda_bubble,
)
from bubbleflow.energies import (
    enorm,
    hardy_tail_constant_check,
    inner_product,
    radial_sobolev_bound,
    trapping_bound,
    trapping_default_delta,
)
from bubbleflow.evolution import SolverConfig, dissipation_ledger, evolve
from bubbleflow.grids import BubbleConfig, RadialField, RadialGrid
from bubbleflow.modulation import (
    energy_expansion_check,
    fit_modulation,
    interaction_pairing,
)
from bubbleflow.spectral import negative_eigenpair, spectrum_grid
from bubbleflow.suites import _random_compact_fields


def report(criterion, passed, detail):
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    return passed


def sim_grid(D, n=1024):
    return RadialGrid.geometric(D, n, 2e4, 1.02)


def test_criterion_1_stationarity():
    ok = True
    details = []
    for D in (3, 5):
        g = sim_grid(D, 1024)
        W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
        cfg = SolverConfig(t_end=1.0, dt_init=1e-6, dt_max=5e-2, err_tol=1e-7,
                           snapshot_dt=0.1)
        t0 = time.time()
        traj = evolve(W, cfg)
        wall = time.time() - t0
        sup = max(enorm(f - W) for _, f in traj.snapshots)
        tol = 1e-3 * bubble_enorm(D)
        ok &= sup <= tol and wall <= 60.0
        details.append(f"D={D}: sup|u-W|_E={sup:.3e} <= {tol:.3e}, {wall:.1f}s")
    assert report(1, ok, "; ".join(details))


def test_criterion_2_energy_ledger():
    D = 3
    g = sim_grid(D)
    u0 = RadialField(g, np.exp(-(g.nodes**2)))
    residuals = {}
    for dt in (1e-3, 5e-4):
        cfg = SolverConfig(t_end=0.1, dt_init=dt, dt_max=dt, err_tol=1e9,
                           snapshot_dt=0.05)
        traj = evolve(u0, cfg)
        e0 = traj.records[0].energy
        residuals[dt] = abs(dissipation_ledger(traj, 0.0, 0.1)) / abs(e0)
    halving = residuals[1e-3] / residuals[5e-4]
    ok = residuals[1e-3] <= 1e-3 and 1.6 <= halving <= 2.4
    assert report(2, ok, f"rel residual {residuals[1e-3]:.2e} <= 1e-3, "
                         f"halving ratio {halving:.2f}")


def test_criterion_3_pohozaev():
    t0 = time.time()
    ok = True
    worst = 0.0
    for D in (3, 4, 5, 6):
        p1 = 2.0 * D / (D - 2)
        core = math.sqrt(D * (D - 2.0))
        grad_int = pot_int = 0.0
        for a, b in ((0, core), (core, 100 * core), (100 * core, np.inf)):
            grad_int += quad(lambda r: eval_bubble_deriv(D, 1.0, r) ** 2 * r ** (D - 1),
                             a, b, epsabs=1e-14, epsrel=1e-13, limit=300)[0]
            pot_int += quad(lambda r: eval_bubble(D, 1.0, r) ** p1 * r ** (D - 1),
                            a, b, epsabs=1e-14, epsrel=1e-13, limit=300)[0]
        rel = abs(grad_int - pot_int) / abs(grad_int)
        worst = max(worst, rel)
        ok &= rel <= 1e-8
    wall = time.time() - t0
    ok &= wall <= 1.0
    assert report(3, ok, f"max relative imbalance {worst:.2e} <= 1e-8, {wall:.2f}s")


def test_criterion_4_spectral():
    ok = True
    details = []
    for D in (3, 4, 5, 6):
        t0 = time.time()
        grid = spectrum_grid(D)  # n = 2^19
        ep = negative_eigenpair(D, grid)  # raises unless the count is exactly 1
        oracle = oracles.shooting_kappa2(D)
        rel = abs(ep.kappa2 - oracle) / oracle
        lw = np.asarray(eval_lambda_bubble(D, grid.nodes))
        cos = abs(inner_product(grid, ep.values, lw)) / math.sqrt(
            inner_product(grid, lw, lw))
        wall = time.time() - t0
        ok &= rel <= 1e-6 and cos <= 1e-8 and wall <= 30.0
        details.append(f"D={D}: k2 rel {rel:.1e}, <Y|LW> {cos:.1e}, {wall:.0f}s")
    assert report(4, ok, "; ".join(details))


def test_criterion_5_energy_expansion():
    D = 5
    rels, lits = [], []
    for eps in (1e-1, 10**-1.5, 1e-2):
        lhs, lead, rsum = energy_expansion_check(D, BubbleConfig((1, 1), (eps, 1.0)))
        rels.append(abs(lhs + lead) / abs(lead))
        lits.append(abs(lhs + lead) / rsum)
    ok = rels[0] > rels[1] > rels[2] and rels[2] <= 0.2
    ok &= lits[0] > lits[1] > lits[2]  # the ratio-sum normalization also decreases
    assert report(5, ok, f"defect/|leading| = {[round(x, 4) for x in rels]}, "
                         f"last <= 0.2; coefficient (D(D-2))^(D/2)/D")


def test_criterion_6_interaction_pairing():
    D = 5
    ratios = {}
    for eps in (10**-1.5, 1e-2, 10**-2.5):
        pairing, lead = interaction_pairing(D, BubbleConfig((1, 1), (eps, 1.0)), 2)
        ratios[eps] = pairing / lead
    devs = [abs(ratios[e] - 1.0) for e in (10**-1.5, 1e-2, 10**-2.5)]
    ok = 0.9 <= ratios[1e-2] <= 1.1 and devs[0] > devs[1] > devs[2]
    assert report(6, ok, f"pairing/leading at 1e-2: {ratios[1e-2]:.4f} in [0.9, 1.1]; "
                         f"deviations {[round(x, 4) for x in devs]} tighten")


def test_criterion_7_modulation_roundtrip(spectral_pack):
    from bubbleflow.spectral import smooth_bump

    D = 5
    g = sim_grid(D)
    ep, zp = spectral_pack(D)
    ok = True
    for lam_star in (0.3, 1.0, 3.0):
        v = RadialField(g, eval_bubble(D, lam_star, g.nodes))
        st = fit_modulation(v, 1, BubbleConfig((1,), (1.25 * lam_star,)), ep, zp)
        ok &= st.converged and abs(st.config.scales[0] - lam_star) <= 1e-8 * lam_star

    b = smooth_bump(g.nodes, 0.8, 3.0)
    z1 = zp.rescaled(1.0, g.nodes)
    b -= (inner_product(g, z1, b) / inner_product(g, z1, z1)) * z1
    b /= enorm(RadialField(g, b))
    v = RadialField(g, np.asarray(eval_bubble(D, 1.0, g.nodes)) + 0.01 * b)
    st = fit_modulation(v, 1, BubbleConfig((1,), (1.0,)), ep, zp)
    vnorm = math.sqrt(float(np.sum(v.values**2 * g.volumes)))
    ok &= st.converged and abs(st.config.scales[0] - 1.0) <= 0.05
    ok &= np.max(np.abs(st.ortho_residuals)) <= 1e-10 * vnorm

    rng = np.random.default_rng(97)
    failures = 0
    for _ in range(100):
        lam_star = float(rng.uniform(0.3, 3.0))
        amp = float(rng.uniform(0.0, 0.02))
        center = float(rng.uniform(0.8, 3.0)) * lam_star
        pert = smooth_bump(g.nodes, 0.6 * center, 2.0 * center)
        # orthogonality-compatible, unit-energy-norm perturbation, as in the
        # construction the round-trip contract is stated for
        z_s = zp.rescaled(lam_star, g.nodes)
        pert -= (inner_product(g, z_s, pert) / inner_product(g, z_s, z_s)) * z_s
        pert = amp * pert / max(enorm(RadialField(g, pert)), 1e-300)
        v = RadialField(g, np.asarray(eval_bubble(D, lam_star, g.nodes)) + pert)
        st = fit_modulation(
            v, 1, BubbleConfig((1,), (lam_star * float(rng.uniform(0.8, 1.25)),)), ep, zp)
        vnorm = math.sqrt(float(np.sum(v.values**2 * g.volumes)))
        good = (st.converged
                and abs(st.config.scales[0] - lam_star) <= 0.05 * lam_star
                and np.max(np.abs(st.ortho_residuals)) <= 1e-10 * vnorm)
        failures += not good
    ok &= failures == 0
    assert report(7, ok, f"exact recovery 1e-8; perturbed within 0.05 and residuals "
                         f"1e-10; corpus failures {failures}/100")


def test_criterion_8_inequality_corpus():
    violations = 0
    checked = 0
    for D in (3, 5):
        g = sim_grid(D)
        delta = trapping_default_delta(D)
        for f in _random_compact_fields(g, 100, seed=1000 + D):
            # the 1e-30 floor keeps float dust (both sides ~ 1e-50 where the
            # field has decayed to nothing) from counting as a violation
            for R in (0.5, 2.0, 10.0):
                lhs, rhs = radial_sobolev_bound(f, R)
                violations += lhs > rhs * (1 + 1e-9) + 1e-30
                hl, hr = hardy_tail_constant_check(f, R)
                violations += hl > hr * (1 + 1e-9) + 1e-30
                checked += 2
            nrm = enorm(f)
            if nrm > 0:
                scaled = (0.8 * delta / nrm) * f
                cert = trapping_bound(scaled, 0.0)
                violations += not (cert.certified
                                   and cert.energy >= cert.constant * cert.enorm2 - 1e-12)
                checked += 1
    ok = violations == 0
    assert report(8, ok, f"{checked} inequality checks on 2x100 random fields, "
                         f"{violations} violations")


def test_criterion_9_phase_behavior():
    D = 5
    ok = True
    details = []
    for n in (1024, 2048):
        g = sim_grid(D, n)
        for a in (0.8, 0.9):
            u0 = RadialField(g, a * np.asarray(eval_bubble(D, 1.0, g.nodes)))
            cfg = SolverConfig(t_end=30.0, dt_init=1e-6, dt_max=0.5, err_tol=1e-6,
                               blowup_threshold=1e4, snapshot_dt=2.0)
            tl = analyze(evolve(u0, cfg), n_max=2)
            ok &= tl.classification == "dissipation"
            details.append(f"a={a}@{n}: {tl.classification}")
        for a in (1.2, 1.4):
            u0 = RadialField(g, a * np.asarray(eval_bubble(D, 1.0, g.nodes)))
            cfg = SolverConfig(t_end=10.0, dt_init=1e-6, dt_max=0.2, err_tol=1e-6,
                               blowup_threshold=1e4, snapshot_dt=0.25)
            traj = evolve(u0, cfg)
            tl = analyze(traj, n_max=2)
            ok &= tl.classification == "type_I_blowup"
            ok &= traj.t_plus_residual is not None and traj.t_plus_residual <= 0.1
            details.append(f"a={a}@{n}: {tl.classification} "
                           f"(fit resid {traj.t_plus_residual:.3f})")
    assert report(9, ok, "; ".join(details))


def test_criterion_10_determinism(tmp_path):
    from bubbleflow.cli import main

    spec = tmp_path / "sweep.json"
    spec.write_text(json.dumps({
        "dimension": 5, "grid_points": 512, "t_max": 0.5,
        "initial": "scaled-bubble", "axes": {"amplitude": [0.6, 1.0]},
    }))
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        assert main(["sweep", "--spec", str(spec), "--output-dir", str(out)]) == 0
        outs.append(out)
    identical = (outs[0] / "phase_table.csv").read_bytes() == \
        (outs[1] / "phase_table.csv").read_bytes()
    for cell in ("cell_0000", "cell_0001"):
        for name in ("trajectory.csv", "timeline.csv"):
            identical &= (outs[0] / cell / name).read_bytes() == \
                (outs[1] / cell / name).read_bytes()
    m1 = json.loads((outs[0] / "cell_0000" / "manifest.json").read_text())
    m2 = json.loads((outs[1] / "cell_0000" / "manifest.json").read_text())
    identical &= m1["config_hash"] == m2["config_hash"]
    assert report(10, identical, "two sweep reruns: byte-identical CSVs, equal hashes")
