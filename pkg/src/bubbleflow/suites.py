"""Named property suites behind the `check` subcommand.

Each suite runs a battery of inequality/identity checks at a configurable
dimension and returns per-check results; the CLI renders them as console
lines and a JUnit-style XML report.  These are the same properties the
pytest suite pins, packaged for standalone runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from xml.etree import ElementTree as ET

import numpy as np

from .bubbles import eval_bubble, eval_lambda_bubble
from .energies import (
    enorm,
    hardy_tail_constant_check,
    radial_sobolev_bound,
    trapping_bound,
    trapping_default_delta,
)
from .grids import BubbleConfig, RadialField, RadialGrid
from .modulation import (
    energy_expansion_check,
    fit_modulation,
    interaction_pairing,
    proximity_dM,
)
from .spectral import (
    build_z_profile,
    coercivity_form,
    default_spectral_pack,
    negative_eigenpair,
    spectrum_grid,
)

__all__ = ["SUITES", "CheckResult", "run_suite", "run_suites", "junit_xml"]


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_compact_fields(grid: RadialGrid, count: int, seed: int):
    """Smooth random bumps supported well inside the grid, resolution-aware."""
    rng = np.random.default_rng(seed)
    r = grid.nodes
    fields = []
    for _ in range(count):
        k = rng.integers(1, 4)
        vals = np.zeros(grid.n)
        for _ in range(k):
            center = float(rng.uniform(0.5, 0.05 * grid.r_max))
            width = float(rng.uniform(0.3, 1.0)) * center
            amp = float(rng.uniform(-1.0, 1.0))
            vals += amp * np.exp(-(((r - center) / width) ** 2))
        taper = np.exp(-((r / (0.2 * grid.r_max)) ** 8))
        fields.append(RadialField(grid, vals * taper))
    return fields


def _check_grid(D: int) -> RadialGrid:
    return RadialGrid.geometric(D, 1024, 2e4, 1.02)


def suite_sobolev(D: int, n_fields: int = 100, seed: int = 7):
    grid = _check_grid(D)
    out = []
    for i, f in enumerate(_random_compact_fields(grid, n_fields, seed)):
        ok = True
        worst = math.inf
        for R in (0.5, 1.0, 2.0, 5.0, 20.0):
            lhs, rhs = radial_sobolev_bound(f, R)
            slack = rhs - lhs
            worst = min(worst, slack)
            if lhs > rhs * (1 + 1e-9) + 1e-30:
                ok = False
        out.append((f"field_{i}", ok, f"min slack {worst:.3e}"))
    return out


def suite_hardy(D: int, n_fields: int = 100, seed: int = 11):
    grid = _check_grid(D)
    out = []
    for i, f in enumerate(_random_compact_fields(grid, n_fields, seed)):
        ok = True
        worst = math.inf
        for R in (0.25, 1.0, 4.0):
            lhs, rhs = hardy_tail_constant_check(f, R)
            worst = min(worst, rhs - lhs)
            if lhs > rhs * (1 + 1e-9) + 1e-30:
                ok = False
        out.append((f"field_{i}", ok, f"min slack {worst:.3e}"))
    return out


def suite_trapping(D: int, n_fields: int = 100, seed: int = 13):
    grid = _check_grid(D)
    delta = trapping_default_delta(D)
    out = []
    for i, f in enumerate(_random_compact_fields(grid, n_fields, seed)):
        nrm = enorm(f)
        if nrm == 0:
            continue
        scaled = (0.8 * delta / nrm) * f
        cert = trapping_bound(scaled, 0.0)
        ok = cert.certified and cert.energy >= cert.constant * cert.enorm2 - 1e-12
        out.append((f"field_{i}", ok,
                    f"E={cert.energy:.3e} C*n2={cert.constant * cert.enorm2:.3e}"))
    # a full bubble must fail the smallness gate, not the inequality
    W = RadialField(grid, eval_bubble(D, 1.0, grid.nodes))
    cert = trapping_bound(W, 0.0)
    out.append(("bubble_uncertified", not cert.certified, f"delta={cert.delta:.3f}"))
    return out


def suite_coercivity(D: int, n_fields: int = 50, seed: int = 17):
    from .manifests import load_constants

    grid = _check_grid(D)
    ep, zp = default_spectral_pack(D)
    c0 = load_constants(D).c0
    cfg = BubbleConfig((1,), (1.0,))
    out = []
    from .energies import inner_product

    z1 = zp.rescaled(1.0, grid.nodes)
    z_norm2 = inner_product(grid, z1, z1)
    for i, f in enumerate(_random_compact_fields(grid, n_fields, seed)):
        vals = f.values - (inner_product(grid, z1, f.values) / z_norm2) * z1
        g = RadialField(grid, vals)
        rep = coercivity_form(g, cfg, ep, zp, c0=c0)
        ok = rep.hypothesis_ok and rep.form >= rep.lower_bound - 1e-12
        out.append((f"field_{i}", ok, f"form={rep.form:.3e} bound={rep.lower_bound:.3e}"))
    return out


#: adjacent-ratio levels (lam_1/lam_2)^((D-2)/2) probed by the two-bubble
#: estimate suites; the separation eps = level^(2/(D-2)) adapts per dimension
_RATIO_LEVELS = (10**-2.5, 10**-3.25, 10**-4.0)


def suite_energy_expansion(D: int, **_):
    out = []
    thetas = []
    for level in _RATIO_LEVELS:
        eps = level ** (2.0 / (D - 2))
        cfg = BubbleConfig((1, 1), (eps, 1.0))
        lhs, lead, rsum = energy_expansion_check(D, cfg)
        rel = abs(lhs + lead) / abs(lead)
        thetas.append(rel)
        out.append((f"level_{level:.3g}", rel <= 0.25,
                    f"eps={eps:.3e}, defect/|leading| = {rel:.4f}"))
    dec = all(a > b for a, b in zip(thetas[:-1], thetas[1:]))
    out.append(("defect_decreasing", dec, f"{[round(x, 4) for x in thetas]}"))
    return out


def suite_interaction(D: int, **_):
    out = []
    devs = []
    for level in _RATIO_LEVELS:
        eps = level ** (2.0 / (D - 2))
        cfg = BubbleConfig((1, 1), (eps, 1.0))
        pairing, lead = interaction_pairing(D, cfg, 2)
        ratio = pairing / lead
        devs.append(abs(ratio - 1.0))
        out.append((f"level_{level:.3g}", 0.8 <= ratio <= 1.2,
                    f"eps={eps:.3e}, pairing/leading = {ratio:.4f}"))
    out.append(("tightening", all(a > b for a, b in zip(devs[:-1], devs[1:])),
                f"deviations {[round(x, 4) for x in devs]}"))
    single, lead = interaction_pairing(D, BubbleConfig((1,), (1.0,)), 1)
    out.append(("single_bubble_zero", single == 0.0 and lead == 0.0, "f_i vanishes for M=1"))
    return out


def suite_modulation(D: int, n_fields: int = 20, seed: int = 23):
    grid = _check_grid(D)
    ep, zp = default_spectral_pack(D)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_fields):
        lam_star = float(rng.uniform(0.3, 3.0))
        v = RadialField(grid, eval_bubble(D, lam_star, grid.nodes))
        st = fit_modulation(v, 1, BubbleConfig((1,), (lam_star * 1.3,)), ep, zp)
        ok = st.converged and abs(st.config.scales[0] - lam_star) <= 1e-8 * lam_star
        out.append((f"roundtrip_{i}", ok,
                    f"lam*={lam_star:.4f} err={abs(st.config.scales[0] - lam_star):.2e}"))
    v = RadialField(grid, eval_bubble(D, 1.0, grid.nodes))
    rep = proximity_dM(v, 1)
    out.append(("dM_bubble_zero", rep.value <= 1e-6, f"dM(W,1) = {rep.value:.2e}"))
    return out


def suite_spectral(D: int, **_):
    out = []
    grid = spectrum_grid(D, n=2**16)
    ep = negative_eigenpair(D, grid)
    out.append(("unique_negative", True, f"kappa2 = {ep.kappa2:.8f}"))
    zp = build_z_profile(D, ep)
    from .energies import inner_product

    resid = inner_product(grid, zp(grid.nodes), ep.values)
    out.append(("z_orthogonal", abs(resid) <= 1e-10, f"<Z|Y> = {resid:.2e}"))
    lw = np.asarray(eval_lambda_bubble(D, grid.nodes))
    pair = inner_product(grid, zp(grid.nodes), lw)
    out.append(("z_pairs_kernel", pair > 0, f"<Z|LW> = {pair:.4f}"))
    return out


SUITES = {
    "sobolev": suite_sobolev,
    "hardy": suite_hardy,
    "trapping": suite_trapping,
    "coercivity": suite_coercivity,
    "energy_expansion": suite_energy_expansion,
    "interaction": suite_interaction,
    "modulation": suite_modulation,
    "spectral": suite_spectral,
}


def run_suite(name: str, D: int) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(name)
    t0 = time.time()
    rows = SUITES[name](D)
    dt = time.time() - t0
    per = dt / max(len(rows), 1)
    return [CheckResult(name, rname, ok, detail, per) for rname, ok, detail in rows]


def run_suites(names, D: int) -> list[CheckResult]:
    results = []
    for name in names:
        results.extend(run_suite(name, D))
    return results


def junit_xml(results: list[CheckResult]) -> str:
    root = ET.Element("testsuites")
    by_suite: dict[str, list[CheckResult]] = {}
    for res in results:
        by_suite.setdefault(res.suite, []).append(res)
    for suite, rows in by_suite.items():
        el = ET.SubElement(
            root,
            "testsuite",
            name=suite,
            tests=str(len(rows)),
            failures=str(sum(not r.passed for r in rows)),
        )
        for r in rows:
            case = ET.SubElement(el, "testcase", name=r.name, time=f"{r.seconds:.3f}")
            if not r.passed:
                fail = ET.SubElement(case, "failure", message=r.detail)
                fail.text = r.detail
    return ET.tostring(root, encoding="unicode")
