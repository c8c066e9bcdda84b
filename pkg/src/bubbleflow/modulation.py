"""Proximity functions, modulation fits, and the static interaction estimates.

The proximity value d_M(v) is the infimum over signs and ordered scales of

    ( ||v - W(signs, scales)||_E^2 + sum_j (lam_j / lam_{j+1})^((D-2)/2) )^(1/2),

a nonconvex objective; we approximate it by exhaustive signs times
multi-start cyclic descent in log-scales, seeded at local maxima of
r^((D-2)/2) |v(r)|.  Reported values are upper bounds on the infimum within
the optimizer tolerance, and every report reproduces its own objective
exactly on re-evaluation.

The modulation fit imposes the orthogonality <Z_lam_j | g> = 0 by Newton
iteration with the analytic Jacobian d W_lam / d lam = -(LW)_lam(mass),
and extracts the unstable components a_j = (kappa/lam_j) <Y_lam_j | g>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import minimize_scalar

from .bubbles import (
    bubble_energy,
    eval_bubble,
    eval_bubble_deriv,
    eval_lambda_bubble,
    f_nonlin,
    multi_bubble_values,
)
from .energies import enorm2, inner_product
from .grids import BubbleConfig, RadialField
from .spectral import Eigenpair, ZProfile

__all__ = [
    "ProximityReport",
    "proximity_objective",
    "proximity_dM",
    "proximity_deltaR",
    "proximity_dK",
    "detect_bubble_scales",
    "ModulationState",
    "fit_modulation",
    "energy_expansion_coefficient",
    "energy_expansion_check",
    "interaction_coefficient",
    "interaction_pairing",
    "RateCheckReport",
    "lambda_dot_bound_check",
    "multi_bubble_energy_quadrature",
]


# -- proximity functions -----------------------------------------------------


@dataclass(frozen=True)
class ProximityReport:
    """Outcome of a proximity minimization.

    value is sqrt(misfit2 + ratio_sum); the stored config re-evaluates to
    the same objective through proximity_objective (soundness invariant).
    conventions records the window and any boundary scales substituted into
    the ratio chain.
    """

    value: float
    config: BubbleConfig
    window: tuple[float, float]
    misfit2: float
    ratio_sum: float
    conventions: dict

    def value_squared(self) -> float:
        return self.misfit2 + self.ratio_sum

    def to_dict(self) -> dict:
        w = [None if math.isinf(x) else float(x) for x in self.window]
        return {
            "schema": "bubbleflow.proximity/1",
            "value": float(self.value),
            "config": self.config.to_dict(),
            "window": w,
            "misfit2": float(self.misfit2),
            "ratio_sum": float(self.ratio_sum),
            "conventions": self.conventions,
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), sort_keys=True)


def _ratio_chain(D, scales, lam_prev=None, lam_next=None) -> float:
    """Sum of (lam_j/lam_{j+1})^((D-2)/2) over the chain, with optional
    boundary scales prepended/appended (lam_prev = 0 contributes nothing)."""
    lam = list(scales)
    if lam_prev is not None:
        lam = [float(lam_prev)] + lam
    if lam_next is not None:
        lam = lam + [float(lam_next)]
    total = 0.0
    for a, b in zip(lam[:-1], lam[1:]):
        if a > 0:
            total += (a / b) ** ((D - 2) / 2.0)
    return total


def proximity_objective(
    v: RadialField,
    config: BubbleConfig,
    window: tuple[float, float] = (0.0, math.inf),
    lam_prev: float | None = None,
    lam_next: float | None = None,
    reference: RadialField | None = None,
) -> tuple[float, float]:
    """(misfit2, ratio_sum) of a configuration against a field.

    reference, when given, is subtracted from v before the norm (the
    radiation background of the windowed proximity).
    """
    D = v.dimension
    vals = v.values
    if reference is not None:
        vals = vals - reference.values
    w = multi_bubble_values(D, config, v.grid.nodes)
    diff = RadialField(v.grid, vals - w)
    misfit2 = enorm2(diff, window[0], window[1])
    return misfit2, _ratio_chain(D, config.scales, lam_prev, lam_next)


def detect_bubble_scales(v: RadialField, max_peaks: int = 6) -> list[tuple[float, int]]:
    """Candidate (scale, sign) pairs from local maxima of r^((D-2)/2)|v|.

    A bubble at scale lam peaks this profile at r = lam sqrt(D(D-2)).
    Returns peaks sorted by decreasing prominence.
    """
    D = v.dimension
    r = v.grid.nodes
    m = r ** ((D - 2) / 2.0) * np.abs(v.values)
    if np.all(m == 0):
        return []
    idx = np.nonzero((m[1:-1] >= m[:-2]) & (m[1:-1] > m[2:]) & (m[1:-1] > 0.05 * m.max()))[0] + 1
    order = np.argsort(m[idx])[::-1]
    core = math.sqrt(D * (D - 2.0))
    out = []
    for i in idx[order][:max_peaks]:
        lam = r[i] / core
        sign = 1 if v.values[i] >= 0 else -1
        out.append((float(lam), int(sign)))
    return out


def _descend_scales(
    v, signs, scales0, window, lam_prev, lam_next, reference, bounds, sweeps=40, xtol=1e-10
):
    """Cyclic Brent descent in log-scales, order kept by neighbor bounds."""
    x = np.log(np.asarray(scales0, dtype=float))
    x.sort()
    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    sep = 1e-3

    def obj_from_logs(xs):
        try:
            cfg = BubbleConfig(tuple(signs), tuple(np.exp(np.sort(xs))))
        except ValueError:
            return math.inf, None
        m2, rs = proximity_objective(v, cfg, window, lam_prev, lam_next, reference)
        return m2 + rs, cfg

    best, _ = obj_from_logs(x)
    for _ in range(sweeps):
        improved = False
        for j in range(x.size):
            a = lo if j == 0 else x[j - 1] + sep
            b = hi if j == x.size - 1 else x[j + 1] - sep
            if b <= a:
                continue

            def line(xi, j=j):
                trial = x.copy()
                trial[j] = xi
                return obj_from_logs(trial)[0]

            res = minimize_scalar(line, bounds=(a, b), method="bounded",
                                  options={"xatol": xtol})
            if res.fun < best - 1e-15 * (1.0 + abs(best)):
                best = res.fun
                x[j] = res.x
                improved = True
        if not improved:
            break
    val, cfg = obj_from_logs(x)
    return val, cfg


def _coarse_lattice_starts(v, signs, window, lam_prev, lam_next, reference, bounds, M):
    """Best points of a small log-lattice scan; keeps the descent a strict
    refinement of a coarse exhaustive search on multimodal landscapes."""
    import itertools

    n_pts = {1: 48, 2: 12, 3: 7}.get(M, 5)
    lattice = np.geomspace(1.5 * bounds[0], 0.75 * bounds[1], n_pts)
    scored = []
    for lams in itertools.combinations(lattice, M):
        try:
            cfg = BubbleConfig(signs, tuple(lams))
        except ValueError:
            continue
        m2, rs = proximity_objective(v, cfg, window, lam_prev, lam_next, reference)
        scored.append((m2 + rs, lams))
    scored.sort(key=lambda kv: kv[0])
    return [list(lams) for _, lams in scored[:2]]


def _polish_single_scale(v, sign, window, lam_prev, lam_next, reference, bounds):
    """M = 1 search: dense log scan, then Brent confined to the best basins."""
    lams = np.geomspace(1.5 * bounds[0], 0.75 * bounds[1], 400)
    vals = np.empty(lams.size)
    for i, lam in enumerate(lams):
        m2, rs = proximity_objective(
            v, BubbleConfig((sign,), (lam,)), window, lam_prev, lam_next, reference
        )
        vals[i] = m2 + rs
    order = np.argsort(vals)[:3]
    best_val, best_lam = math.inf, lams[order[0]]

    def line(x):
        m2, rs = proximity_objective(
            v, BubbleConfig((sign,), (math.exp(x),)), window, lam_prev, lam_next, reference
        )
        return m2 + rs

    for i in order:
        a = math.log(lams[max(i - 1, 0)])
        b = math.log(lams[min(i + 1, lams.size - 1)])
        if b <= a:
            continue
        res = minimize_scalar(line, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-11})
        if res.fun < best_val:
            best_val, best_lam = res.fun, math.exp(res.x)
    return best_val, BubbleConfig((sign,), (best_lam,))


def _minimize_over_signs(
    v, M, window, lam_prev, lam_next, reference, bounds, starts
) -> tuple[float, BubbleConfig]:
    import itertools

    best_val, best_cfg = math.inf, BubbleConfig()
    for signs in itertools.product((1, -1), repeat=M):
        if M == 1:
            val, cfg = _polish_single_scale(
                v, signs[0], window, lam_prev, lam_next, reference, bounds
            )
            if val < best_val:
                best_val, best_cfg = val, cfg
            continue
        lattice = _coarse_lattice_starts(
            v, signs, window, lam_prev, lam_next, reference, bounds, M
        )
        for s0 in list(starts) + lattice:
            val, cfg = _descend_scales(
                v, signs, s0, window, lam_prev, lam_next, reference, bounds
            )
            if cfg is not None and val < best_val:
                best_val, best_cfg = val, cfg
    return best_val, best_cfg


def _scale_starts(v: RadialField, M: int, bounds) -> list[list[float]]:
    """Multi-start seeds: detected peaks, their half/double, geometric fill."""
    peaks = detect_bubble_scales(v)
    lams = [p[0] for p in peaks][:M]
    lams.sort()
    lo, hi = bounds
    while len(lams) < M:
        lams.insert(0, max(lams[0] / 10.0 if lams else 1.0, 2.0 * lo))
    g = float(np.exp(np.mean(np.log(lams)))) if lams else 1.0
    starts = [lams]
    starts.append([x * 0.5 for x in lams])
    starts.append([x * 2.0 for x in lams])
    starts.append(list(g * np.logspace(-0.5 * (M - 1), 0.5 * (M - 1), M)))
    cleaned = []
    for s in starts:
        s = np.clip(np.sort(np.asarray(s, dtype=float)), 1.5 * lo, 0.75 * hi)
        for k in range(1, M):
            s[k] = max(s[k], s[k - 1] * 1.01)
        cleaned.append(list(np.minimum(s, 0.75 * hi)))
    return cleaned


def _grid_scale_bounds(v: RadialField) -> tuple[float, float]:
    e1 = float(v.grid.edges[1])
    return max(e1, 1e-12), v.grid.r_max


def proximity_dM(v: RadialField, M: int) -> ProximityReport:
    """Full-line proximity to the M-bubble family (no boundary conventions)."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    window = (0.0, math.inf)
    if M == 0:
        m2 = enorm2(v)
        return ProximityReport(math.sqrt(m2), BubbleConfig(), window, m2, 0.0, {})
    bounds = _grid_scale_bounds(v)
    starts = _scale_starts(v, M, bounds)
    _, cfg = _minimize_over_signs(v, M, window, None, None, None, bounds, starts)
    m2, rs = proximity_objective(v, cfg, window)
    return ProximityReport(math.sqrt(m2 + rs), cfg, window, m2, rs, {})


def proximity_deltaR(v: RadialField, R: float, max_bubbles: int = 4) -> ProximityReport:
    """Windowed proximity on (0, R] with the boundary convention lam_{M+1} = R.

    Minimizes over the bubble count as well, increasing M until the value
    stops improving; ties within 1% resolve to the smallest M.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    window = (0.0, float(R))
    reports = []
    m2 = enorm2(v, 0.0, R)
    reports.append(ProximityReport(math.sqrt(m2), BubbleConfig(), window, m2, 0.0,
                                   {"lambda_next": R}))
    bounds = (_grid_scale_bounds(v)[0], float(R))
    for M in range(1, max_bubbles + 1):
        starts = _scale_starts(v, M, bounds)
        _, cfg = _minimize_over_signs(v, M, window, None, R, None, bounds, starts)
        m2, rs = proximity_objective(v, cfg, window, lam_next=R)
        reports.append(ProximityReport(math.sqrt(m2 + rs), cfg, window, m2, rs,
                                       {"lambda_next": R}))
        if reports[-1].value > reports[-2].value:
            break
    best = min(rep.value for rep in reports)
    for rep in reports:  # smallest M within 1% of the best value
        if rep.value <= 1.01 * best:
            return rep
    return reports[-1]


def proximity_dK(
    v: RadialField,
    u_star: RadialField | None,
    rho: float,
    N: int,
    K: int,
    t: float,
) -> ProximityReport:
    """Localized proximity with N-K free exterior bubbles.

    Minimizes || v - u_star - W ||_E(rho, inf)^2 plus the ratio chain
    anchored by lam_K = rho and lam_{N+1} = sqrt(t); pass t as the time to
    the relevant horizon (t itself for global flows, T_plus - t near
    blow-up).  K = N leaves no free parameters.
    """
    if not 0 <= K <= N:
        raise ValueError("need 0 <= K <= N")
    if rho < 0 or (K >= 1 and rho == 0):
        raise ValueError("rho must be positive for K >= 1")
    if t <= 0:
        raise ValueError("t must be positive")
    lam_next = math.sqrt(t)
    window = (float(rho), math.inf)
    m = N - K
    lam_prev = rho if rho > 0 else None
    conventions = {"lambda_K": rho, "lambda_next": lam_next, "N": N, "K": K}
    if m == 0:
        # empty infimum: the expression is evaluated, not minimized; the
        # ratio chain collapses to the single boundary term (rho/sqrt(t))
        m2, rs = proximity_objective(v, BubbleConfig(), window, lam_prev, lam_next, u_star)
        return ProximityReport(math.sqrt(m2 + rs), BubbleConfig(), window, m2, rs, conventions)
    bounds = (max(rho, _grid_scale_bounds(v)[0]), max(lam_next, v.grid.r_max))
    base = v if u_star is None else RadialField(v.grid, v.values)
    starts = _scale_starts(
        RadialField(v.grid, v.values - (0 if u_star is None else u_star.values)), m, bounds
    )
    _, cfg = _minimize_over_signs(base, m, window, lam_prev, lam_next, u_star, bounds, starts)
    m2, rs = proximity_objective(base, cfg, window, lam_prev, lam_next, u_star)
    return ProximityReport(math.sqrt(m2 + rs), cfg, window, m2, rs, conventions)


# -- orthogonality-constrained modulation fit --------------------------------


@dataclass(frozen=True)
class ModulationState:
    """Fitted decomposition v = W(signs, scales) + g with <Z_lam_j|g> = 0."""

    config: BubbleConfig
    remainder: RadialField
    a_minus: np.ndarray
    ortho_residuals: np.ndarray
    iterations: int
    converged: bool
    gnorm_e: float
    ratio_sum: float
    message: str = ""

    @property
    def norm_plus_ratio(self) -> float:
        """||g||_E^2 + ratio chain, the two-sided proxy for d_M(v)^2."""
        return self.gnorm_e**2 + self.ratio_sum

    def d_proxy(self) -> float:
        return math.sqrt(self.norm_plus_ratio)

    def to_dict(self, include_remainder: bool = True) -> dict:
        out = {
            "schema": "bubbleflow.modulation-state/1",
            "config": self.config.to_dict(),
            "a_minus": [float(a) for a in self.a_minus],
            "ortho_residuals": [float(x) for x in self.ortho_residuals],
            "iterations": self.iterations,
            "converged": self.converged,
            "gnorm_e": float(self.gnorm_e),
            "ratio_sum": float(self.ratio_sum),
            "message": self.message,
        }
        if include_remainder:
            out["grid"] = self.remainder.grid.descriptor()
            out["remainder"] = [float(x) for x in self.remainder.values]
        return out

    def to_json(self, include_remainder: bool = True) -> str:
        import json

        return json.dumps(self.to_dict(include_remainder), sort_keys=True)


def fit_modulation(
    v: RadialField,
    M: int,
    initial: BubbleConfig,
    eigenpair: Eigenpair,
    zprofile: ZProfile,
    max_iter: int = 50,
    tol: float = 1e-11,
) -> ModulationState:
    """Newton solve of the orthogonality system F_j = <Z_lam_j | v - W> = 0.

    Signs are frozen from the initial config; scales iterate in log-space
    with the analytic Jacobian and a backtracking line search.  The
    orthogonality system admits spurious roots at finite distance from the
    bubble family, so the iteration is also seeded from the detected peak
    scales of v and the converged root with the smallest
    ||g||_E^2 + ratio-chain is returned (the small-remainder root is the
    meaningful decomposition near the bubble family).  Non-convergence after max_iter, an
    invalid scale ordering, or a singular Jacobian yield a non-converged
    state (message carries the condition number when relevant).
    """
    if initial.M != M:
        raise ValueError("initial config must carry M scales")
    grid = v.grid
    D = grid.dimension
    if M == 0:
        g = RadialField(grid, v.values)
        return ModulationState(BubbleConfig(), g, np.zeros(0), np.zeros(0), 0, True,
                               math.sqrt(enorm2(g)), 0.0)
    seeds = [tuple(initial.scales)]
    peaks = sorted(lam for lam, _ in detect_bubble_scales(v)[:M])
    if len(peaks) == M and all(
        not np.allclose(peaks, s, rtol=1e-3) for s in seeds
    ) and all(a < b for a, b in zip(peaks[:-1], peaks[1:])):
        seeds.append(tuple(peaks))
    states = [
        _newton_fit(v, initial.signs, s, eigenpair, zprofile, max_iter, tol) for s in seeds
    ]
    converged = [st for st in states if st.converged]
    if converged:
        return min(converged, key=lambda st: st.norm_plus_ratio)
    return states[0]


def _newton_fit(v, signs, scales0, eigenpair, zprofile, max_iter, tol) -> ModulationState:
    grid = v.grid
    D = grid.dimension
    r = grid.nodes
    M = len(signs)
    x = np.log(np.asarray(scales0, dtype=float))
    zl2 = math.sqrt(inner_product(grid, zprofile(r), zprofile(r)))
    vl2 = math.sqrt(float(np.sum(v.values**2 * grid.volumes)))
    fscale = zl2 * max(vl2, 1e-12)

    def residuals(logs):
        lam = np.exp(logs)
        if np.any(np.diff(lam) <= 0):
            return lam, None, None
        w = multi_bubble_values(D, BubbleConfig(signs, tuple(lam)), r)
        gvals = v.values - w
        F = np.array([inner_product(grid, zprofile.rescaled(l, r), gvals) for l in lam])
        return lam, gvals, F

    message = ""
    converged = False
    it = 0
    lam, gvals, F = residuals(x)
    if F is None:
        message = "initial scales not increasing"
    for it in range(1, max_iter + 1):
        if message:
            break
        if np.max(np.abs(F)) <= tol * fscale:
            converged = True
            break
        J = np.empty((M, M))
        for j, lj in enumerate(lam):
            z_j = zprofile.rescaled(lj, r)
            for k, lk in enumerate(lam):
                lw_k = lk ** (-D / 2.0) * np.asarray(eval_lambda_bubble(D, r / lk))
                J[j, k] = lk * signs[k] * inner_product(grid, z_j, lw_k)
            gen_z = lj ** (-D / 2.0) * zprofile.scaling_generator(r / lj)
            J[j, j] += -inner_product(grid, gen_z, gvals)
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > 1e13:
            message = f"singular Jacobian (cond = {cond:.3e})"
            break
        dx = np.clip(np.linalg.solve(J, -F), -0.5, 0.5)
        # backtrack on ||F|| so the iteration cannot hop to a spurious root
        fnorm = float(np.linalg.norm(F))
        step = 1.0
        while step >= 1.0 / 256:
            lam_n, g_n, F_n = residuals(x + step * dx)
            if F_n is not None and np.linalg.norm(F_n) <= (1.0 - 1e-4 * step) * fnorm:
                x = x + step * dx
                lam, gvals, F = lam_n, g_n, F_n
                break
            step *= 0.5
        else:
            message = "line search stalled"
            break
    else:
        message = f"no convergence in {max_iter} iterations"

    lam = np.exp(x)
    ok_order = bool(np.all(np.diff(lam) > 0))
    if not ok_order:
        lam = np.asarray(scales0, dtype=float)
        converged = False
        if not message:
            message = "scale ordering collapsed"
    cfg = BubbleConfig(signs, tuple(lam))
    w = multi_bubble_values(D, cfg, r)
    g = RadialField(grid, v.values - w)
    resid = np.array([inner_product(grid, zprofile.rescaled(l, r), g.values) for l in lam])
    kappa = eigenpair.kappa
    a_minus = np.array([
        (kappa / l) * inner_product(grid, eigenpair.rescaled(l, r, invariant="l2"), g.values)
        for l in lam
    ])
    return ModulationState(
        config=cfg,
        remainder=g,
        a_minus=a_minus,
        ortho_residuals=resid,
        iterations=it,
        converged=converged and not message,
        gnorm_e=math.sqrt(enorm2(g)),
        ratio_sum=_ratio_chain(D, cfg.scales),
        message=message,
    )


# -- static expansion evaluators (adaptive quadrature on closed forms) -------


def _quad_scales(D: int, config: BubbleConfig, integrand) -> float:
    """Integrate integrand(r) r^(D-1)-free over (0, inf), splitting at the
    bubble cores so adaptive quadrature resolves every scale."""
    core = math.sqrt(D * (D - 2.0))
    pts = sorted({lam * core for lam in config.scales} | {lam for lam in config.scales})
    cuts = [0.0]
    for s in pts:
        cuts.extend((0.1 * s, s, 10.0 * s))
    cuts = sorted(set(c for c in cuts if c >= 0.0))
    top = max(cuts[-1] * 10.0, 1e3)
    total = 0.0
    segments = list(zip(cuts[:-1], cuts[1:])) + [(cuts[-1], top), (top, np.inf)]
    for a, b in segments:
        if b <= a:
            continue
        part, _ = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-11, limit=400)
        total += part
    return total


def multi_bubble_energy_quadrature(D: int, config: BubbleConfig) -> float:
    """E(W(signs, scales)) by adaptive quadrature of the closed form."""
    p1 = 2.0 * D / (D - 2)

    def dens(r):
        du = multi_bubble_deriv(r)
        u = multi_bubble_values(D, config, np.asarray([r]))[0]
        return (0.5 * du**2 - (D - 2) / (2.0 * D) * abs(u) ** p1) * r ** (D - 1)

    def multi_bubble_deriv(r):
        return sum(
            iota * eval_bubble_deriv(D, lam, r) for iota, lam in zip(config.signs, config.scales)
        )

    if config.M == 0:
        return 0.0
    return _quad_scales(D, config, dens)


def energy_expansion_coefficient(D: int) -> float:
    """(D(D-2))^(D/2) / D, the cross-term constant of the energy expansion."""
    return (D * (D - 2.0)) ** (D / 2.0) / D


def energy_expansion_check(D: int, config: BubbleConfig) -> tuple[float, float, float]:
    """Evaluate the multi-bubble energy expansion.

    Returns (lhs, leading, ratio_sum) with lhs = E(W) - M E(W_single) and
    leading = coeff * sum_j iota_j iota_{j+1} (lam_j/lam_{j+1})^((D-2)/2);
    the expansion predicts lhs = -leading up to theta * ratio_sum with
    theta -> 0 as the scale ratios separate.
    """
    lhs = multi_bubble_energy_quadrature(D, config) - config.M * bubble_energy(D)
    coeff = energy_expansion_coefficient(D)
    ratios = config.ratio_terms(D)
    signs = config.signs
    leading = coeff * sum(
        signs[j] * signs[j + 1] * ratios[j] for j in range(config.M - 1)
    )
    return float(lhs), float(leading), float(np.sum(ratios))


def interaction_coefficient(D: int) -> float:
    """((D-2)/(2D)) (D(D-2))^(D/2), the leading constant of the pairing expansion."""
    return (D - 2.0) / (2.0 * D) * (D * (D - 2.0)) ** (D / 2.0)


def interaction_pairing(D: int, config: BubbleConfig, j: int) -> tuple[float, float]:
    """Pairing <LW_lam_j | f_i> against its two-ratio leading term.

    f_i is the nonlinear interaction f(W) - sum_k iota_k f(W_lam_k); j is
    1-based.  The leading term uses the conventions lam_0 = 0,
    lam_{M+1} = inf, so single bubbles pair to zero exactly.
    """
    if not 1 <= j <= config.M:
        raise ValueError("bubble index out of range")
    lam_j = config.scales[j - 1]

    def integrand(r):
        w = multi_bubble_values(D, config, np.asarray([r]))[0]
        fi = f_nonlin(D, w) - sum(
            iota * f_nonlin(D, eval_bubble(D, lam, r))
            for iota, lam in zip(config.signs, config.scales)
        )
        lw = lam_j ** (-(D - 2) / 2.0) * eval_lambda_bubble(D, r / lam_j)
        return lw * fi * r ** (D - 1)

    pairing = _quad_scales(D, config, integrand) if config.M > 1 else 0.0
    coeff = interaction_coefficient(D)
    expo = (D - 2) / 2.0
    lead = 0.0
    if j - 2 >= 0:
        lead += config.signs[j - 2] * coeff * (config.scales[j - 2] / lam_j) ** expo
    if j <= config.M - 1:
        lead -= config.signs[j] * coeff * (lam_j / config.scales[j]) ** expo
    return float(pairing), float(lead)


# -- dynamical rate checks ----------------------------------------------------


@dataclass(frozen=True)
class RateCheckReport:
    """Effective constants for the modulation rate bounds between two states.

    c_lambda[j] = |dlam_j/dt| lam_j / d and c_aminus[j] = |da_j/dt| lam_j^2 / d^2,
    evaluated with d = max of the two states' proximity proxies.  The a-minus
    bound is meaningful for D >= 6 (aminus_applicable).
    """

    dt: float
    d_value: float
    c_lambda: np.ndarray
    c_aminus: np.ndarray
    aminus_applicable: bool


def lambda_dot_bound_check(
    prev: ModulationState,
    curr: ModulationState,
    dt: float,
    d_value: float | None = None,
) -> RateCheckReport:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if prev.config.M != curr.config.M:
        raise ValueError("states carry different bubble counts")
    D = prev.remainder.dimension
    d = d_value if d_value is not None else max(prev.d_proxy(), curr.d_proxy())
    d = max(d, 1e-150)  # keeps d^2 away from underflow for exact fits
    lam0 = np.asarray(prev.config.scales)
    lam1 = np.asarray(curr.config.scales)
    lam_dot = (lam1 - lam0) / dt
    lam_mid = 0.5 * (lam0 + lam1)
    c_lam = np.abs(lam_dot) * lam_mid / d
    a_dot = (curr.a_minus - prev.a_minus) / dt
    c_am = np.abs(a_dot) * lam_mid**2 / d**2
    return RateCheckReport(dt, float(d), c_lam, c_am, aminus_applicable=D >= 6)
