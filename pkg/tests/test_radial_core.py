"""Grids, the bubble family, energies, and the static inequalities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bubbleflow.bubbles import (
    bubble_energy,
    bubble_enorm,
    eval_bubble,
    eval_bubble_deriv,
    eval_lambda_bubble,
    lambda_bubble_root,
    multi_bubble,
)
from bubbleflow.energies import (
    energy,
    enorm,
    enorm2,
    grad2,
    hardy_tail_constant_check,
    inner_product,
    local_energy,
    radial_sobolev_bound,
    tension,
    trapping_bound,
    trapping_constant,
    trapping_default_delta,
)
from bubbleflow.grids import (
    BubbleConfig,
    RadialField,
    RadialGrid,
    load_field_csv,
    save_field_csv,
)


# -- grids -------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    D=st.integers(3, 7),
    n=st.integers(4, 400),
    r_max=st.floats(0.5, 1e5),
    ratio=st.one_of(st.none(), st.floats(1.001, 1.3)),
)
def test_cell_volumes_sum_to_ball_volume(D, n, r_max, ratio):
    if ratio is None:
        g = RadialGrid.uniform(D, n, r_max)
    else:
        g = RadialGrid.geometric(D, n, r_max, ratio)
    assert g.nodes[0] > 0
    assert np.all(np.diff(g.nodes) > 0)
    total = r_max**D / D
    assert abs(g.volumes.sum() - total) <= 1e-12 * total


def test_grid_descriptor_roundtrip():
    g = RadialGrid.geometric(5, 128, 100.0, 1.05)
    g2 = RadialGrid.from_descriptor(g.descriptor())
    assert np.allclose(g.edges, g2.edges, rtol=0, atol=0)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        RadialGrid.uniform(2, 16, 1.0)
    with pytest.raises(ValueError):
        RadialGrid.geometric(3, 16, 1.0, 0.9)


def test_field_requires_finite_values():
    g = RadialGrid.uniform(3, 16, 1.0)
    vals = np.zeros(16)
    vals[3] = np.nan
    with pytest.raises(ValueError):
        RadialField(g, vals)
    RadialField(g, vals, blown_up=True)  # flagged fields may carry NaN


def test_field_csv_roundtrip(tmp_path):
    g = RadialGrid.geometric(4, 64, 50.0, 1.08)
    f = RadialField(g, eval_bubble(4, 1.0, g.nodes), tag="exact-bubble")
    path = tmp_path / "field.csv"
    save_field_csv(path, f, extra={"t": 0.5})
    f2, header = load_field_csv(path)
    assert header["t"] == 0.5
    assert np.array_equal(f.values, f2.values)
    assert f2.grid.descriptor() == g.descriptor()


# -- bubble family -----------------------------------------------------------


def test_bubble_reference_values():
    assert eval_bubble(3, 1.0, 0.0) == 1.0
    assert abs(eval_bubble(3, 1.0, math.sqrt(3.0)) - 1 / math.sqrt(2)) < 1e-14
    assert abs(eval_bubble(5, 2.0, 0.0) - 2.0**-1.5) < 1e-15


def test_bubble_domain_errors():
    with pytest.raises(ValueError):
        eval_bubble(2, 1.0, 1.0)
    with pytest.raises(ValueError):
        eval_bubble(3, 0.0, 1.0)
    with pytest.raises(ValueError):
        eval_lambda_bubble(2, 1.0)


@settings(max_examples=60, deadline=None)
@given(D=st.integers(3, 8), lam=st.floats(0.1, 10.0), r=st.floats(0.0, 50.0))
def test_bubble_positive_and_scaling_consistent(D, lam, r):
    val = eval_bubble(D, lam, r)
    assert val > 0
    expected = lam ** (-(D - 2) / 2.0) * eval_bubble(D, 1.0, r / lam)
    assert abs(val - expected) <= 1e-12 * abs(expected)


def test_bubble_deriv_matches_finite_differences():
    r = np.linspace(0.1, 20, 57)
    eps = 1e-6
    for D, lam in ((3, 1.0), (5, 0.3), (6, 2.0)):
        fd = (eval_bubble(D, lam, r + eps) - eval_bubble(D, lam, r - eps)) / (2 * eps)
        assert np.allclose(eval_bubble_deriv(D, lam, r), fd, rtol=1e-8, atol=1e-10)


def test_lambda_bubble_closed_form_is_the_generator():
    # (r d/dr + (D-2)/2) W by finite differences pins the closed form; the
    # origin value is (D-2)/2 and the unique root sits at sqrt(D(D-2))
    eps = 1e-6
    for D in (3, 4, 5, 6):
        r = np.linspace(0.05, 3 * lambda_bubble_root(D), 211)
        fd = r * (eval_bubble(D, 1, r + eps) - eval_bubble(D, 1, r - eps)) / (2 * eps) + (
            D - 2
        ) / 2.0 * np.asarray(eval_bubble(D, 1, r))
        assert np.allclose(eval_lambda_bubble(D, r), fd, rtol=1e-7, atol=1e-9)
        assert abs(eval_lambda_bubble(D, 0.0) - (D - 2) / 2.0) < 1e-14
        root = lambda_bubble_root(D)
        assert abs(eval_lambda_bubble(D, root)) < 1e-14
        vals = np.asarray(eval_lambda_bubble(D, r))
        assert np.count_nonzero(np.sign(vals[:-1]) != np.sign(vals[1:])) == 1


def test_lambda_bubble_value_d4():
    # frozen from the finite-difference oracle: (1 - 1/8) (1 + 1/8)^-2 = 56/81
    assert abs(eval_lambda_bubble(4, 1.0) - 56.0 / 81.0) < 1e-15


def test_multi_bubble_cases(work_grid):
    g = work_grid(3)
    zero = multi_bubble(BubbleConfig(), g)
    assert np.all(zero.values == 0.0)
    single = multi_bubble(BubbleConfig((1,), (1.0,)), g)
    assert np.allclose(single.values, eval_bubble(3, 1.0, g.nodes), rtol=0, atol=0)
    pair = multi_bubble(BubbleConfig((1, -1), (0.1, 1.0)), g)
    origin = pair.grid.interpolate(pair.values, 0.0)
    assert abs(origin - (math.sqrt(10.0) - 1.0)) < 2e-4  # smooth near 0, first node offset


def test_bubble_config_validation():
    with pytest.raises(ValueError):
        BubbleConfig((1, 1), (1.0, 0.5))
    with pytest.raises(ValueError):
        BubbleConfig((2,), (1.0,))
    with pytest.raises(ValueError):
        BubbleConfig((1,), (-1.0,))


# -- energies ----------------------------------------------------------------


def test_energy_zero_field(work_grid):
    g = work_grid(5)
    assert energy(RadialField.zero(g)) == 0.0
    assert enorm(RadialField.zero(g)) == 0.0


def test_energy_scale_invariance_on_mapped_grids():
    # mapped-grid sampling makes the discrete energy exactly scale invariant
    D = 5
    base = RadialGrid.geometric(D, 1024, 2e4, 1.02)
    e0 = energy(RadialField(base, eval_bubble(D, 1.0, base.nodes)))
    n0 = enorm(RadialField(base, eval_bubble(D, 1.0, base.nodes)))
    for lam in (0.5, 1.0, 2.0):
        mapped = RadialGrid.geometric(D, 1024, lam * 2e4, 1.02)
        W = RadialField(mapped, eval_bubble(D, lam, mapped.nodes))
        assert abs(energy(W) - e0) <= 1e-8 * abs(e0)
        assert abs(enorm(W) - n0) <= 1e-8 * n0


def test_closed_form_energy_vs_independent_oracle():
    for D in (3, 4, 5, 6):
        oracle = oracles.quad_energy(D)
        assert abs(bubble_energy(D) - oracle) <= 1e-8 * abs(oracle)
        oracle_n2 = oracles.quad_enorm2(D)
        assert abs(bubble_enorm(D) ** 2 - oracle_n2) <= 1e-8 * oracle_n2


def test_discrete_energy_converges_to_oracle():
    D = 5
    oracle = oracles.quad_energy(D)
    errs = []
    for n, q in ((1024, 1.02), (2048, math.sqrt(1.02)), (4096, 1.02**0.25)):
        g = RadialGrid.geometric(D, n, 2e4, q)
        errs.append(abs(energy(RadialField(g, eval_bubble(D, 1.0, g.nodes))) - oracle))
    assert errs[0] > errs[1] > errs[2]
    order = math.log(errs[0] / errs[2]) / math.log(4.0)
    assert order >= 1.5
    assert errs[2] <= 1e-4 * abs(oracle)


def test_local_energy_additivity(work_grid):
    g = work_grid(5)
    W = RadialField(g, eval_bubble(5, 1.0, g.nodes))
    total = energy(W)
    assert local_energy(W, 0.0, math.inf) == total
    for split in (0.7, 4.0, 100.0):
        left = local_energy(W, 0.0, split)
        right = local_energy(W, split, math.inf)
        assert abs(left + right - total) <= 1e-10 * max(abs(total), 1.0)


def _cut_slack(D, g, r1):
    # windows resolve cuts to the cell partition: the gradient term at the
    # edge nearest r1 represents a dual cell straddling it, so any window
    # comparison carries an O(h * gradient-density) slack at the cut
    k = np.searchsorted(g.edges, r1)
    h = float(g.edges[min(k + 1, g.n)] - g.edges[max(k - 1, 0)]) / 2.0
    dens = eval_bubble_deriv(D, 1.0, r1) ** 2 * r1 ** (D - 1)
    return h * dens


def test_local_energy_tail_matches_oracle(work_grid):
    D = 5
    g = work_grid(D)
    alpha = float(g.edges[np.searchsorted(g.edges, 10.0)])
    W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
    oracle = oracles.quad_energy(D, r1=alpha)
    got = local_energy(W, alpha, math.inf)
    assert abs(got - oracle) <= 0.5 * _cut_slack(D, g, alpha) + 2e-3 * abs(oracle)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.1, 5.0), b=st.floats(5.5, 50.0), c=st.floats(60.0, 1e4))
def test_enorm_window_additivity_random_splits(a, b, c):
    g = RadialGrid.geometric(5, 512, 2e4, 1.04)
    rng = np.random.default_rng(5)
    f = RadialField(g, np.exp(-((g.nodes - 2.0) ** 2)) + 0.3 * np.sin(g.nodes / 3.0)
                    * np.exp(-g.nodes / 50.0))
    left = enorm2(f, a, b)
    right = enorm2(f, b, c)
    assert abs(left + right - enorm2(f, a, c)) <= 1e-12 * max(enorm2(f, a, c), 1.0)


def test_enorm_tail_value_and_decay_rate(work_grid):
    D = 5
    g = work_grid(D)
    W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
    R = float(g.edges[np.searchsorted(g.edges, 10.0)])
    oracle = math.sqrt(oracles.quad_enorm2(D, r1=R))
    got = enorm(W, R, math.inf)
    slack = 0.5 * _cut_slack(D, g, R) / max(oracle, 1e-300)
    assert abs(got - oracle) <= slack + 2e-3 * oracle
    # the R^(-(D-2)/2) tail rate needs R >> core: slope corrections are
    # O(D(D-2)/R^2), still ~7% at R=20
    radii = np.array([20.0, 40.0, 80.0, 160.0])
    vals = np.array([enorm(W, R_, math.inf) for R_ in radii])
    slope = np.polyfit(np.log(radii), np.log(vals), 1)[0]
    assert abs(slope - (-(D - 2) / 2.0)) < 0.1


def test_scale_invariance_same_grid_refines():
    # rescaled analytic data on one fixed grid: 2% at working resolution,
    # shrinking under refinement
    D = 3
    lam = 3.0

    def field_on(n):
        g = RadialGrid.geometric(D, n, 2e4, (2e4 / 0.02) ** (1.0 / (n - 1)))
        v = RadialField(g, np.exp(-((g.nodes - 2.0) ** 2) / 2.0))
        vl = RadialField(g, lam ** (-(D - 2) / 2.0) * np.exp(-((g.nodes / lam - 2.0) ** 2) / 2.0))
        return abs(enorm(vl) - enorm(v)) / enorm(v)

    devs = [field_on(n) for n in (512, 1024, 2048)]
    assert devs[0] < 0.02
    assert devs[-1] < devs[0]


def test_tension_trivial_and_algebraic_identity(work_grid):
    D = 3
    g = work_grid(D)
    assert np.all(tension(RadialField.zero(g)).values == 0.0)
    # T(aW) = (a^p - a) W^p pointwise; at the origin with a=2, D=3 this is 30
    a, p = 2.0, 5.0
    W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
    Ta = tension(2.0 * W)
    predicted = (a**p - a) * np.asarray(eval_bubble(D, 1.0, g.nodes)) ** p
    core = g.nodes < 5.0
    assert np.allclose(Ta.values[core], predicted[core], rtol=5e-3, atol=5e-4)
    assert abs(Ta.values[0] - 30.0) < 0.05
    assert abs(predicted[0] - 30.0) < 1e-3


def test_tension_residual_second_order():
    D = 5
    norms = []
    for n, q in ((1024, 1.02), (2048, math.sqrt(1.02)), (4096, 1.02**0.25)):
        g = RadialGrid.geometric(D, n, 2e4, q)
        T = tension(RadialField(g, eval_bubble(D, 1.0, g.nodes)))
        norms.append(math.sqrt(float(np.sum(T.values**2 * g.volumes))))
    order1 = math.log(norms[0] / norms[1]) / math.log(2.0)
    order2 = math.log(norms[1] / norms[2]) / math.log(2.0)
    assert order1 >= 1.8
    assert order2 >= 1.8


def test_pohozaev_balance():
    from scipy.integrate import quad

    for D in (3, 5):
        p1 = 2.0 * D / (D - 2)
        grad_int = 0.0
        pot_int = 0.0
        core = math.sqrt(D * (D - 2.0))
        for a, b in ((0, core), (core, 100 * core), (100 * core, np.inf)):
            grad_int += quad(lambda r: eval_bubble_deriv(D, 1.0, r) ** 2 * r ** (D - 1),
                             a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
            pot_int += quad(lambda r: eval_bubble(D, 1.0, r) ** p1 * r ** (D - 1),
                            a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        assert abs(grad_int - pot_int) <= 1e-8 * abs(grad_int)


def test_summation_by_parts_exactness(work_grid):
    # <-Lap u | u>_V equals the edge-sum Dirichlet form to rounding
    g = work_grid(4)
    rng = np.random.default_rng(11)
    u = RadialField(g, np.exp(-((g.nodes - 3.0) ** 2) / 4.0) * rng.uniform(0.5, 1.5))
    lhs = inner_product(g, -g.apply_laplacian(u.values), u.values)
    rhs = grad2(u)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1.0)


# -- inequalities ------------------------------------------------------------


def test_radial_sobolev_zero_and_bubble(work_grid):
    D = 5
    g = work_grid(D)
    z = RadialField.zero(g)
    assert radial_sobolev_bound(z, 1.0) == (0.0, 0.0)
    W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
    lhs, rhs = radial_sobolev_bound(W, 1.0)
    assert lhs < rhs
    assert abs(lhs - eval_bubble(D, 1.0, 1.0)) < 1e-3
    oracle_rhs = math.sqrt(2.0 * oracles.quad_enorm2(D, r1=1.0))
    assert abs(rhs - oracle_rhs) <= 2e-3 * oracle_rhs
    for lam in (0.1, 1.0, 10.0):
        Wl = RadialField(g, eval_bubble(D, lam, g.nodes))
        lhs, rhs = radial_sobolev_bound(Wl, 1.0)
        assert lhs <= rhs


def test_hardy_tail_constant(work_grid):
    assert abs(4.0 / (3 - 2) ** 2 - 4.0) == 0.0
    D = 5
    g = work_grid(D)
    z = RadialField.zero(g)
    assert hardy_tail_constant_check(z, 1.0) == (0.0, 0.0)
    W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
    lhs, rhs = hardy_tail_constant_check(W, 0.5)
    assert lhs <= rhs


def test_trapping_certificates(work_grid):
    D = 5
    g = work_grid(D)
    cert = trapping_bound(RadialField.zero(g), 0.0)
    assert cert.certified and cert.energy == 0.0 and cert.enorm2 == 0.0
    W = RadialField(g, eval_bubble(D, 1.0, g.nodes))
    small = trapping_bound(0.01 * W, 0.0)
    assert small.certified
    assert small.energy >= small.constant * small.enorm2
    full = trapping_bound(W, 0.0)
    assert not full.certified
    assert trapping_constant(D) == pytest.approx((D - 2) ** 2 / 4.0 / (4 * (1 + (D - 2) ** 2 / 4.0)))


def test_trapping_default_delta_capped():
    # the 0.1 ||W||_E default would exceed the provable smallness range at D=6
    for D in (3, 4, 5, 6):
        assert trapping_default_delta(D) <= 0.1 * bubble_enorm(D) + 1e-12


def test_inequality_corpus_randomized():
    from bubbleflow.suites import _random_compact_fields

    for D in (3, 5):
        g = RadialGrid.geometric(D, 1024, 2e4, 1.02)
        delta = trapping_default_delta(D)
        for f in _random_compact_fields(g, 100, seed=29 + D):
            for R in (0.5, 2.0, 10.0):
                lhs, rhs = radial_sobolev_bound(f, R)
                assert lhs <= rhs * (1 + 1e-9) + 1e-30
                hl, hr = hardy_tail_constant_check(f, R)
                assert hl <= hr * (1 + 1e-9) + 1e-30
            nrm = enorm(f)
            if nrm > 0:
                scaled = (0.8 * delta / nrm) * f
                cert = trapping_bound(scaled, 0.0)
                assert cert.certified
                assert cert.energy >= cert.constant * cert.enorm2 - 1e-12
