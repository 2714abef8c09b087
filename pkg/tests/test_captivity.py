import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quenched.captivity import (
    CotangentPoint,
    EscapeSpec,
    TrapZone,
    ZoneGrid,
    branch_tree,
    canonical_branch,
    captivity_diagnostic,
    choose_n0,
    count_trapped,
    escape_ratio,
    max_overlap,
    principal_symbol,
    symbol_bound,
    trajectory_set,
)
from quenched.cohomology import lifted_orbit
from quenched.dynamics import CocycleContext, doubling
from quenched.errors import BranchBudgetExceeded

# regression baseline: doubling+cosine, eps = 0, default grid, n = 1..14
COUNTS = [2, 4, 8, 14, 20, 27, 35, 41, 47, 59, 68, 77, 88, 97]


def test_zone_constants(dc):
    z = TrapZone.standard(dc)
    assert z.kappa == 1.25
    assert z.C_tau == pytest.approx(2 * math.pi + 1)
    assert z.R == pytest.approx(29.1327, abs=1e-4)
    assert z.C1 == pytest.approx(14.5664, abs=1e-4)
    assert z.R - z.C1 > 0


def test_zone_validation():
    with pytest.raises(ValueError):
        TrapZone(1.6, 100.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        TrapZone(1.25, 1.0, 1.0, 1.5)


def test_canonical_branch_values(dc):
    assert canonical_branch(dc, 0, CotangentPoint(0.0, 0.0)) == pytest.approx((0.0, 0.0), abs=1e-14)
    x, xi = canonical_branch(dc, 0, CotangentPoint(0.5, 0.0))
    assert x == 0.25 and xi == pytest.approx(-2 * math.pi)


def test_escape_lemma_samples(dc, rng):
    z = TrapZone.standard(dc)
    y = rng.uniform(0, 1, 1000)
    eta = rng.choice([-1, 1], 1000) * z.R * (1 + rng.exponential(2, 1000))
    for j in range(2):
        x = dc.branch(y, j)
        assert np.all(np.abs(dc.dE(x) * eta + dc.dtau(x)) > z.kappa * np.abs(eta))


def test_escape_function(dc):
    z = TrapZone.standard(dc)
    spec = EscapeSpec.for_zone(z, 4)
    assert np.all(spec.value(np.linspace(-z.R, z.R, 11)) == 1.0)
    far = 2 * (z.R + spec.delta0)
    assert spec.value(far) == pytest.approx((1 + far**2) ** 2, rel=1e-12)
    assert spec.C_kappa(z.kappa) == pytest.approx(0.8002, abs=1e-4)
    spec.check_kappa(z.kappa)
    with pytest.raises(ValueError):
        EscapeSpec(4, z.R, z.R).check_kappa(z.kappa)


def test_escape_ratio_bound(dc, rng):
    # a(eta)/a(xi) <= C_kappa^m once |xi| >= kappa |eta| beyond the zone
    z = TrapZone.standard(dc)
    spec = EscapeSpec.for_zone(z, 3)
    eta = z.R * (1 + rng.exponential(3, 1000)) * rng.choice([-1, 1], 1000)
    xi = z.kappa * eta * (1 + rng.exponential(1, 1000))
    outside = np.abs(eta) > z.R + spec.delta0
    assert np.all(escape_ratio(spec, eta, xi)[outside] <= spec.C_kappa(z.kappa) ** spec.m * (1 + 1e-9))


def test_trajectory_set_linear():
    ctx = CocycleContext(doubling())
    x, xi = trajectory_set(ctx, 0, 1, CotangentPoint(0.3, 2.0))
    assert np.allclose(np.sort(x), [0.15, 0.65]) and np.allclose(xi, 4.0)
    _, xi = trajectory_set(ctx, 0, 5, CotangentPoint(0.0, 1.5))
    assert np.allclose(xi, 32 * 1.5)


def test_tree_matches_lifted_orbit(noisy):
    y, eta = 0.37, 3.0
    for n in range(1, 7):
        t = branch_tree(noisy, 2, n, [y])
        lift = y + np.arange(2**n)
        yn, en = lifted_orbit(noisy, 2, n, lift, np.full(lift.shape, eta))[-1]
        a = np.sort(np.round(t.x[0] % 1, 9))
        b = np.sort(np.round(yn % 1, 9))
        assert np.allclose(a, b, atol=1e-9)
        assert np.allclose(np.sort(t.slope[0] * eta + t.offset[0]), np.sort(en), atol=1e-9)


def test_branch_budget(dc):
    with pytest.raises(BranchBudgetExceeded):
        branch_tree(CocycleContext(dc), 0, 15, [0.0])


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 3)), min_size=1, max_size=30))
def test_max_overlap_brute_force(iv):
    lo = np.array([a for a, _ in iv])
    hi = lo + np.array([w for _, w in iv])
    pts = np.concatenate([lo, hi])
    brute = max(int(np.sum((lo <= p) & (p <= hi))) for p in pts)
    assert max_overlap(lo, hi) == brute


def test_counts_constant_ceiling(const_tau):
    ctx = CocycleContext(const_tau)
    z = TrapZone.standard(const_tau)
    assert [count_trapped(ctx, 0, n, z).N for n in range(13)] == [2**n for n in range(13)]


def test_counts_baseline(dc):
    ctx = CocycleContext(dc)
    z = TrapZone.standard(dc)
    got = [count_trapped(ctx, 0, n, z) for n in range(1, 15)]
    assert [c.N for c in got] == COUNTS
    assert all(c.N_grid <= c.N for c in got)
    frac = np.array(COUNTS) / 2.0 ** np.arange(1, 15)
    assert np.all(np.diff(frac[2:]) < 0)


def test_escape_is_permanent(dc):
    ctx = CocycleContext(dc)
    z = TrapZone.standard(dc)
    grid = ZoneGrid(16, 33)
    prev = None
    for n in range(1, 9):
        counts = count_trapped(ctx, 0, n, z, grid).grid_counts
        if prev is not None:
            assert np.all(counts[prev == 0] == 0)
        prev = counts


def test_diagnostic(dc, const_tau):
    d = captivity_diagnostic(CocycleContext(const_tau), 0, 10, TrapZone.standard(const_tau))
    assert d.verdict == "totally-captive" and np.allclose(d.rates, math.log(2))
    for scale in (1.0, 2.0):
        d = captivity_diagnostic(CocycleContext(dc), 0, 12, TrapZone.standard(dc, scale))
        assert d.verdict == "partially-captive"
    assert d.rates[-1] > 0.25


def test_symbol_trivial_and_bounded(dc):
    ctx = CocycleContext(doubling())
    spec = EscapeSpec(0, 4.0, 1.0)
    f = principal_symbol(ctx, 0, 5, spec, np.linspace(0, 1, 9), np.linspace(-4, 4, 9))
    assert np.allclose(f.values, 1.0)
    z = TrapZone.standard(dc)
    spec = EscapeSpec.for_zone(z, 6)
    dctx = CocycleContext(dc)
    for n in (4, 6):
        f = principal_symbol(dctx, 0, n, spec, np.arange(64) / 64, np.linspace(-z.R, z.R, 257))
        assert np.all(f.values > 0)
        assert f.sup <= symbol_bound(dctx, 0, n, spec, z).B


def test_symbol_bound_constant_ceiling(const_tau):
    z = TrapZone.standard(const_tau)
    spec = EscapeSpec.for_zone(z, 6)
    b = symbol_bound(CocycleContext(const_tau), 0, 5, spec, z)
    assert b.N_prev == 2**4
    assert b.trapped_term == pytest.approx(2**5 / 1.5**5)
    assert symbol_bound(CocycleContext(const_tau), 0, 5, EscapeSpec.for_zone(z, 60), z).escape_term < 1e-10


def test_choose_n0(dc, const_tau):
    ctx = CocycleContext(dc)
    z = TrapZone.standard(dc)
    assert choose_n0(ctx, 0.9, z).n0 is None
    found = choose_n0(ctx, 0.999, z, n_cap=14)
    assert found.n0 == 14 and found.best_margin > 0
    margins = [choose_n0(ctx, rho, z).best_margin for rho in (0.9, 0.95, 0.99)]
    assert margins == sorted(margins)
    zc = TrapZone.standard(const_tau)
    assert choose_n0(CocycleContext(const_tau), 0.99, zc, n_cap=8).n0 is None
