import math

import numpy as np
import pytest

from quenched.acceptance import family_context
from quenched.captivity import TrapZone, ZoneGrid, count_trapped
from quenched.cohomology import (
    StableGraphSolution,
    count_tilde,
    lemma_radius,
    lifted_orbit,
    lifted_second_component,
    noise_bracket,
    sandwich_check,
    solve_S,
    transversality_phi,
    transversality_vs_captivity,
)
from quenched.dynamics import CocycleContext, TrigPolynomial, compose_backward, doubling
from quenched.errors import NotLinear

# regression baselines for doubling+cosine at eps = 0 on the default grid
SANDWICH = [(2, 2, 2), (4, 4, 4), (7, 8, 8), (11, 14, 16), (15, 20, 24), (18, 27, 35), (22, 35, 46), (24, 41, 59),
            (31, 47, 66), (37, 59, 76)]
PHI = [1, 1, 1, 1, 1, 0.75, 0.5156, 0.3477, 0.2207, 0.1191, 0.0703, 0.0437]


def test_S_vanishes_for_constant_ceiling(const_tau):
    assert np.all(solve_S(CocycleContext(const_tau), 0, np.linspace(0, 1, 7)) == 0)


def test_S_at_fixed_point_and_series(dc):
    ctx = CocycleContext(dc)
    assert solve_S(ctx, 0, 0.0) == pytest.approx(0.0, abs=1e-12)
    # orbit of 1/2 under the canonical inverse branch is 2^(-1-i)
    i = np.arange(1, 80)
    oracle = np.sum(2 * np.pi * np.sin(np.pi * 2.0**-i) * 2.0**-i)
    assert solve_S(ctx, 0, 0.5) == pytest.approx(oracle, abs=1e-10)


def test_S_functional_equation(noisy, rng):
    zone = TrapZone.standard(noisy.base)
    sol = StableGraphSolution.for_zone(noisy, zone)
    x = rng.uniform(0, 2, 40)
    for j in (0, 5):
        sys = noisy.system(j)
        gx = sys.invert(x)
        lhs = sol(j, gx)
        rhs = sys.dE(gx) * sol(j + 1, x) + sys.dtau(gx)
        assert np.abs(lhs - rhs).max() <= 1e-8
    assert np.abs(sol(0, x)).max() <= sol.C1


def test_lifted_orbit_closed_form(noisy, rng):
    y = rng.uniform(0, 3, 10)
    eta = rng.normal(size=10)
    for n in range(0, 5):
        yn, en = lifted_orbit(noisy, 1, n, y, eta)[-1]
        if n == 0:
            assert np.array_equal(yn, y) and np.array_equal(en, eta)
            continue
        assert np.allclose(en, lifted_second_component(noisy, 1, n, y, eta), atol=1e-9)


def test_lifted_orbit_without_ceiling():
    ctx = CocycleContext(doubling())
    _, en = lifted_orbit(ctx, 0, 4, np.array([0.3]), np.array([1.5]))[-1]
    assert en[0] == pytest.approx(1.5 * 16)


def test_graph_invariance(noisy, rng):
    zone = TrapZone.standard(noisy.base)
    sol = StableGraphSolution.for_zone(noisy, zone)
    x = rng.uniform(0, 4, 20)
    n = 3
    yn, en = lifted_orbit(noisy, 2, n, x, sol(2 + n, x))[-1]
    g, _ = compose_backward(noisy, 2, n, x)
    assert np.allclose(yn, g) and np.abs(en - sol(2, yn)).max() <= 1e-7


def test_tilde_counts(const_tau, dc):
    zc = TrapZone.standard(const_tau)
    ctx = CocycleContext(const_tau)
    sol = StableGraphSolution.for_zone(ctx, zc)
    assert count_tilde(ctx, 0, 6, 1.0, [0.0, 0.3], sol).N == 2**6
    dctx = CocycleContext(dc)
    dsol = StableGraphSolution.for_zone(dctx, TrapZone.standard(dc))
    assert count_tilde(dctx, 0, 6, 0.0, np.arange(8) / 8 + 0.01, dsol).N == 1


def test_sandwich_baseline(dc, const_tau):
    ctx = CocycleContext(dc)
    zone = TrapZone.standard(dc)
    sol = StableGraphSolution.for_zone(ctx, zone)
    rows = [sandwich_check(ctx, 0, n, zone, sol=sol) for n in range(1, 11)]
    assert [(s.lower, s.N, s.upper) for s in rows] == SANDWICH
    zc = TrapZone.standard(const_tau)
    s = sandwich_check(CocycleContext(const_tau), 0, 6, zc)
    assert (s.lower, s.N, s.upper) == (64, 64, 64)


def test_sandwich_noisy():
    ctx = family_context(0.01)
    zone = TrapZone.standard(ctx.base)
    sol = StableGraphSolution.for_zone(ctx, zone)
    for j in (0, 8):
        assert sandwich_check(ctx, j, 6, zone, sol=sol).holds


def test_noise_bracket(family, path):
    zone = TrapZone.standard(family.base)
    varrho = (zone.kappa - 1) * zone.R
    assert varrho == pytest.approx(7.28, abs=0.01)
    eps_n = []
    for n in (2, 4):
        br = noise_bracket(family, path, n, zone.R, varrho, (0.1, 0.05, 0.02, 0.01), [0, 8], ZoneGrid(32).ys(), zone)
        assert br.rows[0]["eps"] == 0.0 and br.rows[0]["holds"]
        eps_n.append(br.eps_n)
    assert min(eps_n) > 0
    with pytest.raises(ValueError):
        noise_bracket(family, path, 2, 1.0, 2.0, (0.1,), [0], [0.0], zone)


def test_transversality(dc, const_tau):
    zc = TrapZone.standard(const_tau)
    R = lemma_radius(const_tau, zc)
    assert all(transversality_phi(const_tau, R, n) == 1.0 for n in range(1, 9))
    z = TrapZone.standard(dc)
    R = lemma_radius(dc, z)
    phi = [transversality_phi(dc, R, n, ZoneGrid().ys()) for n in range(1, 13)]
    assert phi == pytest.approx(PHI, abs=1e-4)
    assert all(p >= 2.0**-n for n, p in enumerate(phi, 1))
    assert phi[9] ** 0.1 < 1


def test_transversality_requires_linear_map(bump):
    with pytest.raises(NotLinear):
        transversality_phi(bump, 10.0, 2)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_transversality_random_ceiling(seed):
    r = np.random.default_rng(seed)
    tau = TrigPolynomial(0.0, tuple(0.5 * r.normal(size=3)), tuple(0.5 * r.normal(size=3)))
    assert all(row["holds"] for row in transversality_vs_captivity(doubling(tau), 8))
