import math

import numpy as np
import pytest

from quenched.acceptance import family_context
from quenched.dynamics import CocycleContext, TrigPolynomial, doubling
from quenched.errors import ResidualTooLarge
from quenched.spectral import essential_radius_log, invariant_density, lyapunov, peripheral_check, resonances
from quenched.transfer import FrequencyGrid, assemble, sobolev

# regression baseline: doubling+cosine, nu = 1, m = 3, ladder (16, 32)
RESONANCES_NU1 = [0.8186 + 0.0896j, -0.0833 - 0.5057j, -0.0319 - 0.4542j]


def test_essential_radius_closed_form():
    assert math.exp(essential_radius_log(1.5, 2, 2)) == pytest.approx(1.5**-2.5 * 2**0.5)
    assert math.exp(essential_radius_log(1.5, 2, 2)) == pytest.approx(0.5132, abs=1e-4)


@pytest.mark.parametrize("xi", [16, 32])
def test_shift_spectrum(xi):
    ev = np.linalg.eigvals(assemble(doubling(), 0, FrequencyGrid(xi)).weighted(sobolev(2)))
    ev = ev[np.argsort(-np.abs(ev))]
    assert abs(ev[0] - 1) <= 1e-10 and np.abs(ev[1:]).max() <= 1e-10


def test_resonance_baseline(dc):
    r = resonances(dc, 1, 3)
    found = sorted(r.resonances, key=lambda z: -abs(z))
    assert len(found) == 3
    for z, ref in zip(found, RESONANCES_NU1):
        assert abs(z - ref) <= 2e-4
    assert all(abs(z) < 1 for z in found)


def test_peripheral_doubling_cosine(dc):
    v = peripheral_check(dc, range(0, 9))
    assert v[0].flag == "simple-1"
    assert all(x.radius < 1 and x.flag == "gap" for x in v[1:])


def test_peripheral_constant_and_coboundary(const_tau):
    assert all(v.flag == "suspect-cohomologous" for v in peripheral_check(const_tau, range(1, 5)))
    cob = doubling(TrigPolynomial(0.0, (), (-1.0, 1.0)))
    assert all(abs(v.radius - 1) < 1e-6 for v in peripheral_check(cob, range(1, 4)))


def test_lyapunov_estimates(const_tau):
    ctx = family_context(0.01)
    assert abs(lyapunov(ctx, 0, sobolev(3), 10, [0, 8]).slope) <= 0.02
    assert lyapunov(ctx, 2, sobolev(3), 10, [0, 8]).slope < -0.05
    assert abs(lyapunov(CocycleContext(const_tau), 4, sobolev(3), 10).slope) <= 0.02
    with pytest.raises(ValueError):
        lyapunov(ctx, 0, sobolev(3), 3)


def test_linear_density_is_lebesgue(dc):
    h = invariant_density(CocycleContext(dc), 0)
    assert np.allclose(h(np.linspace(0, 1, 50)), 1.0, atol=1e-12)


def test_bump_density_matches_eigenvector(bump):
    grid = FrequencyGrid(32)
    h = invariant_density(CocycleContext(bump), 0, 40, grid)
    w, V = np.linalg.eig(assemble(bump, 0, grid).entries)
    v = V[:, np.argmin(np.abs(w - 1))]
    v = v / v[grid.xi]
    assert np.abs(h.coeffs - v).max() <= 1e-6
    assert h.integral == pytest.approx(1.0, abs=1e-10) and h.min_value > 0


def test_noisy_density_equivariance():
    ctx = family_context(0.02)
    h = invariant_density(ctx, 3)
    assert h.residual <= 1e-6


def test_density_residual_error():
    ctx = family_context(0.02)
    with pytest.raises(ResidualTooLarge):
        invariant_density(ctx, 0, n_pullback=1, tol=1e-14)
