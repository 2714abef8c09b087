import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import jv

from quenched import transfer
from quenched.acceptance import family_context, reference_systems
from quenched.captivity import EscapeSpec
from quenched.dynamics import CocycleContext, TrigPolynomial, doubling
from quenched.errors import AliasingRisk
from quenched.transfer import (
    FORWARD,
    FrequencyGrid,
    OperatorMatrix,
    assemble,
    assemble_composed,
    cocycle_product,
    perturbation_distance,
    pq_operators,
    semiclassical,
    sobolev,
    spectral_norm,
    weighted_norm,
)


def test_shift_structure_entries():
    grid = FrequencyGrid(16)
    M = assemble(doubling(), 0, grid).entries
    b, a = np.meshgrid(grid.modes, grid.modes, indexing="ij")
    assert np.abs(M - (a == 2 * b)).max() <= 1e-12


@pytest.mark.parametrize("nu", [1, 2, 4, 8])
def test_jacobi_anger(nu):
    grid = FrequencyGrid(16)
    M = assemble(doubling(TrigPolynomial(0.0, (1.0,))), nu, grid).entries
    n = grid.modes[None, :] - 2 * grid.modes[:, None]
    assert np.abs(M - (-1j) ** (n % 4) * jv(n, nu)).max() <= 1e-8


def test_forward_preserves_constants(bump):
    grid = FrequencyGrid(16)
    F = assemble(bump, 0, grid, FORWARD)
    one = np.zeros(grid.size, complex)
    one[grid.xi] = 1
    assert np.allclose(F.apply(one), one, atol=1e-12)


@pytest.mark.parametrize("name", sorted(reference_systems()))
def test_duality(name):
    sys = reference_systems()[name]
    grid = FrequencyGrid(32)
    A = assemble(sys, 2, grid)
    F = assemble(sys, 2, grid, FORWARD)
    assert np.abs(A.entries - F.H.entries).max() <= 1e-8


def test_aliasing_guard():
    with pytest.raises(AliasingRisk):
        assemble(doubling(), 3, FrequencyGrid(16, n_quad=64))


def test_product_of_one_is_assemble(noisy):
    grid = FrequencyGrid(16)
    assert np.array_equal(cocycle_product(noisy, 1, grid, 5, 1).entries, assemble(noisy.system(5), 1, grid).entries)


def test_deterministic_product_is_power(dc):
    grid = FrequencyGrid(16)
    M = assemble(dc, 1, grid).entries
    P = cocycle_product(CocycleContext(dc), 1, grid, 0, 4).entries
    assert np.abs(P - np.linalg.matrix_power(M, 4)).max() <= 1e-10


def test_splice_and_truncation():
    ctx = family_context(0.1)
    grid = FrequencyGrid(48)
    whole = cocycle_product(ctx, 1, grid, 2, 5).entries
    parts = cocycle_product(ctx, 1, grid, 4, 3).entries @ cocycle_product(ctx, 1, grid, 2, 2).entries
    assert np.abs(whole - parts).max() <= 1e-8
    exact = assemble_composed(ctx, 2, 5, 1, grid).entries
    low = slice(48 - 8, 48 + 9)
    assert np.abs(whole - exact)[low, low].max() <= 1e-8


def test_weighted_norms():
    grid = FrequencyGrid(8)
    eye = OperatorMatrix(0, grid, np.eye(grid.size, dtype=complex))
    assert weighted_norm(eye, sobolev(3)) == pytest.approx(1.0)
    M = assemble(doubling(), 0, FrequencyGrid(32))
    assert weighted_norm(M, sobolev(2)) <= 1 + 1e-6
    assert weighted_norm(M, sobolev(0)) == pytest.approx(np.linalg.norm(M.entries, 2))


def test_lanczos_matches_dense(monkeypatch, dc):
    X = assemble(dc, 3, FrequencyGrid(40)).weighted(semiclassical(2, 3))
    dense = spectral_norm(X)
    monkeypatch.setattr(transfer, "DENSE_LIMIT", 10)
    assert spectral_norm(X) == pytest.approx(dense, rel=1e-10)
    P = X.conj().T @ X
    assert transfer.hermitian_top(P) == pytest.approx(dense**2, rel=1e-10)


def test_pq_identity_and_zero_steps():
    sys = doubling()
    spec = EscapeSpec(2, 4.0, 0.5)
    ctx = CocycleContext(sys)
    r = pq_operators(ctx, 64, FrequencyGrid(64), 0, 2, spec)
    assert r.identity_gap <= 1e-8
    r0 = pq_operators(ctx, 64, FrequencyGrid(8), 0, 0, spec)
    assert np.array_equal(r0.P, np.eye(17))


def test_pq_methods_agree_at_low_modes(dc):
    spec = EscapeSpec(2, 8.0, 1.0)
    ctx = CocycleContext(dc)
    a = pq_operators(ctx, 8, FrequencyGrid(40), 0, 2, spec, "product")
    b = pq_operators(ctx, 8, FrequencyGrid(40), 0, 2, spec, "direct")
    low = slice(40 - 5, 40 + 6)
    assert np.abs(a.Q - b.Q)[low, low].max() <= 1e-8


def test_perturbation_distance(family, path):
    rows = perturbation_distance(family, path, 1, 2, 2, (0.0, 0.04, 0.02), [0, 8, 16], FrequencyGrid(16))
    assert rows[0]["distance"] == 0.0
    for r in rows[1:]:
        assert r["distance"] <= 2 * r["telescoping_bound"]
    assert rows[1]["distance"] / rows[2]["distance"] >= 1.5


@given(st.integers(-3, 3), st.floats(0.1, 3))
def test_weights_positive_and_even(nu, m):
    grid = FrequencyGrid(10)
    for scheme in (sobolev(m), semiclassical(m, nu or 1)):
        w = scheme.weights(grid)
        assert np.all(w >= 1) and np.allclose(w, w[::-1])
