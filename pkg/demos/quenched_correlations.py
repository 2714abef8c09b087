"""Correlations along one noise realization, and a control that does not decay.

Run: python3 demos/quenched_correlations.py
"""
import numpy as np

from quenched.correlations import Observable2D, cor_direct, cor_op, correlation_series
from quenched.dynamics import CocycleContext, TrigPolynomial, doubling
from quenched.noise import doubling_cosine_family, epsilon_floor, sample_path
from quenched.spectral import invariant_density

family = doubling_cosine_family()
print(f"largest admissible noise level: {epsilon_floor(family):.4f}")
path = sample_path(seed=7, J=200, d=family.d)
ctx = CocycleContext(family.base, family, path, eps=0.01)

# The equivariant density h(omega) comes from pulling back Lebesgue measure.
h = invariant_density(ctx, 0)
print(f"density residual {h.residual:.2e}, integral {h.integral:.12f}, min {h.min_value:.6f}")

phi, psi = Observable2D.random(1), Observable2D.random(2)
print("\nn   mode sum                 direct quadrature")
for n in range(4):
    a, b = cor_op(ctx, 0, n, phi, psi), cor_direct(ctx, 0, n, phi, psi)
    print(f"{n}   {a:.10f}   {b:.10f}")

s = correlation_series(ctx, 0, 12, phi, psi)
print("\n|Cor(n)|:", np.round(np.abs(s.values), 6))
print(f"fitted rate {s.rho:.4f}, log residual {s.residual:.3f}")

# With a constant ceiling each neutral mode is only rotated, never damped.
flat = CocycleContext(doubling(TrigPolynomial(1.0)))
one = Observable2D({1: [0.3, 1.0, 0.5]})
c = correlation_series(flat, 0, 12, one, one)
print(f"constant ceiling control: fitted rate {c.rho:.4f}")
