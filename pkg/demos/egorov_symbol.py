"""Comparing the conjugated transfer operator with its principal symbol.

Run: python3 demos/egorov_symbol.py   (about ten seconds)
"""
import math

import numpy as np

from quenched.captivity import EscapeSpec, TrapZone, principal_symbol, symbol_bound
from quenched.dynamics import CocycleContext, doubling_cosine
from quenched.transfer import FrequencyGrid, pq_operators

sys = doubling_cosine()
ctx = CocycleContext(sys)
zone = TrapZone.standard(sys)
spec = EscapeSpec.for_zone(zone, m=6)
n = 4

field = principal_symbol(ctx, 0, n, spec, np.arange(256) / 256, np.linspace(-zone.R, zone.R, 2049))
bound = symbol_bound(ctx, 0, n, spec, zone)
print(f"sup p_{n} = {field.sup:.6f} at (y, eta) = {field.argmax}; bound B = {bound.B:.4f}")

# Truncation must cover every frequency the escape weight reaches at this nu.
for nu in (64, 128, 256):
    xi = math.ceil(nu * (zone.R + spec.delta0) * 1.1 / (2 * math.pi))
    r = pq_operators(ctx, nu, FrequencyGrid(xi), 0, n, spec, method="direct")
    print(f"nu={nu:4d} xi={xi:5d}  ||P|| = {r.norm_P:.6f}  ||P|| - sup p = {r.norm_P - field.sup:+.5f}"
          f"  | ||Q||^2 - ||P|| | = {r.identity_gap:.1e}")
