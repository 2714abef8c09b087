"""Counting trapped branches of the canonical map and comparing with transversality.

Run: python3 demos/captivity_and_transversality.py
"""
import math

from quenched.captivity import TrapZone, captivity_diagnostic, choose_n0
from quenched.cohomology import StableGraphSolution, sandwich_check, transversality_vs_captivity
from quenched.dynamics import CocycleContext, TrigPolynomial, doubling, doubling_cosine

sys = doubling_cosine()
zone = TrapZone.standard(sys)
print(f"trap zone: kappa={zone.kappa}, R={zone.R:.4f}, C1={zone.C1:.4f}")

# A constant ceiling traps everything: N(n) = 2^n and the rate never drops.
flat = doubling(TrigPolynomial(1.0))
d = captivity_diagnostic(CocycleContext(flat), 0, 10, TrapZone.standard(flat))
print(f"\nconstant ceiling: counts {d.counts.tolist()} -> {d.verdict}")

# The cosine ceiling shears branches apart, so (1/n) log N keeps falling.
ctx = CocycleContext(sys)
d = captivity_diagnostic(ctx, 0, 12, zone)
for n, N, rate in d.rows():
    print(f"n={n:2d}  N={N:3d}  (1/n) log N = {rate:.4f}")
print("verdict:", d.verdict, f"(log 2 = {math.log(2):.4f})")

# The count is squeezed between interval counts centred on the stable graph.
sol = StableGraphSolution.for_zone(ctx, zone)
print("\nsandwich lower <= N <= upper:")
for n in (4, 7, 10):
    s = sandwich_check(ctx, 0, n, zone, sol=sol)
    print(f"  n={n}: {s.lower} <= {s.N} <= {s.upper}")

# For a linear map, transversality of cone images controls the count.
print("\nn   N   2^n phi(n)")
for row in transversality_vs_captivity(sys, 10):
    print(f"{row['n']:2d} {row['N']:4d} {row['bound']:8.1f}")

# The spectral-gap recipe needs N to grow slowly enough; at desk-scale n it only
# closes for rho very near one.
for rho in (0.9, 0.999):
    c = choose_n0(ctx, rho, zone, n_cap=14)
    print(f"rho={rho}: n0={c.n0}, best margin {c.best_margin:+.4f}")
