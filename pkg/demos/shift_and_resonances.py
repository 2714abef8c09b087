"""Transfer matrices of the doubling map, with and without a ceiling function.

Run: python3 demos/shift_and_resonances.py
"""
import math

import numpy as np

from quenched.dynamics import TrigPolynomial, doubling, doubling_cosine
from quenched.spectral import essential_radius_log, peripheral_check, resonances
from quenched.transfer import FrequencyGrid, assemble, sobolev

# With no ceiling the nu = 0 matrix is a pure shift a -> 2b: it is nilpotent
# apart from the constant mode, so the whole spectrum collapses onto {1, 0}.
M = assemble(doubling(), 0, FrequencyGrid(32))
ev = np.linalg.eigvals(M.weighted(sobolev(2)))
print("doubling, nu=0: largest moduli", np.round(np.sort(np.abs(ev))[::-1][:4], 12))

# Adding tau = cos(2 pi x) twists every neutral mode by a Bessel kernel.
sys = doubling_cosine()
r_m = essential_radius_log(sys.expansion_rate, sys.k, 3)
print(f"\nessential radius at m=3: {math.exp(r_m):.4f}")
for nu in (1, 2, 3):
    rep = resonances(sys, nu, 3)
    shown = ", ".join(f"{z.real:+.4f}{z.imag:+.4f}i" for z in rep.resonances)
    print(f"nu={nu}: spectral radius {rep.radius:.4f}; stable resonances [{shown}]")

# Every neutral mode sits strictly inside the unit circle...
radii = [v.radius for v in peripheral_check(sys, range(1, 9))]
print("\nperipheral radii nu=1..8:", np.round(radii, 4))

# ...unless tau is cohomologous to a constant, where nothing contracts.
cob = doubling(TrigPolynomial(0.0, (), (-1.0, 1.0)))
for v in peripheral_check(cob, range(1, 4)):
    print(f"coboundary ceiling nu={v.nu}: radius {v.radius:.8f} -> {v.flag}")
