"""Seeded two-sided noise paths and the perturbed systems they drive.

The probability space is the Bernoulli shift over [-1, 1]^d with i.i.d.
uniform coordinates. The shift acts as an index shift on a finite window;
any request outside the window is an error.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CircleDiffeo, SkewProductSystem, TrigPolynomial
from .errors import ExpansionLost, WindowExhausted


@dataclass(frozen=True)
class NoisePath:
    """Symbols ``omega_j`` for j = -J..J (shifted by ``offset``)."""

    seed: int
    J: int
    symbols: np.ndarray = field(repr=False)
    offset: int = 0

    @property
    def d(self) -> int:
        return self.symbols.shape[1]

    @property
    def lo(self) -> int:
        return -self.J - self.offset

    @property
    def hi(self) -> int:
        return self.J - self.offset

    def check(self, lo: int, hi: int) -> None:
        if lo < self.lo or hi > self.hi:
            raise WindowExhausted(f"indices {lo}..{hi} outside noise window {self.lo}..{self.hi}")

    def symbol(self, j: int) -> np.ndarray:
        self.check(j, j)
        return self.symbols[j + self.offset + self.J]

    def shifted(self, m: int) -> "NoisePath":
        """The path of ``theta^m omega``: ``shifted(m).symbol(j) == symbol(j + m)``."""
        return NoisePath(self.seed, self.J, self.symbols, self.offset + m)


def sample_path(seed: int, J: int, d: int) -> NoisePath:
    """Draw symbols i.i.d. uniform on [-1, 1]^d for indices -J..J."""
    if J < 1:
        raise ValueError("J must be at least 1")
    rng = np.random.default_rng(int(seed))
    sym = rng.uniform(-1.0, 1.0, size=(2 * J + 1, d))
    sym.setflags(write=False)
    return NoisePath(int(seed), int(J), sym)


@dataclass(frozen=True)
class PerturbationFamily:
    """Additive perturbation directions around a base system.

    ``g_eps = g_0 + eps sum_i omega_i u_i`` and
    ``tau_eps = tau_0 + eps sum_i omega_{p+i} v_i``.
    """

    base: SkewProductSystem
    map_basis: tuple = ()
    ceiling_basis: tuple = ()

    @property
    def p(self) -> int:
        return len(self.map_basis)

    @property
    def d(self) -> int:
        return len(self.map_basis) + len(self.ceiling_basis)

    @property
    def lam(self) -> float:
        return self.base.expansion_rate

    def perturbed_parts(self, omega, eps: float):
        g = self.base.g.p
        tau = self.base.tau
        if eps != 0.0:
            for w, u in zip(omega[: self.p], self.map_basis):
                g = g + u.scaled(eps * float(w))
            for w, v in zip(omega[self.p:], self.ceiling_basis):
                tau = tau + v.scaled(eps * float(w))
        return g, tau

    def min_expansion(self, omega, eps: float) -> float:
        g, _ = self.perturbed_parts(omega, eps)
        return self.base.k * (1.0 + g.min(1))

    def realize(self, omega, eps: float) -> SkewProductSystem:
        if eps == 0.0:
            return self.base
        g, tau = self.perturbed_parts(omega, eps)
        lam = self.lam
        min_e = self.base.k * (1.0 + g.min(1))
        if min_e < lam:
            raise ExpansionLost(f"min E' = {min_e:.6g} < lambda = {lam:.6g} at eps = {eps:g}")
        return SkewProductSystem(self.base.k, CircleDiffeo(g), tau)


def doubling_cosine_family() -> PerturbationFamily:
    """Doubling+cosine with map direction sin(2 pi x)/(2 pi) and ceiling direction sin(2 pi x)."""
    from .dynamics import doubling_cosine

    return PerturbationFamily(
        doubling_cosine(),
        (TrigPolynomial(0.0, (), (1.0 / (2 * np.pi),)),),
        (TrigPolynomial(0.0, (), (1.0,)),),
    )


def realize_system(family: PerturbationFamily, path: NoisePath, j: int, eps: float) -> SkewProductSystem:
    """The map ``f_eps(theta^j omega)``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0.0:
        return family.base
    return family.realize(path.symbol(j), eps)


def epsilon_floor(
    family: PerturbationFamily,
    lam: float | None = None,
    trials: int = 64,
    eps_max: float = 1.0,
    seed: int = 0,
    steps: int = 50,
) -> float:
    """Largest eps on a bisection grid keeping ``min E' >= lam`` on all sampled symbols.

    The sample set contains the cube vertices whenever d <= 10: min E' is a
    minimum of functions affine in omega, hence concave, so its minimum over the
    cube sits at a vertex and the estimate is exact up to bisection resolution.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    lam = family.lam if lam is None else lam
    if family.p == 0:
        return eps_max
    d = family.d
    rng = np.random.default_rng(seed)
    samples = [rng.uniform(-1.0, 1.0, size=(trials, d))]
    if d <= 10:
        samples.append(np.array(list(itertools.product((-1.0, 1.0), repeat=d))))
    omegas = np.vstack(samples)

    def ok(eps):
        return all(family.min_expansion(w, eps) >= lam for w in omegas)

    if ok(eps_max):
        return eps_max
    lo, hi = 0.0, eps_max
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
