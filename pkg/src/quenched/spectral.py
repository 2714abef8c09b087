"""Resonances, Lyapunov exponents, invariant densities and the peripheral spectrum."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dynamics import CocycleContext, SkewProductSystem
from .errors import ResidualTooLarge
from .transfer import (
    ADJOINT,
    FrequencyGrid,
    OperatorMatrix,
    WeightScheme,
    assemble,
    cocycle_norms,
    sobolev,
    step_matrix,
)


def essential_radius_log(lam: float, k: int, m: float) -> float:
    """``r_m = log(lam^(-m-1/2) k^(1/2))``."""
    return (-m - 0.5) * math.log(lam) + 0.5 * math.log(k)


@dataclass
class SpectralReport:
    nu: float
    m: float
    ladder: list
    eigenvalues: dict
    resonances: list
    r_m: float
    flags: list = field(default_factory=list)

    @property
    def radius(self) -> float:
        top = self.eigenvalues[self.ladder[-1]]
        return float(np.abs(top).max()) if len(top) else 0.0

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "m": self.m,
            "ladder": self.ladder,
            "r_m": self.r_m,
            "essential_radius": math.exp(self.r_m),
            "spectral_radius": self.radius,
            "resonances": [[z.real, z.imag] for z in self.resonances],
            "flags": self.flags,
        }


def _eigs(X: np.ndarray):
    try:
        return np.linalg.eigvals(X), None
    except np.linalg.LinAlgError as exc:
        return np.array([], dtype=complex), f"eigensolver failed: {exc}"


def resonances(
    sys: SkewProductSystem, nu: float, m: float, ladder=(16, 32), stab_tol: float = 1e-4
) -> SpectralReport:
    """Eigenvalues of ``W M*_nu W^{-1}`` on a ladder of truncations.

    An eigenvalue outside ``exp(r_m) + stab_tol`` counts as a resonance when it is
    matched, by optimal assignment, within ``stab_tol`` at every consecutive level.
    """
    ladder = sorted(int(x) for x in ladder)
    if len(ladder) < 2:
        raise ValueError("ladder needs at least two levels")
    scheme = sobolev(m)
    r_m = essential_radius_log(sys.expansion_rate, sys.k, m)
    cut = math.exp(r_m) + stab_tol
    eig = {}
    flags = []
    for xi in ladder:
        M = assemble(sys, nu, FrequencyGrid(xi))
        ev, err = _eigs(M.weighted(scheme))
        if err:
            flags.append(f"xi={xi}: {err}")
        eig[xi] = ev[np.argsort(-np.abs(ev))]
    # follow candidates from the finest level down the ladder
    cand = eig[ladder[-1]][np.abs(eig[ladder[-1]]) > cut]
    stable = np.ones(cand.size, dtype=bool)
    for xi in ladder[:-1]:
        other = eig[xi][np.abs(eig[xi]) > cut - stab_tol]
        if cand.size == 0:
            break
        if other.size == 0:
            stable[:] = False
            continue
        cost = np.abs(cand[:, None] - other[None, :])
        r, c = linear_sum_assignment(cost)
        matched = np.zeros(cand.size, dtype=bool)
        matched[r[cost[r, c] <= stab_tol]] = True
        stable &= matched
    res = [complex(z) for z in cand[stable]]
    return SpectralReport(float(nu), float(m), ladder, eig, res, r_m, flags)


@dataclass
class LyapunovEstimate:
    slope: float
    residual: float
    per_sample: list
    spread: float
    norms: list


def lyapunov(
    ctx: CocycleContext,
    nu: float,
    scheme: WeightScheme,
    n_max: int,
    starts=(0,),
    grid: FrequencyGrid = FrequencyGrid(32),
) -> LyapunovEstimate:
    """Least-squares slope of ``n -> log ||M*_{nu,n}||`` over n = 2..n_max, averaged over starts."""
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    ns = np.arange(1, n_max + 1)
    slopes, residuals, all_norms = [], [], []
    for j in starts:
        norms = cocycle_norms(ctx, nu, grid, j, n_max, scheme)
        y = np.log(norms[1:])
        coef = np.polyfit(ns[1:], y, 1)
        slopes.append(float(coef[0]))
        residuals.append(float(np.sqrt(np.mean((np.polyval(coef, ns[1:]) - y) ** 2))))
        all_norms.append(norms.tolist())
    slopes_a = np.array(slopes)
    return LyapunovEstimate(
        float(slopes_a.mean()),
        float(max(residuals)),
        slopes,
        float(slopes_a.max() - slopes_a.min()),
        all_norms,
    )


@dataclass
class Density:
    """Fourier coefficients of ``h_eps(theta^j omega)`` on modes ``-xi..xi``."""

    j: int
    grid: FrequencyGrid
    coeffs: np.ndarray
    residual: float
    min_value: float
    steps: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        phase = np.exp(2j * np.pi * np.multiply.outer(x, self.grid.modes))
        return (phase @ self.coeffs).real

    @property
    def integral(self) -> float:
        return float(self.coeffs[self.grid.xi].real)


def _pullback(ctx: CocycleContext, grid: FrequencyGrid, j: int, n: int) -> np.ndarray:
    v = np.zeros(grid.size, dtype=complex)
    v[grid.xi] = 1.0
    for i in range(j - n, j):
        v = step_matrix(ctx, 0, grid, i).entries @ v
    return v / v[grid.xi]


def invariant_density(
    ctx: CocycleContext,
    j: int,
    n_pullback: int = 40,
    grid: FrequencyGrid = FrequencyGrid(32),
    tol: float = 1e-8,
    check_points: int = 512,
) -> Density:
    """``h(theta^j omega) ~ M*_{0,n}(theta^{-n} theta^j omega) 1`` normalised to unit integral.

    The residual is ``||M*_0(theta^j omega) h(theta^j omega) - h(theta^{j+1} omega)||_{L^2}``.
    """
    ctx.check_window(j - n_pullback, j)
    h = _pullback(ctx, grid, j, n_pullback)
    h_next = _pullback(ctx, grid, j + 1, n_pullback)
    resid = float(np.linalg.norm(step_matrix(ctx, 0, grid, j).entries @ h - h_next))
    xs = np.arange(check_points) / check_points
    dens = Density(j, grid, h, resid, 0.0, n_pullback)
    dens.min_value = float(dens(xs).min())
    if resid > tol:
        raise ResidualTooLarge(f"density residual {resid:.3g} above {tol:.3g}", resid)
    return dens


@dataclass
class PeripheralVerdict:
    nu: int
    radius: float
    flag: str
    margin: float

    def to_dict(self) -> dict:
        return {"nu": self.nu, "radius": self.radius, "flag": self.flag, "margin": self.margin}


def peripheral_check(
    sys: SkewProductSystem, nu_range, m: float = 3, xi: int = 32, flag_tol: float = 1e-3
) -> list[PeripheralVerdict]:
    """Per-nu peripheral spectrum verdicts.

    nu = 0: ``margin`` is the gap between 1 and the second-largest modulus and
    ``flag`` says whether 1 is a simple eigenvalue. nu != 0: ``flag`` is
    ``"suspect-cohomologous"`` when the spectral radius is within ``flag_tol`` of 1.
    """
    scheme = sobolev(m)
    grid = FrequencyGrid(xi)
    out = []
    for nu in nu_range:
        ev, _ = _eigs(assemble(sys, nu, grid).weighted(scheme))
        mods = np.sort(np.abs(ev))[::-1]
        if nu == 0:
            near_one = int(np.sum(np.abs(ev - 1.0) < 1e-6))
            second = float(mods[1]) if mods.size > 1 else 0.0
            flag = "simple-1" if near_one == 1 and second < 1 - flag_tol else "not-simple"
            out.append(PeripheralVerdict(0, float(mods[0]), flag, 1.0 - second))
        else:
            r = float(mods[0])
            flag = "suspect-cohomologous" if r >= 1 - flag_tol else "gap"
            out.append(PeripheralVerdict(int(nu), r, flag, 1.0 - r))
    return out
