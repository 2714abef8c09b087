"""Lifted cotangent dynamics on R^2, the stable-graph function S and interval counting.

``S(omega, x) = -sum_{i>=1} tau'(theta^{-i} omega, G^(i)(theta^{-i} omega, x)) dG^(i)/dx``
solves ``S(omega, G(omega,x)) = E'(omega, G(omega,x)) S(theta omega, x) + tau'(omega, G(omega,x))``.
Its graph is invariant under the lifted dynamics, so the distance of a fibre
coordinate to S, rescaled by dG, decides whether a branch stays trapped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .captivity import TrapZone, ZoneGrid, count_trapped, max_overlap
from .dynamics import CocycleContext, SkewProductSystem, compose_backward
from .errors import NotLinear


@dataclass
class StableGraphSolution:
    """Truncated series for S with memoisation keyed by (time index, quantised x).

    ``C_tau`` bounds ``sup|tau'|`` over the realized systems and ``lam`` bounds
    ``E'`` from below; together they fix the truncation depth for ``tol``.
    """

    ctx: CocycleContext
    C_tau: float
    lam: float
    tol: float = 1e-10
    _memo: dict = field(default_factory=dict, repr=False)

    @classmethod
    def for_zone(cls, ctx: CocycleContext, zone: TrapZone, tol: float = 1e-10) -> "StableGraphSolution":
        return cls(ctx, zone.C_tau, zone.lam, tol)

    @property
    def depth(self) -> int:
        return max(1, math.ceil(math.log(self.C_tau / ((self.lam - 1.0) * self.tol)) / math.log(self.lam)))

    @property
    def tail_bound(self) -> float:
        return self.C_tau * self.lam ** (-self.depth) / (self.lam - 1.0)

    @property
    def C1(self) -> float:
        return self.C_tau / (self.lam - 1.0)

    def __call__(self, j: int, x):
        x = np.asarray(x, dtype=float)
        key = (int(j), np.round(x, 13).tobytes(), x.shape)
        val = self._memo.get(key)
        if val is None:
            val = _series(self.ctx, int(j), x, self.depth)
            self._memo[key] = val
        return val


def _series(ctx: CocycleContext, j: int, x: np.ndarray, depth: int) -> np.ndarray:
    ctx.check_window(j - depth, j - 1)
    xi = np.array(x, dtype=float, copy=True)
    d = np.ones_like(xi)
    S = np.zeros_like(xi)
    for i in range(1, depth + 1):
        sys = ctx.system(j - i)
        xi = sys.invert(xi)
        d = d / sys.dE(xi)
        S -= sys.dtau(xi) * d
    return S


def solve_S(ctx: CocycleContext, j: int, x, tol: float = 1e-10, C_tau: float | None = None) -> np.ndarray:
    """``S(theta^j omega, x)`` with truncation error at most ``tol``."""
    base = ctx.base
    if C_tau is None:
        C_tau = base.tau.sup_abs(1) + 1.0
    sol = StableGraphSolution(ctx, C_tau, base.expansion_rate, tol)
    return sol(j, x)


@dataclass(frozen=True)
class ConeSpec:
    """Cone ``{|eta| <= theta |xi|}`` in the tangent plane of the torus."""

    theta: float

    @classmethod
    def for_radius(cls, sys: SkewProductSystem, R: float) -> "ConeSpec":
        return cls(R / (sys.lambda_floor - 1.0))

    @staticmethod
    def minimal(sys: SkewProductSystem) -> float:
        """Smallest invariant half-slope ``sup|tau'| / (2 pi (lambda_0 - 1))``."""
        return sys.tau.sup_abs(1) / (2 * np.pi * (sys.lambda_floor - 1.0))


def lifted_orbit(ctx: CocycleContext, j0: int, n: int, y, eta):
    """Iterates of ``F~(omega) o ... o F~(theta^{n-1} omega)`` applied to (y, eta).

    Returns a list of ``n + 1`` pairs; the first is the input and the last is the
    time-n point. ``F~(omega)(y, eta) = (G(omega,y), E'(omega,x) eta + tau'(omega,x))``.
    """
    ctx.check_window(j0, j0 + n - 1)
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    out = [(y, eta)]
    for i in range(n - 1, -1, -1):
        sys = ctx.system(j0 + i)
        y = sys.invert(y)
        eta = sys.dE(y) * eta + sys.dtau(y)
        out.append((y, eta))
    return out


def lifted_second_component(ctx: CocycleContext, j0: int, n: int, y, eta):
    """Closed form of the time-n fibre coordinate as a sum along the orbit."""
    y = np.asarray(y, dtype=float)
    _, dG = compose_backward(ctx, j0, n, y)
    total = np.asarray(eta, dtype=float) / dG
    prod = np.ones_like(y)
    for jj in range(n):
        xj, _ = compose_backward(ctx, j0 + jj, n - jj, y)
        sys = ctx.system(j0 + jj)
        total = total + sys.dtau(xj) * prod
        prod = prod * sys.dE(xj)
    return total


@dataclass
class TildeCount:
    R: float
    N: int
    per_y: np.ndarray


def tilde_intervals(ctx: CocycleContext, j0: int, n: int, y: float, sol: StableGraphSolution):
    """Centers ``S(theta^n omega, y + abar)`` and half-widths ``dG^(n)(omega, y + abar)``."""
    k = ctx.base.k
    lift = y + np.arange(k**n, dtype=float)
    _, dG = compose_backward(ctx, j0, n, lift)
    return sol(j0 + n, lift), dG


def count_tilde(ctx: CocycleContext, j0: int, n: int, R: float, ys, sol: StableGraphSolution) -> TildeCount:
    """``N~_R``: exact sup over eta of interval overlap depth, maximised over grid y."""
    ys = np.asarray(ys, dtype=float)
    per_y = np.empty(ys.size, dtype=int)
    for i, y in enumerate(ys):
        c, dG = tilde_intervals(ctx, j0, n, float(y), sol)
        per_y[i] = max_overlap(c - R * dG, c + R * dG)
    return TildeCount(R, int(per_y.max()), per_y)


def count_tilde_multi(ctx, j0, n, radii, ys, sol):
    """``N~_R`` for several radii sharing one pass over the intervals."""
    ys = np.asarray(ys, dtype=float)
    per = np.empty((len(radii), ys.size), dtype=int)
    for i, y in enumerate(ys):
        c, dG = tilde_intervals(ctx, j0, n, float(y), sol)
        for r, R in enumerate(radii):
            per[r, i] = max_overlap(c - R * dG, c + R * dG)
    return [TildeCount(R, int(per[r].max()), per[r]) for r, R in enumerate(radii)]


@dataclass
class Sandwich:
    n: int
    lower: int
    N: int
    upper: int

    @property
    def holds(self) -> bool:
        return self.lower <= self.N <= self.upper

    def to_dict(self) -> dict:
        return {"n": self.n, "lower": self.lower, "N": self.N, "upper": self.upper, "holds": self.holds}


def sandwich_check(
    ctx: CocycleContext, j0: int, n: int, zone: TrapZone, grid: ZoneGrid = ZoneGrid(), sol=None
) -> Sandwich:
    """Compare ``N~_{R-C1} <= N <= N~_{R+C1}`` on a shared y-grid."""
    sol = sol or StableGraphSolution.for_zone(ctx, zone)
    N = count_trapped(ctx, j0, n, zone, grid).N
    lo, hi = count_tilde_multi(ctx, j0, n, [zone.R - zone.C1, zone.R + zone.C1], grid.ys(), sol)
    return Sandwich(n, lo.N, N, hi.N)


@dataclass
class NoiseBracket:
    n: int
    eps_n: float
    rows: list
    samples: int


def noise_bracket(
    family,
    path,
    n: int,
    R: float,
    varrho: float,
    eps_grid,
    starts,
    ys,
    zone: TrapZone,
) -> NoiseBracket:
    """Largest grid eps with ``N~_{R-rho}(0;n) <= N~_R(eps;omega,n) <= N~_{R+rho}(0;n)`` on all samples."""
    from .dynamics import CocycleContext as Ctx

    if not varrho < R:
        raise ValueError("varrho must be below R")
    base_ctx = Ctx(family.base)
    base_sol = StableGraphSolution.for_zone(base_ctx, zone)
    lo, hi = count_tilde_multi(base_ctx, 0, n, [R - varrho, R + varrho], ys, base_sol)
    rows = []
    best = 0.0
    for eps in sorted(set(float(e) for e in eps_grid) | {0.0}):
        ctx = Ctx(family.base, family, path, eps)
        sol = StableGraphSolution.for_zone(ctx, zone)
        vals = [count_tilde(ctx, j, n, R, ys, sol).N for j in starts]
        ok = all(lo.N <= v <= hi.N for v in vals)
        rows.append({"eps": eps, "lower": lo.N, "upper": hi.N, "min": min(vals), "max": max(vals), "holds": ok})
        if ok and eps > best:
            best = eps
    return NoiseBracket(n, best, rows, len(list(starts)))


def slope_field(sys: SkewProductSystem, n: int, z: float) -> np.ndarray:
    """``s_n(zeta) = (1/2pi) d tau^(n)/dx`` at the k^n preimages ``zeta = (z + abar)/k^n``."""
    k = sys.k
    K = k**n
    zeta = (z + np.arange(K, dtype=float)) / K
    s = np.zeros(K)
    x = zeta
    for jj in range(n):
        s += sys.dtau(x) * k**jj
        x = (k * x) % 1.0
    return s / (2 * np.pi)


def lemma_radius(sys: SkewProductSystem, zone: TrapZone) -> float:
    """Threshold ``(sup|tau'| + (k-1) R_kappa / 2) / pi`` of the transversality comparison."""
    return (sys.tau.sup_abs(1) + (sys.k - 1) * zone.R / 2) / np.pi


def transversality_phi(sys: SkewProductSystem, R: float, n: int, zs=None) -> float:
    """Fraction ``phi(n)`` of preimages whose cone images meet a given one, maximised over z."""
    if not sys.is_linear:
        raise NotLinear("transversality count needs g = identity")
    cone = ConeSpec.for_radius(sys, R)
    if cone.theta < ConeSpec.minimal(sys):
        raise ValueError("cone is not invariant: R too small")
    zs = np.arange(64) / 64 if zs is None else np.asarray(zs, dtype=float)
    K = sys.k**n
    best = 0
    w = 2 * cone.theta
    for z in zs:
        s = np.sort(slope_field(sys, n, float(z)))
        cnt = np.searchsorted(s, s + w, side="right") - np.searchsorted(s, s - w, side="left")
        best = max(best, int(cnt.max()))
    return best / K


def transversality_vs_captivity(
    sys: SkewProductSystem, n_max: int, zone: TrapZone | None = None, grid: ZoneGrid = ZoneGrid()
) -> list[dict]:
    """Per-n rows ``(N, k^n phi(n))`` at the lemma's radius, with inequality verdicts."""
    zone = zone or TrapZone.standard(sys)
    R = lemma_radius(sys, zone)
    ctx = CocycleContext(sys)
    rows = []
    for n in range(1, n_max + 1):
        N = count_trapped(ctx, 0, n, zone, grid).N
        phi = transversality_phi(sys, R, n, grid.ys())
        bound = sys.k**n * phi
        rows.append({"n": n, "N": N, "phi": phi, "bound": bound, "holds": N <= bound + 1e-9})
    return rows
