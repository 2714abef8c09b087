"""Cotangent dynamics, trapped-branch counting and the escape function.

The k-valued map on the cotangent bundle of the circle is

    F_j(y, eta) = (x_j, E'(x_j) eta + tau'(x_j)),   x_j = g^{-1}((y + j)/k).

Along a noise path, time-n trajectories compose ``F_{alpha_n}(omega) o ... o
F_{alpha_1}(theta^{n-1} omega)`` and are indexed by ``sum_i alpha_i k^(i-1)``.
Every branch acts affinely on the fibre: ``xi = A eta + B`` with ``A = 1/dG``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CocycleContext, SkewProductSystem
from .errors import BranchBudgetExceeded

N_CAP = 14


@dataclass(frozen=True)
class CotangentPoint:
    y: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "y", float(self.y) % 1.0)
        object.__setattr__(self, "eta", float(self.eta))


@dataclass(frozen=True)
class TrapZone:
    """Trap zone ``S^1 x [-R, R]`` with escape rate ``kappa``.

    ``C_tau = sup|tau_0'| + 1`` and ``lam`` is the uniform expansion rate.
    """

    kappa: float
    R: float
    C_tau: float
    lam: float

    def __post_init__(self):
        if not 1.0 < self.kappa < self.lam:
            raise ValueError("kappa must lie in (1, lambda)")
        if self.R < self.C_tau / (self.lam - self.kappa) * (1 - 1e-12):
            raise ValueError("R must be at least C_tau / (lambda - kappa)")
        if self.R - self.C1 <= 0:
            raise ValueError("R must exceed C_tau / (lambda - 1)")

    @classmethod
    def standard(cls, sys: SkewProductSystem, scale: float = 1.0) -> "TrapZone":
        """Zone with ``kappa = (lambda+1)/2`` and ``R = scale * C_tau/(lambda-kappa)``."""
        lam = sys.expansion_rate
        kappa = 0.5 * (lam + 1.0)
        c_tau = sys.tau.sup_abs(1) + 1.0
        return cls(kappa, scale * c_tau / (lam - kappa), c_tau, lam)

    @property
    def C1(self) -> float:
        """Bound ``C_tau/(lambda-1)`` on the stable-graph function."""
        return self.C_tau / (self.lam - 1.0)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "R": self.R, "C_tau": self.C_tau, "lam": self.lam, "C1": self.C1}


@dataclass(frozen=True)
class ZoneGrid:
    """Tensor grid over ``[0,1) x [-R, R]``."""

    ny: int = 64
    neta: int = 65

    def ys(self) -> np.ndarray:
        return np.arange(self.ny) / self.ny

    def etas(self, R: float) -> np.ndarray:
        return np.linspace(-R, R, self.neta)

    def to_dict(self) -> dict:
        return {"ny": self.ny, "neta": self.neta}


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class EscapeSpec:
    """Escape function ``a_m``: 1 on ``|eta| <= R``, ``(1+eta^2)^(m/2)`` beyond ``R + delta0``.

    On the blend zone ``log a_m`` is the quintic smoothstep of ``(|eta|-R)/delta0``
    times ``(m/2) log(1+eta^2)``.
    """

    m: float
    R: float
    delta0: float

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")

    def check_kappa(self, kappa: float) -> None:
        if not self.delta0 < (kappa - 1.0) * self.R:
            raise ValueError("delta0 must be below (kappa - 1) R")

    @classmethod
    def for_zone(cls, zone: TrapZone, m: float, fraction: float = 0.5) -> "EscapeSpec":
        return cls(m, zone.R, fraction * (zone.kappa - 1.0) * zone.R)

    def log_value(self, eta):
        e = np.abs(np.asarray(eta, dtype=float))
        s = _smoothstep((e - self.R) / self.delta0)
        return s * 0.5 * self.m * np.log1p(e * e)

    def value(self, eta):
        return np.exp(self.log_value(eta))

    def C_kappa(self, kappa: float) -> float:
        return math.sqrt((1.0 + self.R**2) / (1.0 + kappa**2 * self.R**2))

    def to_dict(self) -> dict:
        return {"m": self.m, "R": self.R, "delta0": self.delta0}


def escape_value(spec: EscapeSpec, eta):
    return spec.value(eta)


def escape_ratio(spec: EscapeSpec, eta, xi):
    """``a_m(eta) / a_m(xi)`` for a point and its branch image."""
    return np.exp(spec.log_value(eta) - spec.log_value(xi))


def canonical_branch(sys: SkewProductSystem, j: int, pt: CotangentPoint):
    """``F_j(y, eta) = (x_j, E'(x_j) eta + tau'(x_j))``."""
    x = float(sys.branch(pt.y, j))
    return x, float(sys.dE(x) * pt.eta + sys.dtau(x))


@dataclass
class BranchTree:
    """Time-n branch data for a set of base points y.

    Arrays have shape ``(len(y), k^n)``; ``x`` is the base point reached, and the
    fibre acts as ``xi = slope * eta + offset``.
    """

    y: np.ndarray
    x: np.ndarray
    slope: np.ndarray
    offset: np.ndarray

    @property
    def dG(self) -> np.ndarray:
        return 1.0 / self.slope


def branch_tree(ctx: CocycleContext, j0: int, n: int, y, n_cap: int = N_CAP) -> BranchTree:
    """Enumerate all k^n branches for every base point in ``y``."""
    if n > n_cap:
        raise BranchBudgetExceeded(f"n = {n} exceeds branch cap {n_cap}")
    ctx.check_window(j0, j0 + n - 1)
    y = np.atleast_1d(np.asarray(y, dtype=float)) % 1.0
    x = y[:, None].copy()
    A = np.ones_like(x)
    B = np.zeros_like(x)
    for i in range(1, n + 1):
        sys = ctx.system(j0 + n - i)
        xs, As, Bs = [], [], []
        for alpha in range(sys.k):
            xn = sys.invert(x + alpha)
            d = sys.dE(xn)
            xs.append(xn)
            As.append(d * A)
            Bs.append(d * B + sys.dtau(xn))
        x = np.concatenate(xs, axis=1) % 1.0
        A = np.concatenate(As, axis=1)
        B = np.concatenate(Bs, axis=1)
    return BranchTree(y, x, A, B)


def trajectory_set(ctx: CocycleContext, j0: int, n: int, pt: CotangentPoint, n_cap: int = N_CAP):
    """All k^n points ``F^(n)(omega)(y, eta)`` as arrays ``(x, xi)`` indexed by alpha-bar."""
    t = branch_tree(ctx, j0, n, [pt.y], n_cap)
    return t.x[0], t.slope[0] * pt.eta + t.offset[0]


def max_overlap(lo: np.ndarray, hi: np.ndarray) -> int:
    """Maximum number of closed intervals ``[lo, hi]`` sharing a point (empty ones ignored)."""
    keep = lo <= hi
    lo = np.sort(lo[keep])
    hi = np.sort(hi[keep])
    if lo.size == 0:
        return 0
    depth = np.searchsorted(lo, lo, side="right") - np.searchsorted(hi, lo, side="left")
    return int(depth.max())


@dataclass
class TrappedCount:
    """Trapped-branch count with per-y detail.

    ``N`` takes the exact supremum over eta in ``[-R, R]`` at every grid y;
    ``N_grid`` restricts eta to the grid points as well.
    """

    n: int
    N: int
    N_grid: int
    per_y: np.ndarray
    grid_counts: np.ndarray = field(repr=False)


def count_trapped(
    ctx: CocycleContext, j0: int, n: int, zone: TrapZone, grid: ZoneGrid = ZoneGrid(), n_cap: int = N_CAP
) -> TrappedCount:
    """``N(eps; omega, n)``: most time-n branches of one point of Z that stay in Z."""
    R = zone.R
    ys = grid.ys()
    etas = grid.etas(R)
    if n == 0:
        ones = np.ones((ys.size, etas.size), dtype=int)
        return TrappedCount(0, 1, 1, np.ones(ys.size, dtype=int), ones)
    t = branch_tree(ctx, j0, n, ys, n_cap)
    per_y = np.empty(ys.size, dtype=int)
    counts = np.empty((ys.size, etas.size), dtype=int)
    for i in range(ys.size):
        A, B = t.slope[i], t.offset[i]
        lo = np.maximum((-R - B) / A, -R)
        hi = np.minimum((R - B) / A, R)
        per_y[i] = max_overlap(lo, hi)
        xi = np.multiply.outer(etas, A) + B
        counts[i] = (np.abs(xi) <= R).sum(axis=1)
    return TrappedCount(n, int(per_y.max()), int(counts.max()), per_y, counts)


@dataclass
class CaptivityDiagnostic:
    ns: np.ndarray
    counts: np.ndarray
    rates: np.ndarray
    infimum: float
    verdict: str

    def rows(self):
        return [(int(n), int(c), float(r)) for n, c, r in zip(self.ns, self.counts, self.rates)]


def captivity_diagnostic(
    ctx: CocycleContext, j0: int, n_max: int, zone: TrapZone, grid: ZoneGrid = ZoneGrid(), n_min: int = 1
) -> CaptivityDiagnostic:
    """The sequence ``n -> (1/n) log N`` with its infimum and a verdict band.

    Verdicts: ``"totally-captive"`` when every rate equals log k,
    ``"partially-captive"`` when the tail strictly decreases below log k, and
    ``"undetermined"`` otherwise.
    """
    ns = np.arange(n_min, n_max + 1)
    counts = np.array([count_trapped(ctx, j0, int(n), zone, grid).N for n in ns])
    rates = np.log(np.maximum(counts, 1)) / ns
    logk = math.log(ctx.base.k)
    tail = rates[len(rates) // 2 :]
    if np.all(np.abs(rates - logk) < 1e-12):
        verdict = "totally-captive"
    elif tail.size >= 2 and np.all(np.diff(tail) < 0) and tail[-1] < logk:
        verdict = "partially-captive"
    else:
        verdict = "undetermined"
    return CaptivityDiagnostic(ns, counts, rates, float(rates.min()), verdict)


@dataclass
class SymbolField:
    ys: np.ndarray
    etas: np.ndarray
    values: np.ndarray
    sup: float
    argmax: tuple


def principal_symbol(
    ctx: CocycleContext, j0: int, n: int, spec: EscapeSpec, ys, etas, n_cap: int = N_CAP
) -> SymbolField:
    """``p_n(y, eta) = sum_alpha a_m^2(eta) / a_m^2(F_alpha^(n)) dG_alpha^(n)/dy`` on a tensor grid."""
    ys = np.asarray(ys, dtype=float)
    etas = np.asarray(etas, dtype=float)
    if n == 0:
        vals = np.ones((ys.size, etas.size))
    else:
        t = branch_tree(ctx, j0, n, ys, n_cap)
        la = spec.log_value(etas)
        vals = np.empty((ys.size, etas.size))
        for i in range(ys.size):
            xi = np.multiply.outer(etas, t.slope[i]) + t.offset[i]
            vals[i] = (np.exp(2 * (la[:, None] - spec.log_value(xi))) * t.dG[i]).sum(axis=1)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return SymbolField(ys, etas, vals, float(vals[idx]), (float(ys[idx[0]]), float(etas[idx[1]])))


@dataclass
class SymbolBound:
    B: float
    escape_term: float
    trapped_term: float
    N_prev: int


def symbol_bound(
    ctx: CocycleContext, j0: int, n: int, spec: EscapeSpec, zone: TrapZone, grid: ZoneGrid = ZoneGrid()
) -> SymbolBound:
    """``B = (k/lam)^n C_kappa^(2m) + k N(theta omega, n-1) / lam^n``."""
    k = ctx.base.k
    lam = zone.lam
    N_prev = count_trapped(ctx, j0 + 1, n - 1, zone, grid).N
    first = (k / lam) ** n * spec.C_kappa(zone.kappa) ** (2 * spec.m)
    second = k * N_prev / lam**n
    return SymbolBound(first + second, first, second, N_prev)


@dataclass
class N0Choice:
    n0: int | None
    best_margin: float
    table: list


def choose_n0(
    ctx: CocycleContext,
    rho: float,
    zone: TrapZone,
    C_dim: float = 1.0,
    n_cap: int = 12,
    starts=(0,),
    grid: ZoneGrid = ZoneGrid(),
) -> N0Choice:
    """Smallest ``n0 <= n_cap`` with
    ``log(C_dim k)/(n0-1) + |log N(n0-1)|/(n0-1) < log(rho^2 lam)``.

    N is maximised over the sampled start indices. A failed search returns
    ``n0=None`` with the best (largest) margin seen.
    """
    lam = zone.lam
    if rho <= lam**-0.5:
        raise ValueError("rho must exceed lambda^(-1/2)")
    k = ctx.base.k
    target = math.log(rho * rho * lam)
    best = -math.inf
    table = []
    for n0 in range(2, n_cap + 1):
        N = max(count_trapped(ctx, j, n0 - 1, zone, grid).N for j in starts)
        lhs = (math.log(C_dim * k) + abs(math.log(N))) / (n0 - 1)
        margin = target - lhs
        table.append({"n0": n0, "N": N, "lhs": lhs, "margin": margin})
        best = max(best, margin)
        if margin > 0:
            return N0Choice(n0, margin, table)
    return N0Choice(None, best, table)
