"""Quenched correlation functions via the Fourier mode sum, and decay fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CocycleContext, skew_apply
from .errors import DegenerateSeries
from .spectral import Density, invariant_density
from .transfer import FrequencyGrid, cocycle_product

FLOOR = 1e-14


@dataclass
class Observable2D:
    """``phi(x, s) = sum_nu sum_a c[nu][a] exp(2 pi i a x) exp(2 pi i nu s)``.

    ``modes`` maps nu to a complex coefficient vector over x-modes ``-A..A``.
    """

    modes: dict

    def __post_init__(self):
        self.modes = {int(nu): np.asarray(c, dtype=complex) for nu, c in self.modes.items()}
        sizes = {c.size for c in self.modes.values()}
        if len(sizes) != 1 or sizes.pop() % 2 == 0:
            raise ValueError("all modes need the same odd length")

    @property
    def a_max(self) -> int:
        return next(iter(self.modes.values())).size // 2

    @property
    def nu_max(self) -> int:
        return max(abs(nu) for nu in self.modes)

    def __call__(self, x, s):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        a = np.arange(-self.a_max, self.a_max + 1)
        out = np.zeros(np.broadcast(x, s).shape, dtype=complex)
        for nu, c in self.modes.items():
            fx = np.exp(2j * np.pi * np.multiply.outer(x, a)) @ c
            out = out + fx * np.exp(2j * np.pi * nu * s)
        return out

    def on_grid(self, nu: int, grid: FrequencyGrid) -> np.ndarray:
        """Coefficients of mode nu embedded in a frequency grid (zero if absent)."""
        v = np.zeros(grid.size, dtype=complex)
        c = self.modes.get(int(nu))
        if c is None:
            return v
        A = self.a_max
        if A > grid.xi:
            raise ValueError("observable has more x-modes than the grid")
        v[grid.xi - A : grid.xi + A + 1] = c
        return v

    def multiplied(self, h: Density) -> "Observable2D":
        """Mode-wise product with a density, truncated to the density's grid."""
        grid = h.grid
        new = {}
        for nu in self.modes:
            full = np.convolve(h.coeffs, self.on_grid(nu, grid))
            new[nu] = full[grid.xi : grid.xi + grid.size]
        return Observable2D(new)

    def scaled(self, c: complex) -> "Observable2D":
        return Observable2D({nu: c * v for nu, v in self.modes.items()})

    def __add__(self, other: "Observable2D") -> "Observable2D":
        A = max(self.a_max, other.a_max)
        grid = FrequencyGrid(A)
        nus = set(self.modes) | set(other.modes)
        return Observable2D({nu: self.on_grid(nu, grid) + other.on_grid(nu, grid) for nu in nus})

    @classmethod
    def random(cls, seed: int, nu_max: int = 3, a_max: int = 3, decay: float = 0.5) -> "Observable2D":
        """Smooth test observable with geometrically decaying random coefficients."""
        rng = np.random.default_rng(seed)
        a = np.arange(-a_max, a_max + 1)
        modes = {}
        for nu in range(-nu_max, nu_max + 1):
            c = rng.normal(size=a.size) + 1j * rng.normal(size=a.size)
            modes[nu] = c * decay ** (np.abs(a) + abs(nu))
        return cls(modes)


def _density(ctx: CocycleContext, j: int, grid: FrequencyGrid, n_pullback: int) -> Density:
    key = ("density", 0 if ctx.deterministic else int(j), grid, n_pullback)
    return ctx.memo(key, lambda: invariant_density(ctx, j, n_pullback, grid, tol=np.inf))


def cor_op(
    ctx: CocycleContext,
    j0: int,
    n: int,
    phi: Observable2D,
    psi: Observable2D,
    grid: FrequencyGrid = FrequencyGrid(32),
    n_pullback: int = 40,
) -> complex:
    """Operational correlation ``int phi o f^(n) conj(psi) - int phi dmu_{theta^n omega} int conj(psi)``.

    Mode sum ``(phi_0, M*_{0,n}(I - pi) psi_0) + sum_{nu != 0} (phi_nu, M*_{nu,n} psi_nu)``
    with ``pi u = (int u) h(omega)``.
    """
    total = 0j
    for nu in sorted(set(phi.modes) & set(psi.modes)):
        u = phi.on_grid(nu, grid)
        v = psi.on_grid(nu, grid)
        if nu == 0:
            h = _density(ctx, j0, grid, n_pullback)
            v = v - v[grid.xi] * h.coeffs
        if n > 0:
            v = cocycle_product(ctx, nu, grid, j0, n).entries @ v
        total += np.vdot(v, u)
    return complex(total)


def cor_cl(
    ctx: CocycleContext,
    j0: int,
    n: int,
    phi: Observable2D,
    psi: Observable2D,
    grid: FrequencyGrid = FrequencyGrid(32),
    n_pullback: int = 40,
) -> complex:
    """Classical correlation, equal to ``cor_op`` with psi replaced by ``h(omega) psi``."""
    h = _density(ctx, j0, grid, n_pullback)
    return cor_op(ctx, j0, n, phi, psi.multiplied(h), grid, n_pullback)


def cor_direct(
    ctx: CocycleContext,
    j0: int,
    n: int,
    phi: Observable2D,
    psi: Observable2D,
    classical: bool = False,
    points: int = 256,
    grid: FrequencyGrid = FrequencyGrid(32),
    n_pullback: int = 40,
) -> complex:
    """Tensor trapezoid evaluation of the correlation on a ``points x points`` torus grid."""
    t = np.arange(points) / points
    X, S = np.meshgrid(t, t, indexing="ij")
    Xn, Sn = skew_apply(ctx, j0, n, X, S)
    h_end = _density(ctx, j0 + n, grid, n_pullback)(t)
    weight = _density(ctx, j0, grid, n_pullback)(t)[:, None] if classical else 1.0
    psi_bar = np.conj(psi(X, S))
    first = np.mean(phi(Xn, Sn) * psi_bar * weight)
    mean_phi = np.mean(phi(X, S) * h_end[:, None])
    mean_psi = np.mean(psi_bar * weight)
    return complex(first - mean_phi * mean_psi)


@dataclass
class CorrelationSeries:
    ns: np.ndarray
    values: np.ndarray
    rho: float
    prefactor: float
    residual: float
    slack: float

    def rows(self):
        return [(int(n), v.real, v.imag, abs(v)) for n, v in zip(self.ns, self.values)]

    def to_dict(self) -> dict:
        return {"rho": self.rho, "prefactor": self.prefactor, "residual": self.residual, "slack": self.slack}


def fit_decay(values, ns=None, n_range=None):
    """Least-squares fit of ``log|Cor(n)|``; returns ``(rho, c, residual, slack)``.

    ``n_range`` defaults to all n >= 2. ``residual`` is the RMS log deviation and
    ``slack`` the factor with ``|Cor(n)| <= c rho^n (1 + slack)`` on the fitted range.
    """
    values = np.asarray(values)
    ns = np.arange(values.size) if ns is None else np.asarray(ns)
    if n_range is None:
        sel = ns >= 2
    else:
        sel = (ns >= n_range[0]) & (ns <= n_range[1])
    v = np.abs(values[sel])
    x = ns[sel].astype(float)
    if v.size < 2:
        raise DegenerateSeries("need at least two points to fit")
    floored = v <= FLOOR
    if floored.sum() * 2 >= v.size:
        raise DegenerateSeries("half or more of the series sits at the numerical floor")
    y = np.log(np.maximum(v, FLOOR))
    slope, icpt = np.polyfit(x, y, 1)
    dev = y - (slope * x + icpt)
    return (
        float(np.exp(slope)),
        float(np.exp(icpt)),
        float(np.sqrt(np.mean(dev**2))),
        float(np.expm1(max(dev.max(), 0.0))),
    )


def correlation_series(
    ctx: CocycleContext,
    j0: int,
    n_max: int,
    phi: Observable2D,
    psi: Observable2D,
    classical: bool = False,
    grid: FrequencyGrid = FrequencyGrid(32),
    n_range=None,
) -> CorrelationSeries:
    """Correlations for n = 0..n_max along one noise realization, with a decay fit."""
    fn = cor_cl if classical else cor_op
    ns = np.arange(n_max + 1)
    vals = np.array([fn(ctx, j0, int(n), phi, psi, grid) for n in ns])
    rho, c, res, slack = fit_decay(vals, ns, n_range)
    return CorrelationSeries(ns, vals, rho, c, res, slack)
