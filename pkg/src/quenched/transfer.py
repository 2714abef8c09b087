"""Truncated Fourier matrices of the reduced transfer and composition operators.

For a frequency ``nu`` in the neutral direction the reduced operators act on
functions of x only:

    M_nu phi(x)   = phi(E(x)) exp(i nu tau(x))                       (forward)
    M*_nu phi(x)  = sum_{E(y)=x} exp(-i nu tau(y)) phi(y) / E'(y)     (adjoint)

In the basis ``e_a(x) = exp(2 pi i a x)`` the adjoint entry at row b, column a
is the full-circle integral ``int_0^1 exp(i(2 pi a y - 2 pi b E(y) - nu tau(y))) dy``
(the k inverse branches merge into one integral), evaluated by the periodic
trapezoid rule through FFTs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft
import scipy.sparse.linalg

from .dynamics import CocycleContext, SkewProductSystem, compose_forward
from .errors import AliasingRisk

ADJOINT = "adjoint"
FORWARD = "forward"

# entries below this magnitude are quadrature round-off and are set to zero
CHOP = 1e-14
# above this size, largest singular values come from a Lanczos solver
DENSE_LIMIT = 2500


@dataclass(frozen=True)
class FrequencyGrid:
    """Modes ``a = -xi..xi`` (frequencies ``2 pi a``) and quadrature size ``n_quad``.

    With ``n_quad=None`` each assembly picks the smallest fast FFT length that
    satisfies the aliasing guard.
    """

    xi: int
    n_quad: Optional[int] = None

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.xi, self.xi + 1)

    @property
    def freqs(self) -> np.ndarray:
        return 2 * np.pi * self.modes

    @property
    def size(self) -> int:
        return 2 * self.xi + 1

    def index(self, a: int) -> int:
        return int(a) + self.xi

    def required_points(self, expansion: int, nu: float, tau_sup: float) -> int:
        """Aliasing guard ``8 (2 xi + ceil(|nu| (sup|tau| + 1)) + K xi)`` for ``E`` of degree K."""
        return 8 * (2 * self.xi + math.ceil(abs(nu) * (tau_sup + 1.0)) + expansion * self.xi)

    def points_for(self, expansion: int, nu: float, tau_sup: float) -> int:
        need = self.required_points(expansion, nu, tau_sup)
        if self.n_quad is None:
            return scipy.fft.next_fast_len(need)
        if self.n_quad < need:
            raise AliasingRisk(f"quadrature size {self.n_quad} below guard {need}")
        return self.n_quad

    def to_dict(self) -> dict:
        return {"xi": self.xi, "n_quad": self.n_quad}


@dataclass(frozen=True)
class WeightScheme:
    """Diagonal weights on the Fourier grid.

    ``kind`` is ``"sobolev"`` (``<xi>^m``), ``"semiclassical"`` (``<xi/nu>^m``)
    or ``"escape"`` (``a_m(xi/nu)`` from an :class:`~quenched.captivity.EscapeSpec`).
    """

    kind: str = "sobolev"
    m: float = 0.0
    nu: float = 1.0
    escape: Optional[object] = None

    def weights(self, grid: FrequencyGrid) -> np.ndarray:
        xi = grid.freqs.astype(float)
        if self.kind == "sobolev":
            return (1.0 + xi**2) ** (self.m / 2)
        if self.kind == "semiclassical":
            return (1.0 + (xi / self.nu) ** 2) ** (self.m / 2)
        if self.kind == "escape":
            return self.escape.value(xi / self.nu)
        raise ValueError(f"unknown weight kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": self.m, "nu": self.nu}
        if self.escape is not None:
            d["escape"] = self.escape.to_dict()
        return d


def sobolev(m: float) -> WeightScheme:
    return WeightScheme("sobolev", m)


def semiclassical(m: float, nu: float) -> WeightScheme:
    return WeightScheme("semiclassical", m, nu)


def escape_weights(spec, nu: float) -> WeightScheme:
    return WeightScheme("escape", spec.m, nu, spec)


@dataclass
class OperatorMatrix:
    """A truncated operator matrix; rows index output modes, columns input modes."""

    nu: float
    grid: FrequencyGrid
    entries: np.ndarray
    direction: str = ADJOINT

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.nu, self.grid, self.entries @ other.entries, self.direction)

    @property
    def H(self) -> "OperatorMatrix":
        flip = FORWARD if self.direction == ADJOINT else ADJOINT
        return OperatorMatrix(self.nu, self.grid, self.entries.conj().T, flip)

    def entry(self, b: int, a: int) -> complex:
        return complex(self.entries[self.grid.index(b), self.grid.index(a)])

    def weighted(self, scheme: WeightScheme) -> np.ndarray:
        w = scheme.weights(self.grid)
        return (w[:, None] * self.entries) / w[None, :]

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.entries @ coeffs


def _chop(a: np.ndarray, tol: float) -> np.ndarray:
    if tol > 0:
        a.real[np.abs(a.real) < tol] = 0.0
        a.imag[np.abs(a.imag) < tol] = 0.0
    return a


def _from_samples(E, tau, nu, grid: FrequencyGrid, direction: str, linear_degree: Optional[int], chop: float):
    """Assemble from samples of ``E`` and ``tau`` on the quadrature nodes q/N."""
    N = E.shape[0]
    a = grid.modes
    D = grid.size
    if linear_degree is not None:
        K = linear_degree
        if direction == ADJOINT:
            c = scipy.fft.ifft(np.exp(-1j * nu * tau))
            idx = (a[None, :] - K * a[:, None]) % N
        else:
            c = scipy.fft.fft(np.exp(1j * nu * tau)) / N
            idx = (a[:, None] - K * a[None, :]) % N
        return _chop(c[idx], chop)
    out = np.empty((D, D), dtype=complex)
    chunk = max(1, int(4_000_000 // N))
    sel = a % N
    for start in range(0, D, chunk):
        rows = a[start : start + chunk]
        if direction == ADJOINT:
            phase = np.exp(-1j * (2 * np.pi * np.multiply.outer(rows, E) + nu * tau))
            out[start : start + chunk, :] = scipy.fft.ifft(phase, axis=1)[:, sel]
        else:
            phase = np.exp(1j * (2 * np.pi * np.multiply.outer(rows, E) + nu * tau))
            out[:, start : start + chunk] = (scipy.fft.fft(phase, axis=1)[:, sel] / N).T
    return _chop(out, chop)


def assemble(
    sys: SkewProductSystem,
    nu: float,
    grid: FrequencyGrid,
    direction: str = ADJOINT,
    chop: float = CHOP,
) -> OperatorMatrix:
    """Matrix of ``M*_nu`` (``direction="adjoint"``) or ``M_nu`` (``"forward"``) for one map."""
    N = grid.points_for(sys.k, nu, sys.tau.sup_abs())
    y = np.arange(N) / N
    E = sys.E(y)
    tau = sys.tau(y)
    ent = _from_samples(E, tau, nu, grid, direction, sys.k if sys.is_linear else None, chop)
    return OperatorMatrix(nu, grid, ent, direction)


def assemble_composed(
    ctx: CocycleContext,
    j: int,
    n: int,
    nu: float,
    grid: FrequencyGrid,
    direction: str = ADJOINT,
    chop: float = CHOP,
) -> OperatorMatrix:
    """Matrix of the n-step operator assembled in one pass from ``E^(n)``, ``tau^(n)``.

    This is the truncation of the exact n-step operator, free of the intermediate
    truncations of :func:`cocycle_product`.
    """
    systems = [ctx.system(j + i) for i in range(n)]
    K = systems[0].k ** n
    tau_sup = sum(s.tau.sup_abs() for s in systems)
    N = grid.points_for(K, nu, tau_sup)
    y = np.arange(N) / N
    E, tau, _ = compose_forward(ctx, j, n, y)
    linear = K if all(s.is_linear for s in systems) else None
    ent = _from_samples(E, tau, nu, grid, direction, linear, chop)
    return OperatorMatrix(nu, grid, ent, direction)


def step_matrix(ctx: CocycleContext, nu: float, grid: FrequencyGrid, j: int, direction: str = ADJOINT) -> OperatorMatrix:
    """Assembled one-step matrix at time index j, memoised on the context."""
    key = ("step", 0 if ctx.deterministic else int(j), float(nu), grid, direction)
    return ctx.memo(key, lambda: assemble(ctx.system(j), nu, grid, direction))


def cocycle_product(
    ctx: CocycleContext, nu: float, grid: FrequencyGrid, j: int, n: int, direction: str = ADJOINT
) -> OperatorMatrix:
    """Product of one-step matrices along the orbit.

    Adjoint: ``M*_{nu,n}(omega) = M*_nu(theta^{n-1} omega) ... M*_nu(omega)``.
    Forward: ``M_{nu,n}(omega) = M_nu(omega) ... M_nu(theta^{n-1} omega)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    ctx.check_window(j, j + n - 1)
    out = step_matrix(ctx, nu, grid, j, direction).entries
    for i in range(1, n):
        step = step_matrix(ctx, nu, grid, j + i, direction).entries
        out = step @ out if direction == ADJOINT else out @ step
    return OperatorMatrix(nu, grid, out, direction)


def cocycle_norms(ctx: CocycleContext, nu: float, grid: FrequencyGrid, j: int, n_max: int, scheme: WeightScheme):
    """Weighted norms of ``M*_{nu,n}(theta^j omega)`` for n = 1..n_max."""
    ctx.check_window(j, j + n_max - 1)
    out = []
    prod = None
    for i in range(n_max):
        step = step_matrix(ctx, nu, grid, j + i).entries
        prod = step if prod is None else step @ prod
        out.append(weighted_norm(OperatorMatrix(nu, grid, prod), scheme))
    return np.array(out)


def _start(n: int) -> np.ndarray:
    # fixed generic start vector: symmetric choices can be orthogonal to the top mode
    rng = np.random.default_rng(12345)
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)).astype(complex)


def spectral_norm(X: np.ndarray) -> float:
    """Largest singular value; dense SVD for small matrices, Lanczos otherwise."""
    if X.shape[0] <= DENSE_LIMIT:
        return float(np.linalg.norm(X, 2))
    s = scipy.sparse.linalg.svds(
        X, k=1, tol=1e-14, v0=_start(X.shape[1]), ncv=48, return_singular_vectors=False, solver="arpack"
    )
    return float(s[0])


def hermitian_top(P: np.ndarray) -> float:
    """Largest eigenvalue of a Hermitian positive semidefinite matrix."""
    if P.shape[0] <= DENSE_LIMIT:
        return float(np.linalg.eigvalsh(P)[-1])
    w = scipy.sparse.linalg.eigsh(P, k=1, which="LA", tol=1e-14, v0=_start(P.shape[0]), ncv=48, return_eigenvectors=False)
    return float(w[0])


def weighted_norm(M, scheme: WeightScheme) -> float:
    """Largest singular value of ``W M W^{-1}``, the operator norm on the weighted space."""
    if isinstance(M, OperatorMatrix):
        X = M.weighted(scheme)
    else:
        raise TypeError("weighted_norm expects an OperatorMatrix")
    return spectral_norm(X)


@dataclass
class PQResult:
    """Conjugated operator ``Q = A^{-1} M_{nu,n} A`` and ``P = Q^H Q``."""

    Q: np.ndarray
    P: np.ndarray
    norm_Q: float
    norm_P: float
    grid: FrequencyGrid

    @property
    def identity_gap(self) -> float:
        return abs(self.norm_Q**2 - self.norm_P)


def pq_operators(
    ctx: CocycleContext,
    nu: float,
    grid: FrequencyGrid,
    j: int,
    n: int,
    spec,
    method: str = "product",
) -> PQResult:
    """Build ``Q_{nu,n}`` and ``P_n`` for the escape weight ``a_m(xi/nu)``.

    ``method="product"`` multiplies one-step forward matrices; ``"direct"`` assembles
    the n-step forward operator in one pass (no intermediate truncation).
    """
    if nu == 0:
        raise ValueError("nu must be non-zero")
    D = grid.size
    if n == 0:
        eye = np.eye(D, dtype=complex)
        return PQResult(eye, eye.copy(), 1.0, 1.0, grid)
    if method == "direct":
        M = assemble_composed(ctx, j, n, nu, grid, FORWARD).entries
    else:
        M = cocycle_product(ctx, nu, grid, j, n, FORWARD).entries
    a = spec.value(grid.freqs / nu)
    Q = (M / a[:, None]) * a[None, :]
    del M
    P = Q.conj().T @ Q
    return PQResult(Q, P, spectral_norm(Q), hermitian_top(P), grid)


def perturbation_distance(
    family,
    path,
    nu: float,
    n: int,
    m: float,
    eps_grid,
    starts,
    grid: FrequencyGrid,
) -> list[dict]:
    """Rows ``eps -> max_j ||M*_{nu,n}(eps; theta^j omega) - M*_{nu,n}(0)||_{H^m}``.

    Each row also carries the telescoping bound
    ``n * max step distance * (max step norm)^(n-1)``.
    """
    scheme = sobolev(m)
    base = CocycleContext(family.base)
    ref = cocycle_product(base, nu, grid, 0, n).entries
    ref_step = step_matrix(base, nu, grid, 0)
    rows = []
    for eps in eps_grid:
        ctx = CocycleContext(family.base, family, path, float(eps))
        dist = 0.0
        step_dist = 0.0
        step_norm = weighted_norm(ref_step, scheme)
        for j in starts:
            prod = cocycle_product(ctx, nu, grid, j, n).entries
            dist = max(dist, spectral_norm(_weighted(prod - ref, grid, scheme)))
            for i in range(n):
                st = step_matrix(ctx, nu, grid, j + i)
                step_dist = max(step_dist, spectral_norm(_weighted(st.entries - ref_step.entries, grid, scheme)))
                step_norm = max(step_norm, weighted_norm(st, scheme))
        rows.append(
            {
                "eps": float(eps),
                "distance": dist,
                "telescoping_bound": n * step_dist * step_norm ** (n - 1),
                "samples": len(list(starts)),
            }
        )
    return rows


def _weighted(X: np.ndarray, grid: FrequencyGrid, scheme: WeightScheme) -> np.ndarray:
    w = scheme.weights(grid)
    return (w[:, None] * X) / w[None, :]


@dataclass
class BoundedNormRecord:
    """Weighted cocycle norms for one (nu, m) with the recorded bounding constant.

    ``constant`` is the largest norm seen over n <= n_max and all samples;
    ``early`` and ``late`` are the maxima over the first and second half of n.
    """

    nu: float
    m: float
    norms: np.ndarray
    constant: float
    early: float
    late: float

    @property
    def late_ratio(self) -> float:
        return self.late / self.early

    def to_dict(self) -> dict:
        return {"nu": self.nu, "m": self.m, "constant": self.constant, "early": self.early, "late": self.late}


def bounded_norms(
    family, path, nus, ms, eps_list, starts, n_max: int = 10, grid: FrequencyGrid = FrequencyGrid(32)
) -> list[BoundedNormRecord]:
    """Record ``C_{nu,m} = max ||M*_{nu,n}(eps; theta^j omega)||_{H^m}`` over n, eps and starts.

    ``norms`` has shape ``(len(eps_list) * len(starts), n_max)``.
    """
    ctxs = [CocycleContext(family.base, family, path, float(e)) for e in eps_list]
    half = n_max // 2
    out = []
    for nu in nus:
        for m in ms:
            scheme = sobolev(m)
            rows = np.array([cocycle_norms(ctx, nu, grid, j, n_max, scheme) for ctx in ctxs for j in starts])
            out.append(
                BoundedNormRecord(
                    float(nu), float(m), rows, float(rows.max()), float(rows[:, :half].max()), float(rows[:, half:].max())
                )
            )
    return out
