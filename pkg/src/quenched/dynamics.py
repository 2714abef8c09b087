"""Circle maps, ceiling functions and their cocycles on the real-line lift.

A skew product on the torus is stored through its lift

    f(x, s) = (E(x) mod 1, s + tau(x) / (2 pi) mod 1),   E(x) = k g(x),

where g(x) = x + p(x) is a circle diffeomorphism with trigonometric periodic
part p and tau is a trigonometric polynomial.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import InversionFailed, WindowExhausted

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrigPolynomial:
    """Real trigonometric polynomial ``c + sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x)``.

    ``cos`` and ``sin`` hold the coefficients for j = 1, 2, ...; the shorter one
    is padded with zeros.
    """

    const: float = 0.0
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        d = max(len(self.cos), len(self.sin))
        a = tuple(float(v) for v in self.cos) + (0.0,) * (d - len(self.cos))
        b = tuple(float(v) for v in self.sin) + (0.0,) * (d - len(self.sin))
        # drop trailing zero harmonics so equal polynomials compare equal
        while d > 0 and a[d - 1] == 0.0 and b[d - 1] == 0.0:
            d -= 1
        object.__setattr__(self, "const", float(self.const))
        object.__setattr__(self, "cos", a[:d])
        object.__setattr__(self, "sin", b[:d])

    @property
    def degree(self) -> int:
        return len(self.cos)

    @cached_property
    def _arrays(self):
        j = np.arange(1, self.degree + 1, dtype=float)
        return j, np.array(self.cos, dtype=float), np.array(self.sin, dtype=float)

    def is_zero(self) -> bool:
        return self.const == 0.0 and self.degree == 0

    def is_constant(self) -> bool:
        return self.degree == 0

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1):
        """Evaluate the ``order``-th derivative at ``x`` (array-like)."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.const if order == 0 else 0.0)
        if self.degree == 0:
            return out
        j, a, b = self._arrays
        w = TWO_PI * j
        # d^r/dx^r of cos(wx) is w^r cos(wx + r pi/2), likewise for sin
        phase = np.multiply.outer(x, w) + order * np.pi / 2
        scale = w**order
        return out + np.cos(phase) @ (a * scale) + np.sin(phase) @ (b * scale)

    def sup_abs(self, order: int = 0, samples: int = 4096) -> float:
        """Sup norm of the ``order``-th derivative on the circle."""
        if self.degree == 0:
            return abs(self.const) if order == 0 else 0.0
        if self.degree == 1 and (order > 0 or self.const == 0.0):
            return float(np.hypot(self.cos[0], self.sin[0]) * TWO_PI**order)
        n = samples * self.degree
        x = np.arange(n) / n
        v = np.abs(self.derivative(x, order))
        i = int(np.argmax(v))
        # quadratic polish around the best sample
        h = 1.0 / n
        xs = x[i] + h * np.linspace(-1, 1, 201)
        return float(max(v[i], np.abs(self.derivative(xs, order)).max()))

    def min(self, order: int = 0, samples: int = 4096) -> float:
        """Minimum value of the ``order``-th derivative on the circle."""
        n = samples * max(self.degree, 1)
        x = np.arange(n) / n
        v = self.derivative(x, order)
        i = int(np.argmin(v))
        xs = x[i] + np.linspace(-1, 1, 201) / n
        return float(min(v[i], self.derivative(xs, order).min()))

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        d = max(self.degree, other.degree)
        a = np.zeros(d)
        b = np.zeros(d)
        a[: self.degree] += self.cos
        b[: self.degree] += self.sin
        a[: other.degree] += other.cos
        b[: other.degree] += other.sin
        return TrigPolynomial(self.const + other.const, tuple(a), tuple(b))

    def scaled(self, c: float) -> "TrigPolynomial":
        return TrigPolynomial(c * self.const, tuple(c * v for v in self.cos), tuple(c * v for v in self.sin))

    def exp_coefficients(self) -> np.ndarray:
        """Complex exponential coefficients for frequencies -degree..degree."""
        d = self.degree
        c = np.zeros(2 * d + 1, dtype=complex)
        c[d] = self.const
        for j in range(1, d + 1):
            a, b = self.cos[j - 1], self.sin[j - 1]
            c[d + j] = 0.5 * (a - 1j * b)
            c[d - j] = 0.5 * (a + 1j * b)
        return c

    def to_dict(self) -> dict:
        return {"const": self.const, "cos": list(self.cos), "sin": list(self.sin)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrigPolynomial":
        return cls(d.get("const", 0.0), tuple(d.get("cos", ())), tuple(d.get("sin", ())))


ZERO = TrigPolynomial()


@dataclass(frozen=True)
class CircleDiffeo:
    """Lift ``g(x) = x + p(x)`` of an orientation-preserving circle diffeomorphism."""

    p: TrigPolynomial = ZERO

    def __post_init__(self):
        if 1.0 + self.p.min(1) <= 0.0:
            raise ValueError("g' must be positive everywhere")

    @property
    def is_identity(self) -> bool:
        return self.p.is_zero()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.p(x)

    def derivative(self, x, order: int = 1):
        d = self.p.derivative(x, order)
        return d + 1.0 if order == 1 else d

    @cached_property
    def min_derivative(self) -> float:
        return 1.0 + self.p.min(1)


@dataclass(frozen=True)
class SkewProductSystem:
    """One realized partially expanding map ``(E(x), s + tau(x)/2pi)`` with ``E = k g``."""

    k: int
    g: CircleDiffeo
    tau: TrigPolynomial

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError("k must be an integer >= 2")
        if self.lambda_floor <= 1.0:
            raise ValueError(f"map is not expanding: min E' = {self.lambda_floor:.6g}")

    @cached_property
    def lambda_floor(self) -> float:
        return self.k * self.g.min_derivative

    @property
    def is_linear(self) -> bool:
        return self.g.is_identity

    @cached_property
    def _p_sup(self) -> float:
        return self.g.p.sup_abs()

    def E(self, x):
        return self.k * self.g(x)

    def dE(self, x):
        return self.k * self.g.derivative(x)

    def dtau(self, x):
        return self.tau.derivative(x, 1)

    def invert(self, y, tol: float = 1e-12, max_iter: int = 200):
        """Lift inverse ``G = E^{-1}`` with ``|E(G(y)) - y| <= tol``.

        Vectorised bisection-safeguarded Newton iteration. The argument is first
        reduced to [0, k) using ``G(y + k l) = G(y) + l``.
        """
        y = np.asarray(y, dtype=float)
        shift = np.floor(y / self.k)
        y0 = y - self.k * shift
        if self.is_linear:
            return y0 / self.k + shift
        z = y0 / self.k
        spread = self._p_sup + 1e-12
        lo = z - spread
        hi = z + spread
        x = np.clip(z - self.g.p(z), lo, hi)
        gtol = tol / self.k
        for _ in range(max_iter):
            f = self.g(x) - z
            done = np.abs(f) <= gtol
            if done.all():
                return x + shift
            hi = np.where(f > 0, x, hi)
            lo = np.where(f < 0, x, lo)
            step = x - f / self.g.derivative(x)
            bad = ~((step > lo) & (step < hi))
            x_new = np.where(bad, 0.5 * (lo + hi), step)
            x = np.where(done, x, x_new)
            if np.all(done | (hi - lo <= 4 * np.spacing(np.abs(z) + 1.0))):
                return x + shift
        raise InversionFailed("branch inversion did not converge; is g a diffeomorphism?")

    def branch(self, y, j: int):
        """Inverse branch ``x_j = g^{-1}((y + j)/k)`` for y in [0,1)."""
        return self.invert(np.asarray(y, dtype=float) + j)

    def to_dict(self) -> dict:
        return {"k": self.k, "g": self.g.p.to_dict(), "tau": self.tau.to_dict()}

    @classmethod
    def build(cls, k: int, g: Optional[TrigPolynomial] = None, tau: Optional[TrigPolynomial] = None):
        return cls(k, CircleDiffeo(g if g is not None else ZERO), tau if tau is not None else ZERO)

    @cached_property
    def expansion_rate(self) -> float:
        """The uniform rate ``lambda = (lambda_floor + 1) / 2`` used in all bounds."""
        return 0.5 * (self.lambda_floor + 1.0)


def doubling(tau: Optional[TrigPolynomial] = None) -> SkewProductSystem:
    """Linear doubling map with ceiling ``tau`` (zero by default)."""
    return SkewProductSystem.build(2, None, tau)


def doubling_cosine() -> SkewProductSystem:
    """Doubling map with ceiling cos(2 pi x), the standard test system."""
    return doubling(TrigPolynomial(0.0, (1.0,)))


@dataclass
class CocycleContext:
    """A base system together with a noise realization and noise level.

    ``system(j)`` returns the realized map at time index j, i.e. ``f_eps(theta^j omega)``.
    Without a family or at ``eps == 0`` every index gives the base system.
    """

    base: SkewProductSystem
    family: Optional[object] = None
    path: Optional[object] = None
    eps: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def deterministic(self) -> bool:
        return self.family is None or self.path is None or self.eps == 0.0

    @property
    def lam(self) -> float:
        return self.base.expansion_rate

    def system(self, j: int) -> SkewProductSystem:
        if self.deterministic:
            return self.base
        j = int(j)
        sys = self._cache.get(j)
        if sys is None:
            from .noise import realize_system

            sys = realize_system(self.family, self.path, j, self.eps)
            self._cache[j] = sys
        return sys

    def check_window(self, lo: int, hi: int) -> None:
        """Raise unless indices lo..hi (inclusive) are available."""
        if self.deterministic or hi < lo:
            return
        self.path.check(lo, hi)

    def memo(self, key, build: Callable):
        """Per-context memo table for derived objects (matrices, densities)."""
        val = self._cache.get(key)
        if val is None:
            val = build()
            self._cache[key] = val
        return val


def deterministic(sys: SkewProductSystem) -> CocycleContext:
    return CocycleContext(sys)


def eval_expanding(sys: SkewProductSystem, x):
    """Return ``(E(x), E'(x))``."""
    return sys.E(x), sys.dE(x)


def invert_expanding(sys: SkewProductSystem, y, tol: float = 1e-12):
    if tol <= 0:
        raise ValueError("tol must be positive")
    return sys.invert(y, tol)


def compose_forward(ctx: CocycleContext, j: int, n: int, x):
    """Forward cocycle ``(E^(n), tau^(n), dE^(n)/dx)`` of ``theta^j omega`` at x."""
    if n < 0:
        raise ValueError("n must be non-negative")
    ctx.check_window(j, j + n - 1)
    x = np.array(x, dtype=float, copy=True)
    tau = np.zeros_like(x)
    d = np.ones_like(x)
    for i in range(n):
        sys = ctx.system(j + i)
        tau = tau + sys.tau(x)
        d = d * sys.dE(x)
        x = sys.E(x)
    return x, tau, d


def compose_backward(ctx: CocycleContext, j: int, n: int, x, tol: float = 1e-12):
    """Backward cocycle ``(G^(n), dG^(n)/dx)``, the inverse of ``E^(n)(theta^j omega)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    ctx.check_window(j, j + n - 1)
    x = np.array(x, dtype=float, copy=True)
    d = np.ones_like(x)
    for i in range(n - 1, -1, -1):
        sys = ctx.system(j + i)
        x = sys.invert(x, tol)
        d = d / sys.dE(x)
    return x, d


def skew_apply(ctx: CocycleContext, j: int, n: int, x, s):
    """Apply ``f^(n)(theta^j omega)`` to torus points (x, s)."""
    X, T, _ = compose_forward(ctx, j, n, x)
    return np.mod(X, 1.0), np.mod(np.asarray(s, dtype=float) + T / TWO_PI, 1.0)
