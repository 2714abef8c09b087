"""Acceptance battery shared by ``quenched verify`` and the test suite.

Each criterion returns a :class:`CriterionResult` whose ``details`` hold every
number the verdict rests on. Details contain no timings, so that two runs of a
suite serialise identically.
"""
from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import jv

from .captivity import (
    EscapeSpec,
    TrapZone,
    ZoneGrid,
    captivity_diagnostic,
    count_trapped,
    principal_symbol,
    symbol_bound,
)
from .cohomology import StableGraphSolution, noise_bracket, sandwich_check, transversality_vs_captivity
from .correlations import Observable2D, cor_cl, cor_direct, cor_op, correlation_series
from .dynamics import CircleDiffeo, CocycleContext, SkewProductSystem, TrigPolynomial, doubling, doubling_cosine
from .noise import doubling_cosine_family, epsilon_floor, sample_path
from .spectral import invariant_density, lyapunov, peripheral_check
from .transfer import (
    FORWARD,
    FrequencyGrid,
    assemble,
    bounded_norms,
    cocycle_product,
    perturbation_distance,
    pq_operators,
    sobolev,
)

NOISE_SEED = 20240607
NOISE_J = 200
SAMPLE_STRIDE = 8


# ---------------------------------------------------------------------------
# shared fixtures


def constant_ceiling() -> SkewProductSystem:
    """Doubling map with ``tau = 1``: cohomologous to a constant, totally captive."""
    return doubling(TrigPolynomial(1.0))


def bump_system() -> SkewProductSystem:
    """``g(x) = x + 0.1 sin(2 pi x)/(2 pi)``, k = 2, ceiling cos(2 pi x)."""
    g = CircleDiffeo(TrigPolynomial(0.0, (), (0.1 / (2 * np.pi),)))
    return SkewProductSystem(2, g, TrigPolynomial(0.0, (1.0,)))


def reference_systems() -> dict:
    """The deterministic systems every structural check runs on."""
    return {
        "doubling": doubling(),
        "doubling-cosine": doubling_cosine(),
        "constant-ceiling": constant_ceiling(),
        "coboundary": doubling(TrigPolynomial(0.0, (), (-1.0, 1.0))),
        "bump": bump_system(),
        "tripling": SkewProductSystem.build(3, None, TrigPolynomial(0.0, (0.3,), (0.0, 0.5))),
    }


def noise_path(d: int = 2):
    return sample_path(NOISE_SEED, NOISE_J, d)


def family_context(eps: float) -> CocycleContext:
    fam = doubling_cosine_family()
    return CocycleContext(fam.base, fam, noise_path(fam.d), eps)


def starts(count: int = 8) -> list[int]:
    return [i * SAMPLE_STRIDE for i in range(count)]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict
    seconds: float = field(default=0.0, compare=False)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:02d} {self.title} ({self.seconds:.1f} s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "details": self.details}


def _max_abs(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


# ---------------------------------------------------------------------------
# criteria


def shift_structure() -> tuple[bool, dict]:
    t0 = time.perf_counter()
    M = assemble(doubling(), 0, FrequencyGrid(32))
    ev = np.linalg.eigvals(M.weighted(sobolev(2)))
    elapsed = time.perf_counter() - t0
    ev = ev[np.argsort(-np.abs(ev))]
    top_err = abs(ev[0] - 1.0)
    rest = float(np.abs(ev[1:]).max())
    ok = top_err <= 1e-10 and rest <= 1e-10 and elapsed < 1.0
    return ok, {"top_error": top_err, "max_other_modulus": rest, "under_one_second": elapsed < 1.0}


def bessel_oracle() -> tuple[bool, dict]:
    sys = doubling(TrigPolynomial(0.0, (1.0,)))
    grid = FrequencyGrid(16)
    a = grid.modes[None, :]
    b = grid.modes[:, None]
    n = a - 2 * b
    t0 = time.perf_counter()
    errs = {}
    for nu in (1, 2, 4, 8):
        M = assemble(sys, nu, grid).entries
        oracle = (-1j) ** (n % 4) * jv(n, nu)
        errs[nu] = _max_abs(M - oracle)
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-8 and elapsed < 5.0
    return ok, {"max_error": errs, "under_five_seconds": elapsed < 5.0}


def duality_symmetry() -> tuple[bool, dict]:
    grid = FrequencyGrid(32)
    out = {}
    worst = 0.0
    for name, sys in reference_systems().items():
        for nu in (0, 1, 3, 7):
            A = assemble(sys, nu, grid).entries
            F = assemble(sys, nu, grid, FORWARD).entries
            Am = assemble(sys, -nu, grid).entries
            dual = _max_abs(A - F.conj().T)
            conj = _max_abs(Am - np.conj(A[::-1, ::-1]))
            out[f"{name} nu={nu}"] = [dual, conj]
            worst = max(worst, dual, conj)
    # the same identities for a noisy three-step product
    ctx = family_context(0.1)
    for nu in (1, 3):
        A = cocycle_product(ctx, nu, grid, 0, 3).entries
        F = cocycle_product(ctx, nu, grid, 0, 3, FORWARD).entries
        Am = cocycle_product(ctx, -nu, grid, 0, 3).entries
        dual = _max_abs(A - F.conj().T)
        conj = _max_abs(Am - np.conj(A[::-1, ::-1]))
        out[f"noisy product nu={nu}"] = [dual, conj]
        worst = max(worst, dual, conj)
    return worst <= 1e-8, {"worst": worst, "per_case": out}


def density_checks() -> tuple[bool, dict]:
    xs = np.arange(512) / 512
    grid = FrequencyGrid(32)
    fam = doubling_cosine_family()
    rows = {}
    ok = True
    for eps in (0.0, 0.02):
        h = invariant_density(family_context(eps), 0, 40, grid, tol=np.inf)
        good = h.residual <= 1e-6 and abs(h.integral - 1.0) <= 1e-10 and h.min_value > 0
        rows[f"eps={eps}"] = {"residual": h.residual, "integral": h.integral, "min": h.min_value}
        ok &= good
    h0 = invariant_density(CocycleContext(fam.base), 0, 40, grid, tol=np.inf)(xs)
    ladder = []
    for eps in (0.1, 0.05, 0.025):
        h = invariant_density(family_context(eps), 0, 40, grid, tol=np.inf)
        ladder.append(float(np.abs(h(xs) - h0).max()))
    monotone = all(b < a for a, b in zip(ladder, ladder[1:]))
    return bool(ok and monotone), {"levels": rows, "ladder_sup_distance": ladder, "monotone": monotone}


def peripheral_spectrum() -> tuple[bool, dict]:
    nus = range(1, 9)
    cos_v = peripheral_check(doubling_cosine(), nus, m=3)
    const_v = peripheral_check(constant_ceiling(), nus, m=3)
    ok_cos = all(v.radius < 1 for v in cos_v)
    ok_const = all(abs(v.radius - 1) <= 1e-6 and v.flag == "suspect-cohomologous" for v in const_v)
    return ok_cos and ok_const, {
        "doubling_cosine_radii": [v.radius for v in cos_v],
        "constant_ceiling_radii": [v.radius for v in const_v],
        "constant_ceiling_flags": sorted({v.flag for v in const_v}),
    }


def lyapunov_signs() -> tuple[bool, dict]:
    ctx = family_context(0.01)
    zero = lyapunov(ctx, 0, sobolev(3), 12, starts())
    two = lyapunov(ctx, 2, sobolev(3), 12, starts())
    ok = abs(zero.slope) <= 0.02 and max(two.per_sample) < -0.05
    return ok, {
        "nu0_estimate": zero.slope,
        "nu2_estimate": two.slope,
        "nu2_per_sample": two.per_sample,
        "nu2_residual": two.residual,
    }


def captivity_counts() -> tuple[bool, dict]:
    t0 = time.perf_counter()
    zone_c = TrapZone.standard(constant_ceiling())
    ctx_c = CocycleContext(constant_ceiling())
    const = [count_trapped(ctx_c, 0, n, zone_c).N for n in range(1, 13)]
    exact = const == [2**n for n in range(1, 13)]
    sys = doubling_cosine()
    diag = captivity_diagnostic(CocycleContext(sys), 0, 12, TrapZone.standard(sys))
    rates = diag.rates[3:]
    decreasing = bool(np.all(np.diff(rates) < 0))
    elapsed = time.perf_counter() - t0
    return bool(exact and decreasing and elapsed < 120), {
        "constant_ceiling_counts": const,
        "doubling_cosine_counts": diag.counts,
        "rates_n4_to_n12": rates,
        "strictly_decreasing": decreasing,
        "under_two_minutes": elapsed < 120,
    }


def escape_lemma() -> tuple[bool, dict]:
    fam = doubling_cosine_family()
    eps0 = epsilon_floor(fam)
    zone = TrapZone.standard(fam.base)
    rng = np.random.default_rng(8)
    violations = {}
    worst = math.inf
    for eps in (0.0, eps0 / 2):
        ctx = family_context(eps)
        bad = 0
        for j in range(8):
            sys = ctx.system(j)
            y = rng.uniform(0, 1, 1000)
            eta = rng.choice([-1.0, 1.0], 1000) * zone.R * np.exp(rng.uniform(1e-9, math.log(100), 1000))
            for branch in range(sys.k):
                x = sys.branch(y, branch)
                xi = sys.dE(x) * eta + sys.dtau(x)
                ratio = np.abs(xi) / (zone.kappa * np.abs(eta))
                bad += int(np.sum(ratio <= 1))
                worst = min(worst, float(ratio.min()))
        violations[f"eps={eps}"] = bad
    return sum(violations.values()) == 0, {
        "epsilon_floor": eps0,
        "R_kappa": zone.R,
        "violations": violations,
        "smallest_ratio": worst,
    }


def sandwich() -> tuple[bool, dict]:
    zone = TrapZone.standard(doubling_cosine())
    rows = []
    for eps, js in ((0.0, [0]), (0.01, starts())):
        ctx = family_context(eps)
        sol = StableGraphSolution.for_zone(ctx, zone)
        for j in js:
            for n in range(1, 11):
                s = sandwich_check(ctx, j, n, zone, sol=sol)
                rows.append([eps, j, n, s.lower, s.N, s.upper, s.holds])
    return all(r[-1] for r in rows), {"rows": rows}


def noise_bracketing() -> tuple[bool, dict]:
    fam = doubling_cosine_family()
    zone = TrapZone.standard(fam.base)
    R = zone.R
    varrho = (zone.kappa - 1) * R
    found = {}
    for n in (2, 4, 6):
        br = noise_bracket(
            fam, noise_path(fam.d), n, R, varrho, (0.1, 0.05, 0.02, 0.01, 0.005), starts(), ZoneGrid().ys(), zone
        )
        found[n] = br.eps_n
    return all(v > 0 for v in found.values()), {"eps_n": found, "varrho": varrho}


def egorov(nus=(64, 128, 256, 512)) -> tuple[bool, dict]:
    sys = doubling_cosine()
    ctx = CocycleContext(sys)
    zone = TrapZone.standard(sys)
    spec = EscapeSpec.for_zone(zone, 6)
    n = 4
    field_ = principal_symbol(ctx, 0, n, spec, np.arange(256) / 256, np.linspace(-zone.R, zone.R, 2049))
    bound = symbol_bound(ctx, 0, n, spec, zone)
    rows = []
    for nu in nus:
        xi = math.ceil(nu * (zone.R + spec.delta0) * 1.1 / (2 * math.pi))
        r = pq_operators(ctx, nu, FrequencyGrid(xi), 0, n, spec, method="direct")
        rows.append({"nu": nu, "xi": xi, "norm_P": r.norm_P, "identity_gap": r.identity_gap,
                     "excess": r.norm_P - field_.sup})
        del r
    gaps = [abs(r["excess"]) for r in rows]
    identity = all(r["identity_gap"] <= 1e-8 for r in rows)
    shrinking = all(b <= a for a, b in zip(gaps, gaps[1:]))
    below = bool(np.all(field_.values <= bound.B))
    return identity and shrinking and below, {
        "rows": rows,
        "sup_p": field_.sup,
        "B": bound.B,
        "absolute_excess_non_increasing": shrinking,
        "symbol_below_bound": below,
    }


def correlations() -> tuple[bool, dict]:
    phi = Observable2D.random(1, 2, 3)
    psi = Observable2D.random(2, 2, 3)
    cases = {
        "doubling-cosine": CocycleContext(doubling_cosine()),
        "bump": CocycleContext(bump_system()),
        "noisy eps=0.05": family_context(0.05),
    }
    worst = 0.0
    per = {}
    for name, ctx in cases.items():
        errs = []
        for n in range(5):
            for classical, fn in ((False, cor_op), (True, cor_cl)):
                errs.append(abs(fn(ctx, 0, n, phi, psi) - cor_direct(ctx, 0, n, phi, psi, classical)))
        per[name] = max(errs)
        worst = max(worst, per[name])
    series = correlation_series(
        family_context(0.01), 0, 12, Observable2D.random(1), Observable2D.random(2)
    )
    # negative control: a single neutral mode, whose correlation keeps constant modulus
    rng = np.random.default_rng(3)
    one_mode = lambda: Observable2D({1: rng.normal(size=7) + 1j * rng.normal(size=7)})  # noqa: E731
    control = correlation_series(CocycleContext(constant_ceiling()), 0, 12, one_mode(), one_mode())
    ok = worst <= 1e-6 and series.rho < 1 and series.residual < 0.5 and control.rho >= 0.99
    return ok, {
        "mode_sum_vs_quadrature": per,
        "decay_rho": series.rho,
        "decay_residual": series.residual,
        "control_rho": control.rho,
    }


def transversality() -> tuple[bool, dict]:
    const = transversality_vs_captivity(constant_ceiling(), 12)
    cos_rows = transversality_vs_captivity(doubling_cosine(), 10)
    phi_const = [r["phi"] for r in const]
    root = cos_rows[-1]["phi"] ** (1 / 10)
    ok = all(p == 1.0 for p in phi_const) and root < 1 and all(r["holds"] for r in cos_rows)
    return ok, {
        "constant_ceiling_phi": phi_const,
        "doubling_cosine_phi": [r["phi"] for r in cos_rows],
        "phi10_root": root,
        "counts_below_bound": [r["holds"] for r in cos_rows],
    }


def perturbation() -> tuple[bool, dict]:
    fam = doubling_cosine_family()
    rows = perturbation_distance(
        fam, noise_path(fam.d), 1, 2, 2, (0.08, 0.04, 0.02, 0.01), starts(), FrequencyGrid(32)
    )
    d = [r["distance"] for r in rows]
    ratios = [a / b for a, b in zip(d, d[1:])]
    return all(r >= 1.5 for r in ratios), {"distances": d, "halving_ratios": ratios}


LATE_GROWTH = 1.25


def weak_lasota_yorke() -> tuple[bool, dict]:
    fam = doubling_cosine_family()
    eps0 = epsilon_floor(fam)
    recs = bounded_norms(fam, noise_path(fam.d), range(5), range(5), (0.0, eps0 / 4, eps0 / 2), starts(4))
    ok = all(r.late <= LATE_GROWTH * r.early for r in recs)
    return ok, {
        "constants": {f"nu={r.nu:g} m={r.m:g}": r.constant for r in recs},
        "late_over_early": {f"nu={r.nu:g} m={r.m:g}": r.late_ratio for r in recs},
    }


def _small_configs() -> dict:
    base = {
        "schema_version": 1,
        "system": {"k": 2, "g": {"const": 0.0, "cos": [], "sin": []}, "tau": {"const": 0.0, "cos": [1.0], "sin": []}},
        "noise": {
            "seed": 5,
            "J": 64,
            "epsilon": 0.01,
            "map_basis": [{"id": "sin1", "scale": 1 / (2 * math.pi)}],
            "ceiling_basis": [{"id": "sin1", "scale": 1.0}],
        },
    }
    cmds = {
        "spectrum": {"nu": [0, 1], "xi_ladder": [8, 16]},
        "lyapunov": {"nu": [0, 2], "n_max": 6, "samples": 2, "xi": 16},
        "density": {"xi": 16, "points": 64, "n_pullback": 20},
        "captivity": {"n_max": 6, "ny": 16},
        "egorov": {"nu": [16], "n": 2, "symbol_ny": 32, "symbol_neta": 65},
        "cohomology": {"n_max": 4, "samples": 2, "ny": 16},
        "transversality": {"n_max": 6, "ny": 16},
        "correlations": {"n_max": 6, "xi": 16},
        "perturbation-distance": {"samples": 2, "xi": 16},
    }
    out = {}
    for name, params in cmds.items():
        cfg = json.loads(json.dumps(base))
        cfg["command"] = {"name": name, **params}
        if name in ("spectrum", "transversality"):
            cfg.pop("noise")
        out[name] = cfg
    return out


def _run_twice(name: str, cfg: dict, root: Path) -> bool:
    from .cli import run

    cfg_path = root / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    outs = []
    for rep in ("a", "b"):
        out = root / name / rep
        code = run(name, cfg_path, out)
        if code != 0:
            return False
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "timing.json"})
    return outs[0] == outs[1]


def determinism() -> tuple[bool, dict]:
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        for name, cfg in _small_configs().items():
            same[name] = _run_twice(name, cfg, Path(tmp))
    # criterion payloads serialise identically as well
    from .cli import dumps

    for fn in (shift_structure, duality_symmetry, perturbation):
        same[fn.__name__] = dumps(fn()[1]) == dumps(fn()[1])
    return all(same.values()), {"identical": same}


CRITERIA = {
    1: ("shift structure", shift_structure),
    2: ("Bessel oracle", bessel_oracle),
    3: ("duality and conjugate-mode symmetry", duality_symmetry),
    4: ("invariant density", density_checks),
    5: ("peripheral spectrum", peripheral_spectrum),
    6: ("Lyapunov exponents", lyapunov_signs),
    7: ("captivity counts", captivity_counts),
    8: ("escape lemma", escape_lemma),
    9: ("stable-graph sandwich", sandwich),
    10: ("noise bracketing", noise_bracketing),
    11: ("Egorov comparison", egorov),
    12: ("correlations", correlations),
    13: ("transversality", transversality),
    14: ("perturbation distance", perturbation),
    15: ("weak Lasota-Yorke bound", weak_lasota_yorke),
    16: ("determinism", determinism),
}

FAST = (1, 2, 3, 4, 5, 6, 7, 8, 12, 13, 14, 15, 16)
SUITES = {"fast": FAST, "full": tuple(CRITERIA)}


def run_criterion(number: int) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, title, bool(passed), details, time.perf_counter() - t0)


def run_suite(name: str, echo: bool = False) -> list[CriterionResult]:
    from .golden import golden_check

    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}")
    out = []
    for number in SUITES[name]:
        r = run_criterion(number)
        if echo:
            print(r.line(), flush=True)
        out.append(r)
    t0 = time.perf_counter()
    ok, details = golden_check()
    g = CriterionResult(0, "golden baselines", ok, details, time.perf_counter() - t0)
    if echo:
        print(g.line(), flush=True)
    out.append(g)
    return out
