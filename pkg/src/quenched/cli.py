"""Command line: ``quenched run <command> <config> <out>`` and ``quenched verify fast|full``.

Numerical modules are imported after argument parsing so that ``--threads``
(or ``QUENCHED_THREADS``) can cap BLAS threads before numpy loads.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__

THREAD_ENV = "QUENCHED_THREADS"
_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
SIG_DIGITS = 12

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


# ---------------------------------------------------------------------------
# serialisation


def rounded(x):
    """Recursively round floats to 12 significant digits; complex becomes [re, im]."""
    if isinstance(x, bool) or x is None or isinstance(x, (str, int)):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(x, complex):
        return [rounded(x.real), rounded(x.imag)]
    if isinstance(x, dict):
        return {str(k): rounded(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [rounded(v) for v in x]
    # numpy scalars and arrays
    if hasattr(x, "tolist"):
        return rounded(x.tolist())
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj) -> str:
    return json.dumps(rounded(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return v


class Report:
    """Accumulates results so that a failing command still leaves a partial report."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.results: dict = {}
        self.metadata: dict = {}
        self.tables: dict = {}

    def table(self, name: str, header, rows) -> None:
        self.tables[name] = (list(header), [list(r) for r in rows])

    def payload(self, status: str, error: str | None = None) -> dict:
        out = {
            "library_version": __version__,
            "config": self.cfg.to_dict(),
            "command": self.cfg.command,
            "status": status,
            "results": self.results,
            "metadata": self.metadata,
        }
        if error is not None:
            out["error"] = error
        return out

    def write(self, out_dir: Path, status: str, error: str | None, seconds: float) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(dumps(self.payload(status, error)), encoding="utf-8")
        for name, (header, rows) in sorted(self.tables.items()):
            (out_dir / f"{name}.csv").write_text(csv_text(header, rows), encoding="utf-8")
        # wall-clock lives apart from the numerical payload to keep it byte-stable
        (out_dir / "timing.json").write_text(dumps({"wall_clock_seconds": seconds}), encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def _samples(ctx, count: int, stride: int = 8):
    if ctx.deterministic:
        return [0]
    return [i * stride for i in range(count)]


def cmd_spectrum(cfg, rep: Report) -> None:
    import numpy as np

    from .spectral import peripheral_check, resonances
    from .transfer import FrequencyGrid, assemble, sobolev

    sys_ = cfg.build_system()
    p = cfg.params
    rep.metadata["grids"] = {"xi_ladder": p["xi_ladder"]}
    rows = []
    for nu in p["nu"]:
        r = resonances(sys_, nu, p["m"], p["xi_ladder"], p["stab_tol"])
        rep.results[f"nu={nu}"] = r.to_dict()
        top = r.eigenvalues[r.ladder[-1]]
        stable = set(r.resonances)
        rows += [(nu, z.real, z.imag, abs(z), complex(z) in stable) for z in top]
        if p["dump_matrices"]:
            M = assemble(sys_, nu, FrequencyGrid(r.ladder[-1])).weighted(sobolev(p["m"]))
            rep.table(f"matrix_nu{nu}", ["row", "col", "re", "im"], [
                (i, j, M[i, j].real, M[i, j].imag) for i, j in zip(*np.nonzero(M))
            ])
    rep.table("eigenvalues", ["nu", "re", "im", "abs", "resonance"], rows)
    nonzero = [nu for nu in p["nu"] if nu != 0]
    if nonzero:
        rep.results["peripheral"] = [v.to_dict() for v in peripheral_check(sys_, nonzero, p["m"], max(p["xi_ladder"]))]


def cmd_lyapunov(cfg, rep: Report) -> None:
    from .transfer import FrequencyGrid, sobolev
    from .spectral import lyapunov

    ctx, _, _ = cfg.build_context()
    p = cfg.params
    starts = _samples(ctx, p["samples"])
    rep.metadata["grids"] = {"xi": p["xi"], "starts": starts}
    rows = []
    for nu in p["nu"]:
        est = lyapunov(ctx, nu, sobolev(p["m"]), p["n_max"], starts, FrequencyGrid(p["xi"]))
        rep.results[f"nu={nu}"] = {
            "estimate": est.slope,
            "residual": est.residual,
            "per_sample": est.per_sample,
            "spread": est.spread,
        }
        for j, norms in zip(starts, est.norms):
            rows += [(nu, j, n + 1, v) for n, v in enumerate(norms)]
    rep.table("norms", ["nu", "start", "n", "norm"], rows)


def cmd_density(cfg, rep: Report) -> None:
    import numpy as np

    from .spectral import invariant_density
    from .transfer import FrequencyGrid

    ctx, _, _ = cfg.build_context()
    p = cfg.params
    grid = FrequencyGrid(p["xi"])
    rep.metadata["grids"] = {"xi": p["xi"], "points": p["points"], "n_pullback": p["n_pullback"]}
    h = invariant_density(ctx, p["j"], p["n_pullback"], grid, p["tol"], p["points"])
    xs = np.arange(p["points"]) / p["points"]
    vals = h(xs)
    rep.results.update(
        {"residual": h.residual, "integral": h.integral, "min": h.min_value, "max": float(vals.max())}
    )
    rep.table("density", ["x", "h"], zip(xs, vals))
    rep.table("density_coeffs", ["mode", "re", "im"], [(int(a), c.real, c.imag) for a, c in zip(grid.modes, h.coeffs)])


def cmd_captivity(cfg, rep: Report) -> None:
    from .captivity import TrapZone, ZoneGrid, captivity_diagnostic

    ctx, _, _ = cfg.build_context()
    p = cfg.params
    zone = TrapZone.standard(ctx.base, p["zone_scale"])
    grid = ZoneGrid(p["ny"], p["neta"])
    rep.metadata.update({"zone": zone.to_dict(), "grids": grid.to_dict()})
    d = captivity_diagnostic(ctx, p["j0"], p["n_max"], zone, grid)
    rep.results.update({"infimum": d.infimum, "verdict": d.verdict, "counts": d.counts})
    rep.table("captivity", ["n", "N", "logN_over_n"], d.rows())


def cmd_egorov(cfg, rep: Report) -> None:
    import numpy as np

    from .captivity import EscapeSpec, TrapZone, ZoneGrid, principal_symbol, symbol_bound
    from .transfer import FrequencyGrid, pq_operators

    ctx, _, _ = cfg.build_context()
    p = cfg.params
    zone = TrapZone.standard(ctx.base)
    spec = EscapeSpec.for_zone(zone, p["m"])
    ys = np.arange(p["symbol_ny"]) / p["symbol_ny"]
    etas = np.linspace(-zone.R, zone.R, p["symbol_neta"])
    field = principal_symbol(ctx, p["j0"], p["n"], spec, ys, etas)
    bound = symbol_bound(ctx, p["j0"], p["n"], spec, zone)
    rep.metadata.update({"zone": zone.to_dict(), "escape": spec.to_dict()})
    rep.results.update({"sup_p": field.sup, "argmax": list(field.argmax), "B": bound.B, "N_prev": bound.N_prev})
    rows = []
    for nu in p["nu"]:
        xi = math.ceil(abs(nu) * (zone.R + spec.delta0) * p["xi_factor"] / (2 * math.pi))
        r = pq_operators(ctx, nu, FrequencyGrid(xi), p["j0"], p["n"], spec, method="direct")
        rows.append((nu, xi, r.norm_P, r.norm_Q**2, r.identity_gap, field.sup, r.norm_P - field.sup))
        rep.results[f"nu={nu}"] = {"xi": xi, "norm_P": r.norm_P, "norm_Q": r.norm_Q, "identity_gap": r.identity_gap}
        del r
    rep.table("egorov", ["nu", "xi", "norm_P", "norm_Q_sq", "identity_gap", "sup_p", "excess"], rows)


def cmd_cohomology(cfg, rep: Report) -> None:
    from .captivity import TrapZone, ZoneGrid
    from .cohomology import StableGraphSolution, sandwich_check

    ctx, _, _ = cfg.build_context()
    p = cfg.params
    zone = TrapZone.standard(ctx.base)
    grid = ZoneGrid(p["ny"])
    sol = StableGraphSolution.for_zone(ctx, zone, p["tol"])
    rep.metadata.update({"zone": zone.to_dict(), "grids": grid.to_dict(), "series_depth": sol.depth})
    rows = []
    for j in _samples(ctx, p["samples"]):
        for n in range(1, p["n_max"] + 1):
            s = sandwich_check(ctx, j, n, zone, grid, sol)
            rows.append((j, n, s.lower, s.N, s.upper, s.holds))
    rep.results["all_hold"] = all(r[-1] for r in rows)
    rep.table("sandwich", ["start", "n", "lower", "N", "upper", "holds"], rows)


def cmd_transversality(cfg, rep: Report) -> None:
    from .captivity import TrapZone, ZoneGrid
    from .cohomology import lemma_radius, transversality_vs_captivity

    sys_ = cfg.build_system()
    p = cfg.params
    zone = TrapZone.standard(sys_)
    rows = transversality_vs_captivity(sys_, p["n_max"], zone, ZoneGrid(p["ny"]))
    rep.metadata.update({"zone": zone.to_dict(), "lemma_radius": lemma_radius(sys_, zone)})
    rep.results["all_hold"] = all(r["holds"] for r in rows)
    rep.results["phi_root"] = rows[-1]["phi"] ** (1 / rows[-1]["n"])
    rep.table("transversality", ["n", "N", "phi", "bound", "holds"], [list(r.values()) for r in rows])


def cmd_correlations(cfg, rep: Report) -> None:
    from .correlations import Observable2D, correlation_series
    from .transfer import FrequencyGrid

    ctx, _, _ = cfg.build_context()
    p = cfg.params
    phi = Observable2D.random(p["phi_seed"], p["nu_max"], p["a_max"])
    psi = Observable2D.random(p["psi_seed"], p["nu_max"], p["a_max"])
    rep.metadata["grids"] = {"xi": p["xi"]}
    s = correlation_series(ctx, p["j0"], p["n_max"], phi, psi, p["classical"], FrequencyGrid(p["xi"]))
    rep.results.update(s.to_dict())
    rep.table("correlations", ["n", "re", "im", "abs"], s.rows())


def cmd_perturbation_distance(cfg, rep: Report) -> None:
    from .errors import ConfigError
    from .transfer import FrequencyGrid, perturbation_distance

    _, fam, path = cfg.build_context()
    if fam is None:
        raise ConfigError("perturbation-distance needs a noise block")
    p = cfg.params
    starts = [i * 8 for i in range(p["samples"])]
    rep.metadata["grids"] = {"xi": p["xi"], "starts": starts}
    rows = perturbation_distance(fam, path, p["nu"], p["n"], p["m"], p["eps_grid"], starts, FrequencyGrid(p["xi"]))
    ratios = [a["distance"] / b["distance"] for a, b in zip(rows, rows[1:]) if b["distance"] > 0]
    rep.results.update({"rows": rows, "halving_ratios": ratios})
    rep.table("distance", ["eps", "distance", "telescoping_bound"], [(r["eps"], r["distance"], r["telescoping_bound"]) for r in rows])


COMMANDS = {
    "spectrum": cmd_spectrum,
    "lyapunov": cmd_lyapunov,
    "density": cmd_density,
    "captivity": cmd_captivity,
    "egorov": cmd_egorov,
    "cohomology": cmd_cohomology,
    "transversality": cmd_transversality,
    "correlations": cmd_correlations,
    "perturbation-distance": cmd_perturbation_distance,
}


def run(command: str, config_path, out_dir, seed_override: int | None = None) -> int:
    """Run one command; returns the process exit code."""
    from .config import ExperimentConfig
    from .errors import ConfigError, QuenchedError

    try:
        cfg = ExperimentConfig.load(config_path)
        if cfg.command != command:
            cfg = cfg.with_command(command)
        if seed_override is not None:
            if cfg.noise is None:
                raise ConfigError("--seed-override needs a noise block")
            if not 0 <= seed_override < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg.noise = {**cfg.noise, "seed": seed_override}
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = Report(cfg)
    t0 = time.perf_counter()
    try:
        COMMANDS[command](cfg, rep)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuenchedError, ArithmeticError, ValueError) as exc:
        rep.write(Path(out_dir), "failed", f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rep.write(Path(out_dir), "ok", None, time.perf_counter() - t0)
    return EXIT_OK


def verify(suite: str, out_dir=None) -> int:
    from .acceptance import run_suite

    results = run_suite(suite, echo=True)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(dumps([r.to_dict() for r in results]), encoding="utf-8")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else EXIT_NUMERIC


def _limit_threads(n) -> None:
    if n is None:
        n = os.environ.get(THREAD_ENV)
    if n is None:
        return
    for var in _BLAS_VARS:
        os.environ[var] = str(int(n))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quenched", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--threads", type=int, help=f"BLAS thread cap (default: ${THREAD_ENV})")
    sub = ap.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run one experiment command")
    r.add_argument("command", choices=sorted(COMMANDS))
    r.add_argument("config_pos", nargs="?", metavar="config")
    r.add_argument("out_pos", nargs="?", metavar="out")
    r.add_argument("--config", dest="config_opt")
    r.add_argument("--out", dest="out_opt")
    r.add_argument("--seed-override", type=int)
    r.add_argument("--threads", type=int, dest="threads_sub")
    v = sub.add_parser("verify", help="run the acceptance battery")
    v.add_argument("suite", choices=["fast", "full"])
    v.add_argument("--out")
    v.add_argument("--threads", type=int, dest="threads_sub")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    _limit_threads(getattr(args, "threads_sub", None) or args.threads)
    if args.action == "verify":
        return verify(args.suite, args.out)
    config = args.config_opt or args.config_pos
    out = args.out_opt or args.out_pos
    if config is None or out is None:
        print("config error: run needs a config path and an output directory", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, config, out, args.seed_override)


if __name__ == "__main__":
    sys.exit(main())
