"""Regression baselines stored as package data and compared on every verify run.

Baselines are produced once by ``python3 -m quenched.golden`` (from the
independent oracles where one exists) and committed.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import jv

BASELINE_FILE = "baselines.json"
TOLERANCE = 1e-9


def _bessel_matrix(nu: float, xi: int) -> np.ndarray:
    modes = np.arange(-xi, xi + 1)
    n = modes[None, :] - 2 * modes[:, None]
    return (-1j) ** (n % 4) * jv(n, nu)


def build_baselines() -> dict:
    """Reference values: oracle matrices plus frozen counts from the doubling+cosine system."""
    from .captivity import TrapZone, count_trapped
    from .cohomology import transversality_vs_captivity
    from .dynamics import CocycleContext, doubling_cosine

    M = _bessel_matrix(1.0, 4)
    sys = doubling_cosine()
    zone = TrapZone.standard(sys)
    ctx = CocycleContext(sys)
    return {
        "bessel_nu1_xi4": {"re": M.real.tolist(), "im": M.imag.tolist()},
        "captivity_counts": [count_trapped(ctx, 0, n, zone).N for n in range(1, 11)],
        "transversality_phi": [r["phi"] for r in transversality_vs_captivity(sys, 8)],
    }


def current_values() -> dict:
    """The same quantities computed by the library's own code paths."""
    from .captivity import TrapZone, count_trapped
    from .cohomology import transversality_vs_captivity
    from .dynamics import CocycleContext, doubling, doubling_cosine
    from .transfer import FrequencyGrid, assemble

    M = assemble(doubling_cosine(), 1.0, FrequencyGrid(4)).entries
    sys = doubling_cosine()
    zone = TrapZone.standard(sys)
    ctx = CocycleContext(sys)
    return {
        "bessel_nu1_xi4": {"re": M.real.tolist(), "im": M.imag.tolist()},
        "captivity_counts": [count_trapped(ctx, 0, n, zone).N for n in range(1, 11)],
        "transversality_phi": [r["phi"] for r in transversality_vs_captivity(sys, 8)],
    }


def load(path=None) -> dict:
    if path is None:
        text = resources.files("quenched").joinpath("golden", BASELINE_FILE).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


def compare(expected, actual, tol: float = TOLERANCE, where: str = "") -> list[str]:
    """Mismatch descriptions between two nested JSON-like values (empty when equal)."""
    if isinstance(expected, dict):
        if not isinstance(actual, dict) or set(expected) != set(actual):
            return [f"{where}: keys differ"]
        return [m for k in sorted(expected) for m in compare(expected[k], actual[k], tol, f"{where}/{k}")]
    if isinstance(expected, list):
        if not isinstance(actual, list) or len(expected) != len(actual):
            return [f"{where}: length differs"]
        return [m for i, (e, a) in enumerate(zip(expected, actual)) for m in compare(e, a, tol, f"{where}[{i}]")]
    if abs(float(expected) - float(actual)) > tol:
        return [f"{where}: expected {expected!r}, got {actual!r}"]
    return []


def golden_check(path=None) -> tuple[bool, dict]:
    mismatches = compare(load(path), current_values())
    return not mismatches, {"mismatches": mismatches[:20]}


def write_baselines(path=None) -> Path:
    path = Path(path) if path else Path(__file__).with_name("golden") / BASELINE_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(build_baselines(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


if __name__ == "__main__":
    print(write_baselines())
