"""Experiment configuration: strict JSON schema with lossless round trips."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigError

SCHEMA_VERSION = 1

# per-command parameters and their defaults
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "spectrum": {"nu": [0], "m": 2, "xi_ladder": [16, 32], "stab_tol": 1e-4, "dump_matrices": False},
    "lyapunov": {"nu": [0], "m": 3, "n_max": 12, "samples": 4, "xi": 32},
    "density": {"j": 0, "n_pullback": 40, "xi": 32, "tol": 1e-8, "points": 512},
    "captivity": {"n_max": 12, "j0": 0, "ny": 64, "neta": 65, "zone_scale": 1.0},
    "egorov": {"nu": [64], "n": 4, "m": 6, "j0": 0, "xi_factor": 1.1, "symbol_ny": 256, "symbol_neta": 2049},
    "cohomology": {"n_max": 10, "samples": 1, "ny": 64, "tol": 1e-10},
    "transversality": {"n_max": 10, "ny": 64},
    "correlations": {
        "n_max": 12,
        "j0": 0,
        "phi_seed": 1,
        "psi_seed": 2,
        "nu_max": 3,
        "a_max": 3,
        "xi": 32,
        "classical": False,
    },
    "perturbation-distance": {
        "nu": 1,
        "n": 2,
        "m": 2,
        "eps_grid": [0.08, 0.04, 0.02, 0.01],
        "samples": 8,
        "xi": 32,
    },
}

_TRIG_KEYS = {"const", "cos", "sin"}
_BASIS_ID = re.compile(r"^(sin|cos)(\d+)$")


def _check_keys(block: dict, allowed: set, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where} must be a finite number")
    return float(v)


def _trig(d, where: str) -> dict:
    _check_keys(d, _TRIG_KEYS, where)
    out = {"const": _number(d.get("const", 0.0), f"{where}.const")}
    for key in ("cos", "sin"):
        vals = d.get(key, [])
        if not isinstance(vals, list):
            raise ConfigError(f"{where}.{key} must be a list")
        out[key] = [_number(v, f"{where}.{key}") for v in vals]
    return out


def _basis(entry, where: str) -> dict:
    """A basis direction: ``{"id": "sin1", "scale": s}`` or an explicit trig polynomial."""
    if isinstance(entry, dict) and "id" in entry:
        _check_keys(entry, {"id", "scale"}, where)
        if not isinstance(entry["id"], str) or not _BASIS_ID.match(entry["id"]):
            raise ConfigError(f"{where}.id must look like 'sin<j>' or 'cos<j>'")
        return {"id": entry["id"], "scale": _number(entry.get("scale", 1.0), f"{where}.scale")}
    return _trig(entry, where)


def basis_polynomial(entry: dict):
    from .dynamics import TrigPolynomial

    if "id" in entry:
        kind, j = _BASIS_ID.match(entry["id"]).groups()
        coef = [0.0] * (int(j) - 1) + [entry["scale"]]
        return TrigPolynomial(0.0, coef if kind == "cos" else (), coef if kind == "sin" else ())
    return TrigPolynomial.from_dict(entry)


@dataclass
class ExperimentConfig:
    system: dict
    command: str
    params: dict
    noise: Optional[dict] = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _check_keys(d, {"schema_version", "system", "noise", "command"}, "config")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
        if "system" not in d or "command" not in d:
            raise ConfigError("config needs 'system' and 'command' blocks")
        sysb = d["system"]
        _check_keys(sysb, {"k", "g", "tau"}, "system")
        k = sysb.get("k", 2)
        if isinstance(k, bool) or not isinstance(k, int) or k < 2:
            raise ConfigError("system.k must be an integer >= 2")
        system = {"k": k, "g": _trig(sysb.get("g", {}), "system.g"), "tau": _trig(sysb.get("tau", {}), "system.tau")}
        noise = None
        if d.get("noise") is not None:
            nb = d["noise"]
            _check_keys(nb, {"seed", "J", "epsilon", "map_basis", "ceiling_basis"}, "noise")
            seed = nb.get("seed", 0)
            J = nb.get("J", 128)
            if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
                raise ConfigError("noise.seed must be an unsigned 64-bit integer")
            if isinstance(J, bool) or not isinstance(J, int) or J < 1:
                raise ConfigError("noise.J must be a positive integer")
            eps = _number(nb.get("epsilon", 0.0), "noise.epsilon")
            if eps < 0:
                raise ConfigError("noise.epsilon must be non-negative")
            noise = {
                "seed": seed,
                "J": J,
                "epsilon": eps,
                "map_basis": [_basis(e, f"noise.map_basis[{i}]") for i, e in enumerate(nb.get("map_basis", []))],
                "ceiling_basis": [
                    _basis(e, f"noise.ceiling_basis[{i}]") for i, e in enumerate(nb.get("ceiling_basis", []))
                ],
            }
        cb = d["command"]
        if not isinstance(cb, dict) or "name" not in cb:
            raise ConfigError("command block needs a 'name'")
        name = cb["name"]
        if name not in COMMAND_DEFAULTS:
            raise ConfigError(f"unknown command {name!r}")
        defaults = COMMAND_DEFAULTS[name]
        _check_keys(cb, set(defaults) | {"name"}, f"command[{name}]")
        params = {}
        for key, dv in defaults.items():
            v = cb.get(key, dv)
            params[key] = _coerce(v, dv, f"command.{key}")
        return cls(system, name, params, noise, SCHEMA_VERSION)

    def to_dict(self) -> dict:
        d = {"schema_version": self.schema_version, "system": self.system, "command": {"name": self.command, **self.params}}
        if self.noise is not None:
            d["noise"] = self.noise
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_dict(data)

    def with_command(self, name: str) -> "ExperimentConfig":
        """Same system and noise, different command (its parameters at defaults)."""
        return ExperimentConfig(self.system, name, dict(COMMAND_DEFAULTS[name]), self.noise)

    # builders --------------------------------------------------------------
    def build_system(self):
        from .dynamics import CircleDiffeo, SkewProductSystem, TrigPolynomial

        try:
            return SkewProductSystem(
                self.system["k"],
                CircleDiffeo(TrigPolynomial.from_dict(self.system["g"])),
                TrigPolynomial.from_dict(self.system["tau"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_context(self):
        """Deterministic context, or a noisy one when a noise block is present."""
        from .dynamics import CocycleContext
        from .noise import PerturbationFamily, sample_path

        sys = self.build_system()
        if self.noise is None:
            return CocycleContext(sys), None, None
        fam = PerturbationFamily(
            sys,
            tuple(basis_polynomial(e) for e in self.noise["map_basis"]),
            tuple(basis_polynomial(e) for e in self.noise["ceiling_basis"]),
        )
        path = sample_path(self.noise["seed"], self.noise["J"], max(fam.d, 1))
        return CocycleContext(sys, fam, path, self.noise["epsilon"]), fam, path


def _coerce(v, default, where: str):
    if isinstance(default, bool):
        if not isinstance(v, bool):
            raise ConfigError(f"{where} must be a boolean")
        return v
    if isinstance(default, int):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where} must be an integer")
        return v
    if isinstance(default, float):
        return _number(v, where)
    if isinstance(default, list):
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{where} must be a non-empty list")
        return [_coerce(x, default[0], where) for x in v]
    return v
