import json
import math
import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from quenched import cli
from quenched.acceptance import _small_configs
from quenched.config import COMMAND_DEFAULTS, ExperimentConfig
from quenched.errors import ConfigError

BASE = {"schema_version": 1, "system": {"k": 2}, "command": {"name": "spectrum"}}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


finite = st.floats(-3, 3, allow_nan=False)


@given(
    st.integers(2, 4),
    st.lists(finite, max_size=3),
    st.lists(finite, max_size=3),
    st.sampled_from(sorted(COMMAND_DEFAULTS)),
    st.integers(0, 2**64 - 1),
)
def test_config_round_trip(k, cos, sin, command, seed):
    d = {
        "schema_version": 1,
        "system": {"k": k, "tau": {"cos": cos, "sin": sin}},
        "noise": {"seed": seed, "J": 16, "epsilon": 0.01, "map_basis": [{"id": "sin2", "scale": 0.1}]},
        "command": {"name": command},
    }
    cfg = ExperimentConfig.from_dict(d)
    again = ExperimentConfig.from_dict(json.loads(cfg.dumps()))
    assert again == cfg and again.dumps() == cfg.dumps()


@pytest.mark.parametrize(
    "patch",
    [
        {"extra": 1},
        {"system": {"k": 2, "h": {}}},
        {"command": {"name": "spectrum", "bogus": 1}},
        {"command": {"name": "teleport"}},
        {"schema_version": 2},
        {"system": {"k": 1}},
        {"noise": {"seed": -1}},
        {"noise": {"seed": 1, "map_basis": [{"id": "tan1"}]}},
        {"command": {"name": "spectrum", "m": "two"}},
    ],
)
def test_config_rejections(patch):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, **patch})


def test_basis_ids_build_expected_family():
    cfg = ExperimentConfig.from_dict(_small_configs()["lyapunov"])
    _, fam, path = cfg.build_context()
    assert fam.map_basis[0].sin[0] == pytest.approx(1 / (2 * math.pi))
    assert path.seed == 5


def test_run_spectrum_doubling(tmp_path):
    code = cli.main(["run", "spectrum", str(write(tmp_path, BASE)), str(tmp_path / "out")])
    assert code == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["status"] == "ok" and rep["library_version"]
    lines = (tmp_path / "out" / "eigenvalues.csv").read_text().splitlines()
    assert lines[0] == "nu,re,im,abs,resonance"
    assert lines[1] == "0,1,0,1,true"
    assert all(abs(float(l.split(",")[3])) <= 1e-10 for l in lines[2:])


def test_run_captivity_constant_ceiling(tmp_path):
    cfg = {**BASE, "system": {"k": 2, "tau": {"const": 1.0}}, "command": {"name": "captivity", "n_max": 8}}
    out = tmp_path / "out"
    assert cli.main(["run", "captivity", "--config", str(write(tmp_path, cfg)), "--out", str(out)]) == 0
    rows = (out / "captivity.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[2]) == pytest.approx(math.log(2), abs=1e-11) for r in rows)


def test_byte_identical_reruns_and_seed_override(tmp_path):
    cfg = write(tmp_path, _small_configs()["lyapunov"])
    for d in ("a", "b"):
        assert cli.main(["run", "lyapunov", str(cfg), str(tmp_path / d)]) == 0
    for name in ("report.json", "norms.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "timing.json").exists()
    assert cli.main(["run", "lyapunov", str(cfg), str(tmp_path / "c"), "--seed-override", "99"]) == 0
    rep = json.loads((tmp_path / "c" / "report.json").read_text())
    assert rep["config"]["noise"]["seed"] == 99
    assert (tmp_path / "c" / "norms.csv").read_bytes() != (tmp_path / "a" / "norms.csv").read_bytes()


def test_exit_codes(tmp_path):
    bad = write(tmp_path, {**BASE, "colour": 1}, "bad.json")
    assert cli.main(["run", "spectrum", str(bad), str(tmp_path / "o1")]) == 1
    assert cli.main(["run", "spectrum", str(tmp_path / "missing.json"), str(tmp_path / "o2")]) == 1
    short = {
        **BASE,
        "noise": {"seed": 1, "J": 5, "epsilon": 0.01, "map_basis": [{"id": "sin1", "scale": 0.1}]},
        "command": {"name": "density"},
    }
    out = tmp_path / "o3"
    assert cli.main(["run", "density", str(write(tmp_path, short, "short.json")), str(out)]) == 2
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "failed" and "WindowExhausted" in rep["error"]
    no_noise = write(tmp_path, {**BASE, "command": {"name": "perturbation-distance"}}, "nn.json")
    assert cli.main(["run", "perturbation-distance", str(no_noise), str(tmp_path / "o4")]) == 1


def test_thread_cap(monkeypatch):
    for var in cli._BLAS_VARS:
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv(cli.THREAD_ENV, "3")
    cli._limit_threads(None)
    assert os.environ["OPENBLAS_NUM_THREADS"] == "3"
    cli._limit_threads(1)
    assert os.environ["OMP_NUM_THREADS"] == "1"


def test_rounding_is_twelve_digits():
    assert cli.rounded(1 / 3) == 0.333333333333
    assert cli.rounded({"z": 1 + 2j, "b": [True, None]}) == {"z": [1.0, 2.0], "b": [True, None]}
    assert cli.csv_text(["a"], [[0.1 + 0.2]]) == "a\n0.3\n"


@pytest.mark.parametrize("name", sorted(COMMAND_DEFAULTS))
def test_every_command_runs(name, tmp_path):
    cfg = write(tmp_path, _small_configs()[name])
    assert cli.main(["run", name, str(cfg), str(tmp_path / "out")]) == 0
    assert list((tmp_path / "out").glob("*.csv"))
