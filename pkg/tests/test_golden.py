import json

from quenched.golden import build_baselines, compare, golden_check, load


def test_committed_baselines_match_library():
    ok, details = golden_check()
    assert ok, details["mismatches"]


def test_committed_baselines_match_oracles():
    assert compare(load(), build_baselines()) == []


def test_tampered_entry_fails(tmp_path):
    data = load()
    data["bessel_nu1_xi4"]["re"][3][4] += 1e-6
    p = tmp_path / "tampered.json"
    p.write_text(json.dumps(data))
    ok, details = golden_check(p)
    assert not ok and "bessel_nu1_xi4/re[3][4]" in details["mismatches"][0]
