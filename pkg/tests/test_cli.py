import json
import math

import numpy as np
import pytest

from blowup_profiles import cli
from blowup_profiles.model import exponents, Params, explicit_support_edge, sigma_star


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    doc = json.loads(out.out) if out.out.strip() else None
    return code, doc, out


def test_exponents(capsys):
    code, doc, _ = run(capsys, "exponents", "--m", "3", "--sigma", "2")
    assert code == 0
    assert set(doc) >= {"command", "params", "outcome", "tolerances_used"}
    assert (doc["alpha"], doc["beta"]) == (1.0, 0.5)


def test_exponents_sigma_star(capsys):
    code, doc, _ = run(capsys, "exponents", "--m", "7", "--sigma-star")
    assert code == 0
    assert doc["params"]["sigma"] == pytest.approx(4.0, abs=1e-15)
    e = exponents(Params(7.0, 4.0))
    assert doc["alpha"] == pytest.approx(e.alpha, abs=1e-15)


@pytest.mark.parametrize("argv", [
    ["exponents", "--m", "1", "--sigma", "2"],
    ["exponents", "--m", "3", "--sigma", "-1"],
    ["exponents", "--m", "3", "--sigma", "nan"],
    ["exponents", "--m", "3"],
    ["exponents", "--m", "3", "--sigma", "2", "--sigma-star"],
    ["shoot-back", "--m", "3", "--sigma", "2", "--eta", "0"],
    ["find-profile", "--m", "3", "--sigma", "2", "--bracket", "5,10"],
    ["scan-c", "--m", "3", "--sigma", "2", "--grid", "2,1"],
    ["explicit", "--m", "3", "--n", "1"],
    ["nonsense"],
])
def test_invalid_input_exits_2(capsys, argv):
    code, doc, _ = run(capsys, *argv)
    assert code == 2 and doc is None


def test_inconclusive_exits_3(capsys):
    code, doc, _ = run(capsys, "shoot-origin", "--m", "3", "--sigma", "2", "--c", "1", "--max-steps", "5")
    assert code == 3
    assert doc["outcome"] == "Inconclusive"
    assert doc["result"]["termination"]["kind"] == "StepBudgetExhausted"
    assert doc["tolerances_used"]["max_steps"] == 5


def test_output_is_deterministic(capsys, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        cli.main(["shoot-back", "--m", "3", "--sigma", "2", "--eta", "1.5", "--csv", str(path)])
        outs.append((capsys.readouterr().out.replace(str(path), ""), path.read_bytes()))
    assert outs[0] == outs[1]


def test_explicit_csv(capsys, tmp_path):
    path = tmp_path / "explicit.csv"
    code, doc, _ = run(capsys, "explicit", "--m", "3", "--n", "512", "--out", str(path))
    assert code == 0
    assert doc["max_residual"] <= 1e-8
    assert doc["support_edge"] == pytest.approx(explicit_support_edge(3.0), rel=1e-15)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ") and sum(ln.startswith("#") for ln in lines) == 1
    assert lines[1] == "xi,f"
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2)
    assert data.shape == (512, 2)
    assert data[0, 0] == 0.0 and data[0, 1] == 0.0
    assert np.all(data[data[:, 0] >= doc["support_edge"], 1] == 0.0)


def test_explicit_time_slices(capsys, tmp_path):
    path = tmp_path / "slices.csv"
    code, doc, _ = run(capsys, "explicit", "--m", "3", "--n", "16", "--time-slices", "1,0,0.5", "--out", str(path))
    assert code == 0 and doc["time_slices"] == [0.0, 0.5]
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    assert data.shape == (32, 5)
    # at t = 0.5, x = xi * 0.5^(-beta) with beta = 1/2 at sigma_star
    half = data[data[:, 0] == 0.5]
    beta = exponents(Params(3.0, sigma_star(3.0))).beta
    assert np.allclose(half[:, 3], half[:, 1] * 0.5 ** (-beta), rtol=1e-14)
    code, _, _ = run(capsys, "explicit", "--m", "3", "--time-slices", "1,2")
    assert code == 2


def test_find_profile_sigma_star(capsys):
    code, doc, _ = run(capsys, "find-profile", "--m", "3", "--sigma-star", "--bracket", "0.5,10")
    assert code == 0
    assert doc["outcome"] == "GoodCandidate"
    assert abs(doc["explicit"]["eta_error"]) <= 1e-4
    assert doc["explicit"]["max_rel_error"] <= 1e-4


def test_scan_c_large_sigma(capsys, tmp_path):
    path = tmp_path / "scan.csv"
    code, doc, _ = run(capsys, "scan-c", "--m", "4", "--sigma", "4", "--grid", "log:-2:2:13", "--find-interface",
                       "--csv", str(path))
    assert code == 0
    assert doc["tail_intervals"] and doc["transversal_intervals"] and doc["brackets"]
    assert doc["interface"]["result"]["kind"] == "Interface"
    assert doc["interface"]["origin_fit"]["exponent"] == pytest.approx(2.0, rel=0.05)
    assert len(np.loadtxt(path, delimiter=",", skiprows=2)) == 13


def test_phase_orbit_from_p2(capsys, tmp_path):
    path = tmp_path / "orbit.csv"
    code, doc, _ = run(capsys, "phase-orbit", "--m", "4", "--sigma", "2", "--from", "P2", "--csv", str(path))
    assert code == 0
    assert doc["outcome"] == "Tail"
    assert doc["tail_fit"]["drift"] <= 1e-2
    assert math.isfinite(doc["tail_fit"]["lnK"])
    assert path.read_text().splitlines()[1] == "eta,X,Y,Z"


def test_phase_orbit_zero_plane(capsys):
    code, doc, _ = run(capsys, "phase-orbit", "--m", "2", "--sigma", "1", "--from", "P0", "--plane-z0")
    assert code == 0 and doc["outcome"] == "ReachesP2"


def test_scan_sigma(capsys):
    code, doc, _ = run(capsys, "scan-sigma", "--m", "4", "--grid", "0.5", "--c-grid", "log:-1:1:5")
    assert code == 0
    (r,) = doc["reports"]
    assert r["all_tail"] and r["below_proved_all_tail"]


def test_version(capsys):
    assert cli.main(["--version"]) == 0


def test_json_writer():
    assert cli.to_json({"a": [1, 0.1, math.nan, math.inf], "b": None}) == '{"a": [1, 0.10000000000000001, null, null], "b": null}'
    with pytest.raises(TypeError):
        cli.to_json(object())
