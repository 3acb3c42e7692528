import json
import math

import numpy as np
import pytest

from treedistort import io
from treedistort.cli import main, report_rows
from treedistort.metric_core import build_tree


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bound_asymptotic_m16(capsys):
    code, out, _ = run(["bound", "--m", "16", "--p", "2", "--method", "asymptotic", "--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["results"][0]["value"] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert doc["manifest"]["subcommand"] == "bound"
    assert doc["manifest"]["params"]["m"] == 16


def test_bound_huge_n(capsys):
    code, out, _ = run(["bound", "--n", str(2**128), "--p", "2", "--method", "asymptotic", "--json"], capsys)
    assert code == 0
    assert json.loads(out)["results"][0]["m"] == 128


def test_bound_both_text(capsys):
    code, out, _ = run(["bound", "--m", "1", "--p", "2"], capsys)
    assert code == 0
    assert "iterative: m=1" in out and "asymptotic: m=1" in out


def test_bound_csv(capsys):
    code, out, _ = run(["bound", "--m", "4", "--p", "3", "--csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "m,method,value,p,c,tau"
    assert len(lines) == 3


def test_bound_small_p_warns(capsys):
    code, out, _ = run(["bound", "--m", "4", "--p", "1.5", "--method", "asymptotic"], capsys)
    assert code == 0
    assert "warning" in out


def test_bound_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bound", "--p", "2"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["bound", "--n", "-5", "--p", "2"])
    assert info.value.code == 2
    capsys.readouterr()


def test_bound_domain_error(capsys):
    code, _, err = run(["bound", "--m", "0", "--p", "2"], capsys)
    assert code == 1 and "error" in err
    code, _, err = run(["bound", "--m", "3", "--p", "2", "--tau", "1.5"], capsys)
    assert code == 1


def test_modulus_numeric_vs_analytic(capsys):
    code, out, _ = run(["modulus", "--p", "4", "--dim", "2", "--eps", "1", "--numeric", "--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["analytic"] == pytest.approx(0.016005, abs=1e-6)
    assert abs(doc["difference"]) <= 1e-3
    assert len(doc["numeric"]["x"]) == 2


def test_modulus_small_p_is_numeric_only(capsys):
    code, out, _ = run(["modulus", "--p", "1.5", "--dim", "2", "--eps", "0.5", "--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert "analytic" not in doc and doc["numeric"]["value"] > 0


def test_modulus_bad_eps(capsys):
    code, _, _ = run(["modulus", "--p", "2", "--dim", "2", "--eps", "3"], capsys)
    assert code == 1


def test_report_rows_and_csv(tmp_path, capsys):
    rows = report_rows(2.0, [1, 4, 16, 64])
    for m, it, asym, ratio in rows:
        assert ratio == pytest.approx(asym / it)
        assert 0 < ratio <= 1.05
    assert rows[-1][3] > 0.99
    path = tmp_path / "r.csv"
    code, _, _ = run(["report", "--p", "2", "--m-list", "1,4,16,64", "--csv", str(path)], capsys)
    assert code == 0
    header, body = io.read_csv(path)
    assert header == ["m", "iterative", "asymptotic", "ratio"]
    for (m, it, asym, ratio), line in zip(rows, body):
        assert int(line[0]) == m
        assert float(line[1]) == it and float(line[2]) == asym and float(line[3]) == ratio
    assert path.read_text().startswith("# manifest: ")


def test_report_bad_list(capsys):
    code, _, err = run(["report", "--p", "2", "--m-list", "1,x"], capsys)
    assert code == 2 and "m-list" in err


def test_embed_then_certify(tmp_path, capsys):
    out = tmp_path / "e.json"
    hist = tmp_path / "h.csv"
    argv = ["embed", "--depth", "4", "--p", "2", "--dim", "4", "--restarts", "2",
            "--steps", "300", "--out", str(out), "--history", str(hist)]
    code, text, _ = run(argv, capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["distortion"] >= doc["lower_bound"]
    assert doc["manifest"]["seed"] == 42
    assert len(doc["points"]) == 31
    header, rows = io.read_csv(hist)
    assert header == ["restart", "step", "objective", "exact_distortion_snapshot"]
    assert rows

    first = doc["points"]
    run(argv, capsys)
    assert json.loads(out.read_text())["points"] == first

    trace = tmp_path / "t.json"
    code, text, _ = run(["certify", "--input", str(out), "--trace", str(trace)], capsys)
    assert code == 0
    assert "PASS" in text
    tdoc = json.loads(trace.read_text())
    assert len(tdoc["levels"]) == 2
    assert tdoc["certified_statement"]["m"] == 2
    assert "manifest" in tdoc


def test_certify_hand_built_t2(tmp_path, capsys):
    # root at origin, children at +-1, grandchildren spread on a unit circle around them
    pts = [[0, 0], [1, 0], [-1, 0], [2, 0.5], [2, -0.5], [-2, 0.5], [-2, -0.5]]
    doc = {"tree_depth": 2, "space": {"p": 2.0, "dim": 2}, "points": pts}
    path = tmp_path / "t2.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(["certify", "--input", str(path), "--json"], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["verdict"] == "PASS" and res["levels"] == 1 and res["m"] == 1


def test_certify_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"tree_depth": 2,\n "points": [1, 2,,]}')
    code, _, err = run(["certify", "--input", str(bad)], capsys)
    assert code == 1 and f"{bad}:2:" in err

    shallow = tmp_path / "t1.json"
    shallow.write_text(json.dumps({"tree_depth": 1, "space": {"p": 2.0, "dim": 1},
                                   "points": [[0], [1], [-1]]}))
    code, _, err = run(["certify", "--input", str(shallow)], capsys)
    assert code == 2

    code, _, _ = run(["certify", "--input", str(tmp_path / "missing.json")], capsys)
    assert code == 1


def test_embed_unwritable_out(tmp_path, capsys):
    code, _, err = run(["embed", "--depth", "2", "--p", "2", "--dim", "2", "--steps", "10",
                        "--out", str(tmp_path / "no" / "such" / "dir.json")], capsys)
    assert code == 1


def test_json_floats_roundtrip_exactly():
    vals = [0.1, 1 / 3, 1e-300, 2.0**-1074, 123456789.0, -0.0, 1e22]
    text = io.dumps({"v": vals, "n": 3, "ok": True, "none": None, "arr": np.array([0.5, 2.5])})
    back = json.loads(text)
    assert back["v"] == vals
    assert back["arr"] == [0.5, 2.5] and back["n"] == 3 and back["ok"] is True
    assert io.format_real(2.0) == "2.0"
    assert io.format_real(float("inf")) == "Infinity"


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "x.csv"
    rows = [(1, 0.1, 1 / 3), (2, 1e-17, 5.0)]
    io.write_csv(path, ["i", "a", "b"], rows)
    header, body = io.read_csv(path)
    assert header == ["i", "a", "b"]
    assert [(int(i), float(a), float(b)) for i, a, b in body] == rows


def test_manifest_fields():
    m = io.RunManifest("bound", {"m": 3}, seed=1).finish()
    d = m.to_dict()
    assert set(d) == {"subcommand", "params", "seed", "version", "wall_time"}
    assert d["wall_time"] >= 0


def test_tree_size_limit_cli(capsys):
    code, _, _ = run(["embed", "--depth", "0", "--p", "2", "--dim", "2", "--steps", "5",
                      "--out", "/dev/null"], capsys)
    assert code == 1
    assert build_tree(0).n_vertices == 1
