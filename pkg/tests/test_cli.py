import json
import subprocess
import sys

import pytest

from smforge import suites
from smforge.cli import dispatch


def call(capsys, *argv):
    code = dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_measure_single_letter(tmp_path, capsys):
    f = tmp_path / "word.txt"
    f.write_text("a\n")
    code, out, _ = call(capsys, "measure", "--delta", "0.01", str(f))
    assert code == 0 and out.strip() == "0.01"


def test_measure_generator_names(tmp_path, capsys):
    f = tmp_path / "word.txt"
    f.write_text("Q1.o Y1.a Y1.b P.p1\n")
    code, out, _ = call(capsys, "measure", "--stage", "lr", "--k", "1", "--delta", "1/4", str(f))
    assert code == 0 and out.strip() == "2.5"


def test_verify_primitive_table(capsys):
    code, out, _ = call(capsys, "verify", "--suite", "primitive")
    assert code == 0
    assert "PASS machines.lrk" in out
    assert "  3 3   23        23" in out


def test_verify_failure_exit(capsys, monkeypatch):
    def broken():
        return suites.Check("machines.broken", False, {}, "forced")
    monkeypatch.setitem(suites.SUITES, "broken", [broken])
    code, out, _ = call(capsys, "verify", "--suite", "broken")
    assert code == 4 and "FAIL machines.broken" in out


def test_verify_json(capsys):
    code, out, _ = call(capsys, "verify", "--suite", "path_length", "--json")
    rep = json.loads(out)
    assert code == 0 and rep["ok"] and rep["checks"][0]["measured"]["words"] == 9841


def test_malformed(tmp_path, capsys):
    assert call(capsys, "nosuch")[0] == 1
    assert call(capsys, "measure", "--delta", "2", "x")[0] == 1
    assert call(capsys, "verify", "--suite", "nosuch")[0] == 1
    bad = tmp_path / "c.json"
    bad.write_text("{\"start\": \"Q1.o nope\", \"history\": []}")
    assert call(capsys, "run", "--stage", "lr", str(bad))[0] == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema": "other/9"}))
    assert call(capsys, "describe", "--config", str(cfg))[0] == 1


def test_precondition(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"start": "Q1.o Y1.a P.p1 Q2.o", "history": ["z1,2"]}))
    code, _, err = call(capsys, "run", "--stage", "lr", "--k", "1", str(f))
    assert code == 2 and "locked" in err
    assert call(capsys, "present", "--stage", "m5", "--variant", "Ga", "--n", "5")[0] == 2


def test_run_and_steps(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"start": "Q1.o Y1.a P.p1 Q2.o", "history": ["z1[a]", "z1,2", "z2[a]"]}))
    code, out, _ = call(capsys, "run", "--stage", "lr", "--k", "1", str(f))
    assert code == 0
    assert json.loads(out)["trace"][-1] == ["Q1.o", "Y1.a", "P.p2", "Q2.o"]
    code, out, _ = call(capsys, "trapezium", "--stage", "lr", "--k", "1", str(f))
    assert code == 0
    d = tmp_path / "t.json"
    d.write_text(out)
    code, out, _ = call(capsys, "bands", "--stage", "lr", "--k", "1", str(d))
    rep = json.loads(out)
    assert code == 0 and rep["annulus_free"] and rep["theta"]["bands"] == 3
    code, out, _ = call(capsys, "measure", "--stage", "lr", "--k", "1", str(d))
    # three bands, each three (theta,q)-cells and one (theta,a)-cell
    assert json.loads(out)["area"] == 12


def test_accept_codes(capsys):
    code, out, _ = call(capsys, "accept", "--stage", "m1", "--word", "a1 a1 a1")
    assert code == 0 and json.loads(out)["computation"]["history"]
    code, out, _ = call(capsys, "accept", "--stage", "m1", "--word", "a1 a2", "--max-depth", "12",
                        "--max-alen", "5")
    assert code == 3 and "bounded negative" in json.loads(out)["summary"]
    code, out, _ = call(capsys, "accept", "--stage", "m", "--word", "a1", "--form", "J", "--constructed")
    assert code == 0 and len(json.loads(out)["computation"]["history"]) == 155


def test_seed_env(capsys, monkeypatch):
    outs = []
    for seed in ("", "5", "11"):
        monkeypatch.setenv("SMFORGE_SEED", seed)
        code, out, _ = call(capsys, "accept", "--stage", "m1", "--word", "a2 a2 a2")
        assert code == 0
        outs.append(json.loads(out))
    assert {len(o["computation"]["history"]) for o in outs} == {6}
    monkeypatch.setenv("SMFORGE_SEED", "x")
    assert call(capsys, "accept", "--stage", "m1", "--word", "a2")[0] == 1


def test_config_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema": "smforge.config/1", "stage": "lr", "params": {"k": 3}}))
    code, out, _ = call(capsys, "describe", "--config", str(cfg), "--json")
    assert json.loads(out)["positive_rules"] == 17
    code, out, _ = call(capsys, "describe", "--config", str(cfg), "--json", "--k", "1")
    assert json.loads(out)["positive_rules"] == 5


def test_build_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        code, _, err = call(capsys, "build", "--stage", "m5", "--out", str(p))
        assert code == 0 and err.startswith("sha256 ")
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = call(capsys, "describe", "--machine", str(a))
    assert out.startswith("machine M5: 43 parts")


def test_diskdiagram_and_present(tmp_path, capsys):
    code, out, _ = call(capsys, "diskdiagram", "--stage", "m", "--word", "a1")
    assert code == 0
    f = tmp_path / "d.json"
    f.write_text(out)
    code, out, _ = call(capsys, "bands", "--stage", "m", str(f))
    rep = json.loads(out)
    assert code == 0 and rep["annuli"]["theta_around_hub"] == 155 and rep["annulus_free"]
    code, out, _ = call(capsys, "present", "--stage", "lr", "--k", "1")
    assert code == 0 and out.startswith("# presentation LR_1 variant=M")


def test_module_entry():
    r = subprocess.run([sys.executable, "-m", "smforge", "describe", "--stage", "lr"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("machine LR_2")
