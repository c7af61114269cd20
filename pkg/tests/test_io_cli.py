import csv
import io as io_text
import json
import subprocess
import sys
from fractions import Fraction as F

import pytest

from subtest import io
from subtest.cli import main
from subtest.core import RngSeed
from subtest.generators import FAMILIES, family_instance


@pytest.mark.parametrize("family", FAMILIES)
def test_instance_round_trip(family, tmp_path):
    n = 5 if family == "square" else 2
    for side in ("yes", "no"):
        inst = family_instance(family, n, side, RngSeed(3))
        path = tmp_path / f"{family}.{side}.json"
        io.save_instance(path, inst)
        back = io.load_instance(path)
        assert back.n == inst.n
        assert back.edges == inst.edges
        assert dict(back.mu.items()) == dict(inst.mu.items())
        assert back.property == inst.property
        assert back.certified_distance == inst.certified_distance
        assert io.dumps(io.instance_to_json(back)) == path.read_text()


def test_parse_property():
    assert io.parse_property("bip").name == "bip"
    assert io.parse_property("free:triangle").H.t == 3
    assert io.parse_property("hom:[[1,2],[2,3],[1,3]]").kind == "hom"
    with pytest.raises(ValueError):
        io.parse_property("nonsense")


def test_dumps_is_canonical():
    assert io.dumps({"b": F(1, 3), "a": {2, 1}}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": "1/3"\n}\n'


def _run(args, capsys):
    code = main(args)
    return code, capsys.readouterr().out


def test_generate_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--family", "triangle", "--n", "3", "--seed", "7", "-o", str(a)]) == 0
    assert main(["generate", "--family", "triangle", "--n", "3", "--seed", "7", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["generate", "--family", "square", "--n", "5", "--side", "pair", "-o",
                 str(tmp_path / "sq.json")]) == 0
    assert (tmp_path / "sq.yes.json").exists() and (tmp_path / "sq.no.json").exists()


def test_test_command_tallies(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    main(["generate", "--family", "triangle", "--n", "2", "--side", "yes", "-o", str(inst)])
    code, out = _run(["test", "--instance", str(inst), "--m", "50", "--trials", "40"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io_text.StringIO(out)))
    assert rows[0]["rejections"] == "0" and rows[0]["accepts"] == "40"
    code, out = _run(["test", "--instance", str(inst), "--m", "50", "--json"], capsys)
    assert json.loads(out)["decision"] == "accept"


def test_test_command_property_override(tmp_path, capsys):
    inst = tmp_path / "tri.json"
    main(["generate", "--family", "triangle", "--n", "2", "--side", "no", "-o", str(inst)])
    H = tmp_path / "H.json"
    H.write_text(json.dumps({"edges": [[1, 2]]}))
    code, out = _run(["test", "--instance", str(inst), "--m", "5", "--trials", "30",
                      "--property", f"free:{H}"], capsys)
    rows = list(csv.DictReader(io_text.StringIO(out)))
    assert code == 0 and rows[0]["rejections"] == "30"


def test_witness_command(tmp_path, capsys):
    sq = tmp_path / "sq.json"
    inst = family_instance("square", 1, "no", RngSeed(0))
    io.save_instance(sq, inst)
    code, out = _run(["witness", "--instance", str(sq)], capsys)
    data = json.loads(out)
    assert code == 0
    assert set(data) >= {"matching", "descendant", "case", "slacks", "budgets"}
    assert data["case"] in ("dilute", "concentrated")
    assert set(data["budgets"]) == {"dilute", "concentrated"}


def test_oracle_commands(tmp_path, capsys):
    inst = tmp_path / "bip.json"
    io.save_instance(inst, family_instance("bipartite", 1, "no", RngSeed(0)))
    code, out = _run(["oracle", "distance", "--instance", str(inst)], capsys)
    data = json.loads(out)
    assert code == 0 and data["holds"] and F(data["distance"]) >= F(1, 9)
    code, out = _run(["oracle", "tv", "--family", "triangle", "--m", "3"], capsys)
    assert json.loads(out)["tv"] == "2/9"
    dom = tmp_path / "d.json"
    dom.write_text(json.dumps({"mu": [[{"0": 1}, 1]], "nu": [[{"0": 2}, 1]], "lambda1": 1, "lambda2": 1}))
    code, out = _run(["oracle", "dominate", "--input", str(dom)], capsys)
    assert code == 2 and json.loads(out)["feasible"] is False
    A = tmp_path / "a.json"
    A.write_text("[1, 2, 4, 8, 9]")
    code, out = _run(["oracle", "verify", "3ap", "--input", str(A)], capsys)
    assert code == 0 and json.loads(out)["verified"] is True


def test_experiment_command_is_byte_identical(tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"family": "clique", "n": [1, 2, 3], "trials": 40, "master_seed": 2}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["experiment", "--plan", str(plan), "-o", str(a)]) == 0
    assert main(["experiment", "--plan", str(plan), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("schema=1\n")


def test_lemma_command_exit_codes(tmp_path, capsys):
    code, out = _run(["lemma", "--id", "sample_number_control", "--trials", "300"], capsys)
    assert code == 0 and json.loads(out)["status"] == "pass"
    bad = tmp_path / "p.json"
    bad.write_text(json.dumps({"r": 1}))
    code, out = _run(["lemma", "--id", "birthday_minus_max", "--params", str(bad)], capsys)
    assert code == 2 and json.loads(out)["status"] == "skipped"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "subtest", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "experiment" in out.stdout
