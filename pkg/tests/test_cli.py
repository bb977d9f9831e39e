import json
from pathlib import Path

import jsonschema
import pytest

from riskaudit.cli import main
from riskaudit.instance_io import fixture_path, serialize_instance, load_fixture, shipped_fixtures

DOCS = Path(__file__).resolve().parent.parent / "docs"


def fx(name):
    return str(fixture_path(name))


def _schema(name):
    return json.loads((DOCS / name).read_text())


def test_tie_passes_on_shipped_lottery(capsys):
    assert main(["audit", "--instance", fx("lottery"), "--mode", "tie"]) == 0


def test_untransformed_risk_averse_fails_with_witness(capsys):
    assert main(["audit", "--instance", fx("lottery"), "--mode", "risk-averse"]) == 1
    assert "witness" in capsys.readouterr().out


def test_transform_then_audit(capsys):
    assert main(["transform", "--in", fx("lottery"), "--method", "exact",
                 "--then-audit", "risk-averse"]) == 0


@pytest.mark.parametrize("argv, code", [
    (["audit", "--instance", "/nonexistent.json", "--mode", "tie"], 2),
    (["audit", "--mode", "tie"], 2),
    (["audit", "--instance", "X", "--mode", "nonsense"], 2),
    ([], 2),
])
def test_input_errors(argv, code, capsys):
    assert main(argv) == code


def test_convergence_error_exit(tmp_path, capsys):
    doc = serialize_instance(load_fixture("coverage_3x3"))
    doc["optimizer"] = {"tol": "1e-14", "max_iter": 2}
    p = tmp_path / "tight.json"
    p.write_text(json.dumps(doc))
    assert main(["optimize", "--in", str(p)]) == 3


def test_bic_and_claims(capsys):
    assert main(["audit", "--in", fx("second_price_bayes"), "--mode", "bic",
                 "--transform", "bayesian", "--risk-averse"]) == 0
    assert main(["audit", "--in", fx("coverage_2x2"), "--mode", "claims"]) == 0


def test_self_transforming_modes_reject_transform_flag(capsys):
    for mode in ("claims", "apx"):
        assert main(["audit", "--in", fx("lottery"), "--mode", mode, "--transform", "exact"]) == 2


def test_monte_carlo_audit(capsys):
    assert main(["audit", "--in", fx("lottery"), "--mode", "risk-averse", "--method",
                 "montecarlo", "--samples", "4000", "--battery", "cara:1"]) == 1


def test_run_and_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["audit", "--in", fx("lottery"), "--mode", "risk-averse", "--out", str(out)]) == 1
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    assert "verdict    fail" in capsys.readouterr().out
    assert main(["run", "--in", fx("coverage_2x2"), "--seed", "1"]) == 0


AUDIT_RUNS = [
    ["audit", "--in", fx("lottery"), "--mode", "risk-averse"],
    ["audit", "--in", fx("lottery_taxation"), "--mode", "tie"],
    ["audit", "--in", fx("lottery"), "--mode", "apx",
     "--epsilon", "0.1", "--samples", "2000"],
    ["audit", "--in", fx("coverage_2x2"), "--mode", "risk-averse", "--transform", "exact"],
    ["transform", "--in", fx("lottery"), "--method", "montecarlo", "--samples", "500",
     "--then-audit", "risk-averse", "--seed", "9"],
]


@pytest.mark.parametrize("argv", AUDIT_RUNS, ids=lambda a: "-".join(a[3:6]))
def test_reports_are_byte_identical_and_valid(argv, tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"r{k}.json"
        main(argv + ["--out", str(p)])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    jsonschema.validate(json.loads(outs[0]), _schema("report.schema.json"))


@pytest.mark.parametrize("name", shipped_fixtures())
def test_fixtures_match_documented_schema(name):
    schema = _schema("instance.schema.json")
    jsonschema.validate(json.loads(Path(fx(name)).read_text()), schema)
    jsonschema.validate(serialize_instance(load_fixture(name)), schema)


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "riskaudit", "audit", "--in", fx("lottery"),
                        "--mode", "tie"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
