import json

import pytest

from medledger.errors import StepMismatch
from medledger.scenario import ScenarioRunner, parse_scenario, run_scenario

SCENARIO = "scenarios/vaccine_4hop.jsonl"


def test_vaccine_4hop_all_steps_pass():
    report = run_scenario(SCENARIO, strict=True)
    assert report.failed == 0
    assert report.mismatch_step is None
    assert report.passed == len(report.steps)


def test_vaccine_4hop_trace_yields_three_hops():
    meta, steps = parse_scenario(SCENARIO)
    runner = ScenarioRunner(meta)
    runner.run(steps)
    trace = runner.saved["trace1"]
    assert len(trace["hops"]) == 3
    assert trace["verified"] is True
    statuses = [h["status"] for h in trace["hops"]]
    assert statuses == ["Completed", "Completed", "Completed"]


def test_duplicate_register_expectation_passes():
    meta, steps = parse_scenario(SCENARIO)
    dup = [s for s in steps if s.expect.get("error") == "AccountAlreadyExists"]
    assert dup, "bundled scenario must exercise the duplicate-registration path"
    report = run_scenario(SCENARIO)
    for step in dup:
        assert report.steps[step.index].passed
        assert report.steps[step.index].error == "AccountAlreadyExists"


def test_same_file_twice_yields_identical_head_hashes():
    first = run_scenario(SCENARIO)
    second = run_scenario(SCENARIO)
    assert first.final_digests == second.final_digests
    assert first.final_digests["global_head"]
    assert first.store_records == second.store_records


def test_violated_expectation_reports_step_index(tmp_path):
    bad = tmp_path / "bad.jsonl"
    lines = [
        json.dumps({"meta": {"name": "bad", "seed": 1}}),
        json.dumps({"actor": "ops", "action": "register",
                    "args": {"name": "A", "email": "a@x.ex",
                             "identity": "Patient", "password": "p@ssw0rd1"}}),
        json.dumps({"actor": "ops", "action": "register",
                    "args": {"name": "A", "email": "a@x.ex",
                             "identity": "Patient", "password": "p@ssw0rd1"},
                    "expect": {"ok": True}}),
    ]
    bad.write_text("\n".join(lines) + "\n")
    report = run_scenario(str(bad))
    assert report.mismatch_step == 1
    with pytest.raises(StepMismatch) as excinfo:
        run_scenario(str(bad), strict=True)
    assert excinfo.value.details["step"] == 1


def test_actions_require_login(tmp_path):
    path = tmp_path / "noauth.jsonl"
    lines = [
        json.dumps({"actor": "ops", "action": "register",
                    "args": {"name": "M", "email": "m@x.ex",
                             "identity": "Manufacturer", "password": "p@ssw0rd1"}}),
        json.dumps({"actor": "m@x.ex", "action": "mint",
                    "args": {"name": "V", "production_date": "2021-01-01",
                             "batch_number": "B1", "quantity": 5},
                    "expect": {"error": "AuthRequired"}}),
    ]
    path.write_text("\n".join(lines) + "\n")
    report = run_scenario(str(path), strict=True)
    assert report.failed == 0


def test_scenario_report_wire_shape():
    report = run_scenario(SCENARIO)
    wire = report.to_wire()
    assert set(wire) == {"name", "steps", "passed", "failed", "mismatch_step",
                         "final_digests", "store_records"}
    assert wire["name"] == "vaccine_4hop"
    assert all(set(s) == {"index", "actor", "action", "ok", "error", "expected",
                          "passed"} for s in wire["steps"])
