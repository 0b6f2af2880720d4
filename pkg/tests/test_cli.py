"""Command-line workflows: parse, check, run, verify, replay, import."""

import json

import pytest
from click.testing import CliRunner

from bslengine.cli import main

from conftest import FIXTURES, fixture_text

CLOCK = "2024-01-01T00:00:00.000Z"

ACTOR_MAP = {
    "actors": {"alice": ["customer"], "bob": ["employee"], "carol": ["manager"]},
    "assign": {
        "subject": "alice",
        "offer": "bob",
        "offer.solution": "carol",
        "offer.confirmation": "alice",
    },
    "default": "alice",
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "actors.json").write_text(json.dumps(ACTOR_MAP))
    return tmp_path


def run_scenario(runner, workdir, *extra):
    return runner.invoke(
        main,
        [
            "run",
            str(FIXTURES / "processing_request.bsl"),
            str(FIXTURES / "processing_request_individuals.bsl"),
            "--actor-map", str(workdir / "actors.json"),
            "--fixed-clock", CLOCK,
            *extra,
        ],
    )


def test_parse_prints_canonical_form(runner):
    result = runner.invoke(main, ["parse", str(FIXTURES / "person.bsl")])
    assert result.exit_code == 0
    assert "Person: Model: Model Person" in result.output
    assert ":: ValueCondition: $Value >= 0 && $Value <= 120" in result.output


def test_parse_json_tree(runner):
    result = runner.invoke(main, ["parse", str(FIXTURES / "person.bsl"), "--json"])
    assert result.exit_code == 0
    tree = json.loads(result.output)
    assert tree[0]["kind"] == "model"
    assert tree[1]["kind"] == "individual"


def test_parse_reports_line_of_error(runner, tmp_path):
    bad = tmp_path / "bad.bsl"
    bad.write_text("A: Model: M\n: Attribute x\n")
    result = runner.invoke(main, ["parse", str(bad)])
    assert result.exit_code == 1
    assert "line 2" in result.output


def test_check_accepts_fixture(runner):
    result = runner.invoke(main, ["check", str(FIXTURES / "processing_request.bsl")])
    assert result.exit_code == 0
    assert "ok" in result.output


def test_check_rejects_deep_nesting(runner, tmp_path):
    deep = tmp_path / "deep.bsl"
    deep.write_text(
        "Deep: Model: M\n: Attribute: a\n:: Attribute: b\n::: Attribute: c\n"
        ":::: Attribute: d\n::::: Attribute: e\n:::::: Attribute: f\n"
    )
    result = runner.invoke(main, ["check", str(deep)])
    assert result.exit_code == 1
    assert "NestingViolation" in result.output


def test_check_warns_on_setvalue_cycle(runner, tmp_path):
    cyclic = tmp_path / "cycle.bsl"
    cyclic.write_text(fixture_text("oscillator.bsl"))
    result = runner.invoke(main, ["check", str(cyclic)])
    assert result.exit_code == 0
    assert "cycle" in result.output


def test_run_prints_projections_and_log(runner, workdir):
    result = run_scenario(runner, workdir)
    assert result.exit_code == 0, result.output
    assert "status = 'process'" in result.output
    assert "status = 'closed'" in result.output
    assert "event log (30 events):" in result.output


def test_run_is_deterministic(runner, workdir):
    first = run_scenario(runner, workdir)
    second = run_scenario(runner, workdir)
    assert first.output == second.output


def test_run_json_payload(runner, workdir):
    result = run_scenario(runner, workdir, "--json")
    payload = json.loads(result.output)
    statuses = {
        row["name"]: row["projection"]["status"] for row in payload["individuals"]
    }
    assert statuses == {"PR_001": "process", "PR_002": "closed", "PR_003": "closed"}
    assert len(payload["events"]) == 30


def test_run_exit_2_on_validation_error(runner, workdir, tmp_path):
    script = tmp_path / "bad_order.bsl"
    script.write_text(
        "ProcessingRequest: Individual: PR_BAD\n: offer: too early\n"
    )
    result = runner.invoke(
        main,
        [
            "run",
            str(FIXTURES / "processing_request.bsl"),
            str(script),
            "--actor-map", str(workdir / "actors.json"),
            "--fixed-clock", CLOCK,
        ],
    )
    assert result.exit_code == 2
    assert "ConditionFalse" in result.output


def test_run_oscillator_exits_2_with_cascade_code(runner, workdir, tmp_path):
    script = tmp_path / "osc_run.bsl"
    script.write_text("Oscillator: Individual: osc1\n: go: 1\n")
    result = runner.invoke(
        main,
        [
            "run",
            str(FIXTURES / "oscillator.bsl"),
            str(script),
            "--fixed-clock", CLOCK,
            "--cascade-cap", "200",
        ],
    )
    assert result.exit_code == 2
    assert "CascadeLimitExceeded" in result.output


def test_verify_accepts_then_flags_tamper(runner, workdir, tmp_path):
    dump_path = tmp_path / "graph.json"
    result = run_scenario(runner, workdir, "--dump", str(dump_path))
    assert result.exit_code == 0

    ok = runner.invoke(main, ["verify", str(dump_path)])
    assert ok.exit_code == 0

    tampered = tmp_path / "tampered.json"
    tampered.write_text(dump_path.read_text().replace("Product_A123", "Product_A124"))
    bad = runner.invoke(main, ["verify", str(tampered)])
    assert bad.exit_code == 1
    assert "INVALID" in bad.output
    assert "#" in bad.output  # names the first bad event id


def test_export_is_canonical_identity(runner, workdir, tmp_path):
    dump_path = tmp_path / "graph.json"
    run_scenario(runner, workdir, "--dump", str(dump_path))
    result = runner.invoke(main, ["export", str(dump_path)])
    assert result.exit_code == 0
    assert result.output == dump_path.read_text()


def test_import_summarizes(runner, workdir, tmp_path):
    dump_path = tmp_path / "graph.json"
    run_scenario(runner, workdir, "--dump", str(dump_path))
    result = runner.invoke(main, ["import", str(dump_path)])
    assert result.exit_code == 0
    assert "30 events" in result.output
    assert "3 individual(s)" in result.output


def test_replay_projects_at_seq(runner, workdir, tmp_path):
    dump_path = tmp_path / "graph.json"
    run_scenario(runner, workdir, "--dump", str(dump_path))
    full = runner.invoke(main, ["replay", str(dump_path), "--json"])
    assert full.exit_code == 0
    payload = json.loads(full.output)
    assert {r["name"] for r in payload["individuals"]} == {"PR_001", "PR_002", "PR_003"}
    partial = runner.invoke(main, ["replay", str(dump_path), "--at-seq", "15", "--json"])
    names = {r["name"] for r in json.loads(partial.output)["individuals"]}
    assert names == {"PR_001"}
