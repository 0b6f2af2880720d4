"""Dump format, verification, and import behavior."""

import json

import pytest

from bslengine.clock import FixedClock
from bslengine.dump import (
    dumps,
    event_to_record,
    import_records,
    loads_records,
    verify_records,
)
from bslengine.errors import DumpFormatError, IntegrityError
from bslengine.graph import SYSTEM_ACTOR, EventGraph


@pytest.fixture
def graph():
    g = EventGraph(clock=FixedClock())
    root = g.root
    inst = g.append(base=root.id, type="Instance", value="thing", actor=SYSTEM_ACTOR, model="M")
    g.append(base=inst.id, type="size", value="3", actor=SYSTEM_ACTOR, model="M", cause=(inst.id,))
    g.append(
        base=inst.id, type="note", value="two causes", actor=SYSTEM_ACTOR, model="M",
        cause=(root.id, inst.id),
    )
    return g


def test_record_keys_and_cause_shape(graph):
    records = [event_to_record(e) for e in graph.events]
    for rec in records:
        assert list(rec.keys()) == ["id", "base", "type", "value", "actor", "model", "cause", "date"]
    assert records[0]["cause"] == []
    assert isinstance(records[2]["cause"], str)  # single cause collapses to a string
    assert isinstance(records[3]["cause"], list) and len(records[3]["cause"]) == 2


def test_dump_is_pretty_json_with_trailing_newline(graph):
    text = dumps(graph.events)
    assert text.endswith("\n")
    assert text.startswith("[\n  {")
    assert json.loads(text)[0]["type"] == "Root"


def test_roundtrip_byte_identical(graph):
    text = dumps(graph.events)
    imported = import_records(loads_records(text), FixedClock())
    assert dumps(imported.events) == text


def test_verify_accepts_clean_dump(graph):
    report = verify_records(loads_records(dumps(graph.events)))
    assert report.valid


def test_verify_flags_value_tamper_and_taints_descendants(graph):
    records = loads_records(dumps(graph.events))
    records[1]["value"] = "imposter"
    report = verify_records(records)
    assert not report.valid
    assert report.first_divergence.seq == 1
    assert report.first_divergence.code == "id-mismatch"
    # events based on or caused by the bad one are tainted
    assert graph.events[2].id in report.tainted
    assert graph.events[3].id in report.tainted


def test_verify_flags_unknown_cause(graph):
    records = loads_records(dumps(graph.events))
    records[3]["cause"] = ["#" + "9" * 40, records[3]["cause"][1]]
    report = verify_records(records)
    assert not report.valid
    assert any(v.code == "id-mismatch" or v.code == "unknown-cause" for v in report.violations)


def test_verify_flags_forward_reference():
    g = EventGraph(clock=FixedClock())
    root = g.root
    a = g.append(base=root.id, type="a", value="1", actor=SYSTEM_ACTOR, model="")
    b = g.append(base=root.id, type="b", value="2", actor=SYSTEM_ACTOR, model="", cause=(a.id,))
    records = loads_records(dumps(g.events))
    records[1], records[2] = records[2], records[1]  # cause now points forward
    report = verify_records(records)
    assert not report.valid
    assert b.id in {v.event_id for v in report.violations}


def test_loads_rejects_non_array():
    with pytest.raises(DumpFormatError):
        loads_records('{"not": "an array"}\n')


def test_loads_rejects_bad_json():
    with pytest.raises(DumpFormatError):
        loads_records("[{]")


def test_import_rejects_missing_key(graph):
    records = loads_records(dumps(graph.events))
    del records[1]["model"]
    report = verify_records(records)
    assert not report.valid
    assert report.first_divergence.code == "malformed-record"
    with pytest.raises(IntegrityError):
        import_records(records, FixedClock())


def test_import_rejects_extra_key(graph):
    records = loads_records(dumps(graph.events))
    records[1]["bonus"] = 1
    report = verify_records(records)
    assert report.first_divergence.code == "malformed-record"
    with pytest.raises(IntegrityError):
        import_records(records, FixedClock())


def test_import_rejects_tampered_id(graph):
    records = loads_records(dumps(graph.events))
    records[2]["id"] = "#" + "0" * 40
    with pytest.raises(IntegrityError):
        import_records(records, FixedClock())


def test_import_rejects_duplicate_id(graph):
    records = loads_records(dumps(graph.events))
    records.append(dict(records[2]))
    with pytest.raises(IntegrityError):
        import_records(records, FixedClock())


def test_instants_use_millisecond_z_form(graph):
    records = loads_records(dumps(graph.events))
    for rec in records:
        assert len(rec["date"]) == 24
        assert rec["date"].endswith("Z")
