"""Corrupt one byte of an exported log and watch verification catch it.

Run from the repository root:

    python3 demos/tamper_audit.py
"""

from pathlib import Path

from bslengine import Engine, FixedClock, parse_source
from bslengine.dump import import_records, loads_records, verify_records
from bslengine.errors import DumpFormatError, IntegrityError

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    engine = Engine(clock=FixedClock())
    engine.register_actor("alice", roles=["customer"])
    engine.register_actor("bob", roles=["employee"])
    engine.register_actor("carol", roles=["manager"])
    engine.load_document(parse_source((FIXTURES / "processing_request.bsl").read_text()))
    inst = engine.instantiate("Model_ProcessingRequest", "PR_100").trigger
    engine.submit(inst, "subject", "Product_A123", actor="alice")
    engine.submit(inst, "offer", "Standard configuration", actor="bob")
    engine.submit(inst, "solution", "Accept", actor="carol")
    engine.submit(inst, "confirmation", "Yes", actor="alice")

    text = engine.export_dump()
    records = loads_records(text)
    print(f"exported {len(records)} records; chain verifies:",
          verify_records(records).valid)

    # forge the offer wording in place
    target = next(i for i, r in enumerate(records) if r["value"] == "Standard configuration")
    forged = text.replace("Standard configuration", "Premium configuration")
    assert forged != text

    report = verify_records(loads_records(forged))
    first = report.first_divergence
    print(f"\nafter editing record {target}, verification says valid={report.valid}")
    print(f"    first divergence: seq {first.seq} ({first.code}) {first.event_id}")
    print(f"    records tainted downstream: {len(report.tainted)}")

    print("\nimport of the forged dump:")
    try:
        import_records(loads_records(forged), FixedClock())
    except (IntegrityError, DumpFormatError) as exc:
        print(f"    refused: {exc}")

    print("\nimport of the honest dump:")
    clone = Engine.from_dump(text, clock=FixedClock())
    restored = clone.resolve_individual("PR_100")
    print(f"    restored PR_100 status = {clone.snapshot(restored)['status']!r}")


if __name__ == "__main__":
    main()
