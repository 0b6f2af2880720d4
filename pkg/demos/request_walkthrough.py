"""Play one request process by hand and watch the engine drive it.

Run from the repository root:

    python3 demos/request_walkthrough.py
"""

from pathlib import Path

from bslengine import Engine, FixedClock, parse_source
from bslengine.errors import ConditionFalse, ParentMissing, PermissionDenied

MODEL = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "processing_request.bsl"


def show(title: str, engine: Engine, inst) -> None:
    print(f"\n--- {title}")
    for key, value in sorted(engine.snapshot(inst).items()):
        print(f"    {key} = {value!r}")


def main() -> None:
    engine = Engine(clock=FixedClock())
    engine.register_actor("alice", roles=["customer"])
    engine.register_actor("bob", roles=["employee"])
    engine.register_actor("carol", roles=["manager"])
    engine.load_document(parse_source(MODEL.read_text()))

    inst = engine.instantiate("Model_ProcessingRequest", "PR_100").trigger
    print(f"created individual PR_100 ({inst.id})")

    print("\nbob tries to decide before there is an offer:")
    try:
        engine.submit(inst, "solution", "Accept", actor="bob")
    except ParentMissing as exc:
        print(f"    refused: {exc.code} ({exc})")

    engine.submit(inst, "subject", "Product_A123", actor="alice")
    show("alice picked the subject", engine, inst)

    engine.submit(inst, "offer", "Standard configuration, 14 days", actor="bob")

    print("\nbob, an employee, tries to make the decision himself:")
    try:
        engine.submit(inst, "solution", "Accept", actor="bob")
    except PermissionDenied as exc:
        print(f"    refused: {exc.code} ({exc})")

    print("\nalice tries to change the subject now that an offer exists:")
    try:
        engine.submit(inst, "subject", "Product_B456", actor="alice")
    except ConditionFalse as exc:
        print(f"    refused: {exc.code} ({exc})")

    print("\ncarol sends the offer back, bob revises, carol accepts:")
    engine.submit(inst, "solution", "SendBack", actor="carol")
    engine.submit(inst, "offer", "Special configuration, 7 days", actor="bob")
    engine.submit(inst, "solution", "Accept", actor="carol")

    result = engine.submit(inst, "confirmation", "Yes", actor="alice")
    auto = [e for e in result.events[1:]]
    print(f"\nalice confirmed; the engine derived {len(auto)} event(s) in the same commit:")
    for event in auto:
        print(f"    {event.type} = {event.value!r} by SYSTEM, caused by {len(event.cause)} event(s)")

    show("final state", engine, inst)

    print("\nfull history:")
    for event in engine.graph.events:
        owner = engine.graph.owner_instance(event)
        if owner is not None and owner.id == inst.id:
            print(f"    seq {event.seq:3d}  {event.type:<14} {str(event.value)[:40]!r}")


if __name__ == "__main__":
    main()
