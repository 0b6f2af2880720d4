"""Command-line entry point.

parse/check inspect BSL sources, run executes models plus individual
scripts end to end, verify/export/import/replay work on graph dumps, and
serve starts the HTTP facade. Exit codes: 0 success, 1 parse or
verification failure, 2 first validation error during a run.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict

import click

from . import ast
from .clock import FixedClock, SystemClock
from .dump import dumps as dump_text
from .dump import event_to_record, loads_records, verify_records
from .engine import Engine
from .errors import BslError, ParseError, ValidationError
from .evaluator import dependencies
from .parser import parse_source
from .printer import print_document
from .values import value_to_json


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _clock(fixed_clock: str | None):
    return FixedClock(fixed_clock) if fixed_clock else SystemClock()


def _echo_error(exc: BslError) -> None:
    click.echo(f"error: {exc.code}: {exc}", err=True)


def _event_line(event) -> str:
    value = value_to_json(event.value)
    cause = ",".join(event.cause)
    return (
        f"{event.seq:>5}  {event.id}  {event.type}={value!r}"
        f"  actor={event.actor}  model={event.model or '-'}"
        f"  cause=[{cause}]  at {event.timestamp.strftime('%Y-%m-%dT%H:%M:%S.%f')[:-3]}Z"
    )


@click.group()
def main() -> None:
    """Executable-ontology engine: models in, event graph out."""


@main.command("parse")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="emit the tree as JSON")
def parse_cmd(file: str, as_json: bool) -> None:
    """Parse a BSL file and print its canonical form."""
    try:
        doc = parse_source(_read(file))
    except ParseError as exc:
        _echo_error(exc)
        sys.exit(1)
    if as_json:
        click.echo(json.dumps(_doc_json(doc), indent=2, ensure_ascii=False))
    else:
        click.echo(print_document(doc), nl=False)


def _doc_json(doc: ast.Document) -> list[dict]:
    items = []
    for item in doc.items:
        if isinstance(item, ast.ModelDecl):
            items.append(
                {
                    "kind": "model",
                    "concept": item.concept,
                    "name": item.name,
                    "properties": [_prop_json(p) for p in item.properties],
                }
            )
        elif isinstance(item, ast.IndividualDecl):
            items.append(
                {
                    "kind": "individual",
                    "concept": item.concept,
                    "name": item.name,
                    "assertions": [_assert_json(a) for a in item.assertions],
                }
            )
        else:
            items.append(
                {
                    "kind": "vocabulary",
                    "name": item.name,
                    "entries": [asdict(e) for e in item.entries],
                }
            )
    return items


def _prop_json(prop: ast.PropertyDecl) -> dict:
    return {
        "type": prop.ptype,
        "name": prop.name,
        "depth": prop.depth,
        "restrictions": [{"type": r.rtype, "value": r.value} for r in prop.restrictions],
        "children": [_prop_json(c) for c in prop.children],
    }


def _assert_json(assertion: ast.Assertion) -> dict:
    return {
        "name": assertion.name,
        "value": assertion.value,
        "children": [_assert_json(c) for c in assertion.children],
    }


@main.command("check")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
def check_cmd(file: str) -> None:
    """Static checks: nesting bound, name references, dependency cycles."""
    try:
        doc = parse_source(_read(file))
    except ParseError as exc:
        _echo_error(exc)
        sys.exit(1)
    failed = False
    for model in doc.models:
        try:
            Engine(clock=FixedClock()).load_model(model)
        except BslError as exc:
            _echo_error(exc)
            failed = True
            continue
        declared = {p.name.lower() for p in model.walk()}
        for prop in model.walk():
            for restriction in prop.restrictions:
                if restriction.expr is None:
                    continue
                for scope, path in dependencies(restriction.expr):
                    head = path.split(".")[0]
                    if scope == "individual" and head not in declared:
                        click.echo(
                            f"warning: {model.name}.{prop.name}: expression reads"
                            f" undeclared property {head!r}"
                        )
        for cycle in _setvalue_cycles(model):
            click.echo(
                f"warning: {model.name}: SetValue dependency cycle {' -> '.join(cycle)}"
            )
    for individual in doc.individuals:
        models = [m for m in doc.models if m.concept == individual.concept]
        for model in models:
            for assertion in _walk_assertions(individual.assertions):
                if model.find(assertion.name) is None:
                    click.echo(
                        f"warning: {individual.name}: {assertion.name!r} not in model"
                        f" {model.name}"
                    )
    if failed:
        sys.exit(1)
    click.echo(f"{file}: ok")


def _walk_assertions(assertions):
    for a in assertions:
        yield a
        yield from _walk_assertions(a.children)


def _setvalue_cycles(model: ast.ModelDecl) -> list[list[str]]:
    graph: dict[str, set[str]] = {}
    for prop in model.walk():
        setvalue = prop.restriction("SetValue")
        if setvalue is None or setvalue.expr is None:
            continue
        reads = set()
        for scope, path in dependencies(setvalue.expr):
            if scope == "individual":
                reads.update(path.split("."))
        graph[prop.name.lower()] = reads & {p.name.lower() for p in model.walk()}
    cycles = []
    visiting: list[str] = []

    def visit(node: str) -> None:
        if node in visiting:
            cycles.append(visiting[visiting.index(node):] + [node])
            return
        visiting.append(node)
        for nxt in sorted(graph.get(node, ())):
            if nxt in graph:
                visit(nxt)
        visiting.pop()

    for node in sorted(graph):
        visit(node)
    return cycles


def _load_actor_map(engine: Engine, path: str | None):
    mapping = {"actors": {}, "assign": {}, "default": None}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        mapping["actors"] = raw.get("actors", {})
        mapping["assign"] = raw.get("assign", {})
        mapping["default"] = raw.get("default")
    for name, roles in mapping["actors"].items():
        engine.register_actor(name, roles=roles)
    for name in set(mapping["assign"].values()) | (
        {mapping["default"]} if mapping["default"] else set()
    ):
        if name and name.upper() != "SYSTEM" and engine.find_actor(name) is None:
            engine.register_actor(name)
    return mapping


def _actor_resolver(mapping: dict, individual: ast.IndividualDecl):
    assign = mapping["assign"]

    def actor_for(path: str):
        if path:
            for key in (f"{individual.name}.{path}", f"{individual.concept}.{path}", path):
                if key in assign:
                    return assign[key]
        elif individual.name in assign:
            return assign[individual.name]
        return mapping["default"]

    return actor_for


@main.command("run")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--actor-map", "actor_map", type=click.Path(exists=True, dir_okay=False))
@click.option("--fixed-clock", "fixed_clock", default=None, metavar="ISO_INSTANT")
@click.option("--cascade-cap", default=10000, show_default=True)
@click.option("--dump", "dump_path", type=click.Path(dir_okay=False), help="write the graph dump here")
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
def run_cmd(files, actor_map, fixed_clock, cascade_cap, dump_path, as_json) -> None:
    """Load models and execute individual scripts against a fresh graph."""
    engine = Engine(clock=_clock(fixed_clock), cascade_cap=cascade_cap)
    try:
        docs = [parse_source(_read(f)) for f in files]
    except ParseError as exc:
        _echo_error(exc)
        sys.exit(1)
    mapping = _load_actor_map(engine, actor_map)
    results = []
    try:
        for doc in docs:
            engine.load_document(doc)
        for doc in docs:
            for individual in doc.individuals:
                resolver = _actor_resolver(mapping, individual)
                results.append(
                    (individual, engine.run_script(individual, actor_for=resolver))
                )
    except ValidationError as exc:
        _echo_error(exc)
        sys.exit(2)
    except BslError as exc:
        _echo_error(exc)
        sys.exit(1)

    if dump_path:
        with open(dump_path, "w", encoding="utf-8") as fh:
            fh.write(engine.export_dump())

    if as_json:
        payload = {
            "individuals": [
                {
                    "name": decl.name,
                    "id": res.instance.id,
                    "projection": engine.snapshot(res.instance),
                }
                for decl, res in results
            ],
            "events": engine.export_records(),
        }
        click.echo(json.dumps(payload, indent=2, ensure_ascii=False))
        return

    for decl, res in results:
        click.echo(f"{decl.concept}: {decl.name}  ({res.instance.id})")
        for path, value in sorted(engine.snapshot(res.instance).items()):
            click.echo(f"  {path} = {value!r}")
    click.echo("")
    click.echo(f"event log ({len(engine.graph.events)} events):")
    for event in engine.graph.events:
        click.echo(_event_line(event))


@main.command("verify")
@click.argument("dumpfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def verify_cmd(dumpfile: str, as_json: bool) -> None:
    """Recompute every hash in a dump and check the reference structure."""
    try:
        records = loads_records(_read(dumpfile))
    except BslError as exc:
        _echo_error(exc)
        sys.exit(1)
    report = verify_records(records)
    if as_json:
        click.echo(
            json.dumps(
                {
                    "valid": report.valid,
                    "violations": [asdict(v) for v in report.violations],
                    "tainted": sorted(report.tainted),
                },
                indent=2,
            )
        )
    elif report.valid:
        click.echo(f"{dumpfile}: ok ({len(records)} events)")
    else:
        first = report.first_divergence
        click.echo(
            f"{dumpfile}: INVALID at seq {first.seq} ({first.code})"
            f" {first.event_id or '<no id>'}: {first.detail}",
            err=True,
        )
        click.echo(
            f"{len(report.violations)} violation(s), {len(report.tainted)} tainted event(s)",
            err=True,
        )
    sys.exit(0 if report.valid else 1)


@main.command("export")
@click.argument("dumpfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def export_cmd(dumpfile: str, out: str | None) -> None:
    """Verify a dump and re-emit it in canonical form."""
    try:
        engine = Engine.from_dump(_read(dumpfile), clock=FixedClock())
    except BslError as exc:
        _echo_error(exc)
        sys.exit(1)
    text = dump_text(engine.graph.events)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        click.echo(f"{out}: {len(engine.graph.events)} events")
    else:
        click.echo(text, nl=False)


@main.command("import")
@click.argument("dumpfile", type=click.Path(exists=True, dir_okay=False))
def import_cmd(dumpfile: str) -> None:
    """Verify a dump and summarize what it contains."""
    try:
        engine = Engine.from_dump(_read(dumpfile), clock=FixedClock())
    except BslError as exc:
        _echo_error(exc)
        sys.exit(1)
    instances = engine.instances()
    models = {e.value for e in engine.graph.of_type("Model")}
    click.echo(
        f"{dumpfile}: {len(engine.graph.events)} events,"
        f" {len(models)} model(s), {len(instances)} individual(s),"
        f" {len(engine.actors())} actor(s)"
    )


@main.command("replay")
@click.argument("dumpfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--at-seq", "at_seq", type=int, default=None, help="project state as of this seq")
@click.option("--json", "as_json", is_flag=True)
def replay_cmd(dumpfile: str, at_seq: int | None, as_json: bool) -> None:
    """Rebuild projections from a dump without re-running any logic."""
    try:
        engine = Engine.from_dump(_read(dumpfile), clock=FixedClock())
    except BslError as exc:
        _echo_error(exc)
        sys.exit(1)
    horizon = at_seq if at_seq is not None else engine.graph.head_seq
    payload = []
    for instance in engine.instances():
        if instance.seq > horizon:
            continue
        payload.append(
            {
                "name": instance.value,
                "id": instance.id,
                "model": instance.model,
                "projection": engine.snapshot(instance, max_seq=horizon),
            }
        )
    if as_json:
        click.echo(json.dumps({"at_seq": horizon, "individuals": payload}, indent=2))
        return
    click.echo(f"state at seq {horizon}:")
    for row in payload:
        click.echo(f"{row['model']}: {row['name']}  ({row['id']})")
        for path, value in sorted(row["projection"].items()):
            click.echo(f"  {path} = {value!r}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--fixed-clock", "fixed_clock", default=None, metavar="ISO_INSTANT")
@click.option("--cascade-cap", default=10000, show_default=True)
@click.option("--load", "load_files", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--import", "import_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--actor-map", "actor_map", type=click.Path(exists=True, dir_okay=False))
def serve_cmd(host, port, fixed_clock, cascade_cap, load_files, import_path, actor_map) -> None:
    """Start the HTTP facade."""
    import uvicorn

    from .api import create_app

    if import_path:
        engine = Engine.from_dump(
            _read(import_path), clock=_clock(fixed_clock), cascade_cap=cascade_cap
        )
    else:
        engine = Engine(clock=_clock(fixed_clock), cascade_cap=cascade_cap)
    _load_actor_map(engine, actor_map)
    for path in load_files:
        doc = parse_source(_read(path))
        try:
            engine.load_document(doc)
        except BslError:
            engine.attach_document(doc)
        for individual in doc.individuals:
            resolver = _actor_resolver({"assign": {}, "default": None}, individual)
            engine.run_script(individual, actor_for=resolver)
    uvicorn.run(create_app(engine), host=host, port=port)


if __name__ == "__main__":
    main()
