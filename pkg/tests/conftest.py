"""Shared fixtures: fixture-file loading and a pre-wired request engine."""

from pathlib import Path

import pytest

from bslengine import Engine, FixedClock, parse_source

FIXTURES = Path(__file__).parent / "fixtures"

# who performs which step in the request scenario
REQUEST_ACTORS = {
    "subject": "alice",
    "offer": "bob",
    "offer.solution": "carol",
    "offer.confirmation": "alice",
}


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def request_model_doc():
    return parse_source(fixture_text("processing_request.bsl"))


@pytest.fixture
def request_individuals_doc():
    return parse_source(fixture_text("processing_request_individuals.bsl"))


def make_request_engine(clock=None) -> Engine:
    """Fresh engine with the request model loaded and the three roles staffed."""
    engine = Engine(clock=clock or FixedClock())
    engine.register_actor("alice", roles=["customer"])
    engine.register_actor("bob", roles=["employee"])
    engine.register_actor("carol", roles=["manager"])
    engine.load_document(parse_source(fixture_text("processing_request.bsl")))
    return engine


def request_actor_for(path: str):
    return REQUEST_ACTORS.get(path)


@pytest.fixture
def request_engine() -> Engine:
    return make_request_engine()


def run_request_scripts(engine: Engine):
    """Play all three individual protocols, returning name -> ScriptResult."""
    doc = parse_source(fixture_text("processing_request_individuals.bsl"))
    return {
        ind.name: engine.run_script(ind, actor_for=request_actor_for)
        for ind in doc.individuals
    }
