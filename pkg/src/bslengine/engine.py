"""Dataflow execution over the event graph.

Models load as template events; instances and property values land as
reification events. A candidate event passes, in order: parent present,
Condition satisfied, multiplicity free, actor permitted, then the value
gates (DataType, ValueCondition, SetRange, Range, Unique). Committed
events wake subscriptions, and properties carrying SetValue fire
automatically when enabled and their computed value changes; the whole
cascade commits atomically or not at all.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import ast
from .clock import SystemClock
from .dump import dumps, events_to_records, import_records, loads_records
from .errors import (
    BslError,
    CascadeLimitExceeded,
    ConditionFalse,
    DataTypeMismatch,
    DuplicateIdentifier,
    EvalError,
    ExpectationFailed,
    ImmutableViolation,
    MultiplicityViolation,
    NestingViolation,
    NotAReference,
    NotInModel,
    ParentMissing,
    PermissionDenied,
    RangeViolation,
    UniqueViolation,
    UnknownActor,
    UnknownIndividual,
    UnknownModel,
    ValidationError,
    ValueConditionFailed,
)
from .evaluator import (
    EvalContext,
    condition_satisfied,
    current_value,
    dependencies,
    eval_expr,
    is_truthy,
    loose_equal,
    path_event,
    strict_equal,
)
from .errors import ExpectationFailed
from .graph import SYSTEM_ACTOR, Event, EventGraph
from .values import (
    EVENT_ID_RE,
    Ref,
    Undefined,
    Value,
    canonical_text,
    parse_instant,
    value_to_json,
)

_TRUTHY_FLAG = ("1", "true", "yes")

_DATATYPE_ALIASES = {
    "string": "string",
    "text": "string",
    "integer": "integer",
    "int": "integer",
    "float": "float",
    "decimal": "float",
    "number": "float",
    "boolean": "boolean",
    "bool": "boolean",
    "datetime": "datetime",
    "date": "datetime",
    "reference": "reference",
    "ref": "reference",
}


class LoadedProperty:
    """A model event bound into the registry, restrictions pre-digested."""

    def __init__(
        self,
        decl: ast.PropertyDecl,
        model: "LoadedModel",
        parent: Optional["LoadedProperty"],
        event_id: str,
        order: int,
    ) -> None:
        self.decl = decl
        self.model = model
        self.parent = parent
        self.event_id = event_id
        self.order = order
        self.name = decl.name
        self.lname = decl.name.lower()
        self.ptype = decl.ptype
        self.depth = decl.depth

        self.conditions = [r.expr for r in decl.restriction_values("Condition")]
        setvalues = decl.restriction_values("SetValue")
        if len(setvalues) > 1:
            raise ValidationError(f"property {self.name} declares SetValue twice")
        self.setvalue = setvalues[0].expr if setvalues else None
        self.permissions = decl.restriction_values("Permission")
        self.value_conditions = [r.expr for r in decl.restriction_values("ValueCondition")]
        self.acts = [r.act for r in decl.restriction_values("SetDo")]

        dt = decl.restriction("DataType")
        self.datatype = None
        if dt is not None:
            key = dt.value.strip().lower()
            if key not in _DATATYPE_ALIASES:
                raise ValidationError(f"unknown DataType {dt.value!r} on {self.name}")
            self.datatype = _DATATYPE_ALIASES[key]

        self.immutable = _flag(decl.restriction("Immutable"))
        self.required = _flag(decl.restriction("Required"))
        self.unique = _flag(decl.restriction("Unique")) or _flag(
            decl.restriction("UniqueIdentifier")
        )
        self.has_unique_identifier = _flag(decl.restriction("UniqueIdentifier"))

        mult = decl.restriction("Multiple")
        self.multiple_cap: Optional[int] = None
        if mult is not None:
            try:
                self.multiple_cap = int(mult.value.strip())
            except ValueError:
                raise ValidationError(
                    f"Multiple on {self.name} needs an integer, got {mult.value!r}"
                ) from None

        rng = decl.restriction("Range")
        self.range_name = rng.value.strip() if rng is not None else None

        sr = decl.restriction("SetRange")
        self.set_range: Optional[list[str]] = None
        if sr is not None:
            self.set_range = [_strip_quotes(item.strip()) for item in sr.value.split("|")]

        default = decl.restriction("Default")
        self.default = default.expr if default is not None and default.expr else (
            ast.Literal(default.value) if default is not None else None
        )

        self.deps: set[tuple[str, str]] = set()
        for expr in [*self.conditions, self.setvalue, self.default]:
            if expr is not None:
                self.deps |= dependencies(expr)
        for act in self.acts:
            for expr in _act_exprs(act):
                self.deps |= dependencies(expr)

        self.auto = (
            self.setvalue is not None
            or self.default is not None
            or (self.ptype == "SetDo" and bool(self.acts))
        )

    @property
    def path(self) -> tuple[str, ...]:
        parts = []
        node: Optional[LoadedProperty] = self
        while node is not None:
            parts.append(node.name)
            node = node.parent
        return tuple(reversed(parts))

    @property
    def dotted(self) -> str:
        return ".".join(self.path)

    def listens_to(self, type_lower: str) -> bool:
        for scope, path in self.deps:
            if scope == "individual" and type_lower in path.split("."):
                return True
        return False

    def listens_global(self, type_lower: str) -> bool:
        return ("global", type_lower) in self.deps

    def has_global_deps(self) -> bool:
        return any(scope == "global" for scope, _ in self.deps)


def _flag(restriction: Optional[ast.Restriction]) -> bool:
    if restriction is None:
        return False
    return restriction.value.strip().strip('"').lower() in _TRUTHY_FLAG


def _strip_quotes(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _act_exprs(act: ast.Act):
    if isinstance(act, ast.CreateAct):
        yield act.name
        for _, expr in act.sets:
            yield expr
    else:
        yield act.target
        yield act.value


class LoadedModel:
    def __init__(self, decl: ast.ModelDecl, event_id: str, order: int) -> None:
        self.decl = decl
        self.name = decl.name
        self.concept = decl.concept
        self.event_id = event_id
        self.order = order
        self.properties: list[LoadedProperty] = []
        self.by_lname: dict[str, LoadedProperty] = {}
        self.auto_nodes: list[LoadedProperty] = []

    def add(self, prop: LoadedProperty) -> None:
        if prop.lname in self.by_lname:
            raise ValidationError(
                f"model {self.name} declares property {prop.name!r} twice"
            )
        self.properties.append(prop)
        self.by_lname[prop.lname] = prop
        if prop.auto:
            self.auto_nodes.append(prop)

    def require(self, name: str) -> LoadedProperty:
        prop = self.by_lname.get(name.strip().lower().split(".")[-1])
        if prop is None:
            raise NotInModel(f"model {self.name} has no property {name!r}")
        return prop


@dataclass
class CommitResult:
    trigger: Event
    events: list[Event]  # everything committed by the submission, trigger first


@dataclass
class ScriptCheck:
    path: str
    expected: str
    actual: Value


@dataclass
class ScriptResult:
    instance: Event
    checks: list[ScriptCheck] = field(default_factory=list)


class Engine:
    """Single-writer facade over one event graph plus the model registry."""

    def __init__(self, clock=None, cascade_cap: int = 10000, _graph: EventGraph = None):
        self.clock = clock or SystemClock()
        self.cascade_cap = cascade_cap
        self.graph = _graph if _graph is not None else EventGraph(self.clock)
        self.models: dict[str, LoadedModel] = {}
        self.vocabularies: dict[str, ast.VocabularyDecl] = {}
        self._lock = threading.RLock()

    # --- construction from a dump ---

    @classmethod
    def from_records(cls, records: list[dict], clock=None, cascade_cap: int = 10000):
        clock = clock or SystemClock()
        graph = import_records(records, clock)
        return cls(clock=clock, cascade_cap=cascade_cap, _graph=graph)

    @classmethod
    def from_dump(cls, text: str, clock=None, cascade_cap: int = 10000):
        return cls.from_records(loads_records(text), clock, cascade_cap)

    def export_records(self) -> list[dict]:
        with self._lock:
            return events_to_records(self.graph.events)

    def export_dump(self) -> str:
        with self._lock:
            return dumps(self.graph.events)

    # --- actors and roles ---

    def register_actor(self, name: str, roles=()) -> Event:
        with self._lock:
            if not name or not name.strip():
                raise ValidationError("actor name must not be empty")
            name = name.strip()
            if self.find_actor(name) is not None:
                raise DuplicateIdentifier(f"actor {name!r} already registered")
            root = self.graph.root
            event = self.graph.append(
                base=root.id,
                type="Actor",
                value=name,
                actor=SYSTEM_ACTOR,
                model="",
                cause=(root.id,),
            )
            for role in roles:
                self.grant_role(event.id, role)
            return event

    def grant_role(self, actor, role: str) -> Event:
        with self._lock:
            actor_event = self._actor_event(actor)
            return self.graph.append(
                base=actor_event.id,
                type="Role",
                value=role.strip(),
                actor=SYSTEM_ACTOR,
                model="",
                cause=(actor_event.id,),
            )

    def find_actor(self, name: str) -> Optional[Event]:
        for event in self.graph.of_type("Actor"):
            if event.value == name:
                return event
        return None

    def actors(self) -> list[Event]:
        return self.graph.of_type("Actor")

    def roles_of(self, actor_id: str) -> set[str]:
        return {
            str(e.value).lower() for e in self.graph.children(actor_id, "Role")
        }

    def _actor_event(self, actor) -> Event:
        if isinstance(actor, Event):
            return actor
        if isinstance(actor, Ref):
            actor = actor.id
        if isinstance(actor, str) and EVENT_ID_RE.match(actor):
            if not self.graph.has(actor):
                raise UnknownActor(f"no actor event {actor}")
            event = self.graph.get(actor)
            if event.type_lower != "actor":
                raise UnknownActor(f"{actor} is not an actor event")
            return event
        found = self.find_actor(str(actor))
        if found is None:
            raise UnknownActor(f"unknown actor {actor!r}")
        return found

    def _actor_id(self, actor) -> str:
        if actor is None:
            return SYSTEM_ACTOR
        if isinstance(actor, str) and (actor == SYSTEM_ACTOR or actor.upper() == "SYSTEM"):
            return SYSTEM_ACTOR
        return self._actor_event(actor).id

    # --- model loading ---

    def load_document(self, doc: ast.Document) -> list[LoadedModel]:
        """Load every model and vocabulary in the document (not individuals)."""
        loaded = []
        for item in doc.items:
            if isinstance(item, ast.ModelDecl):
                loaded.append(self.load_model(item))
            elif isinstance(item, ast.VocabularyDecl):
                self.vocabularies[item.name] = item
        return loaded

    def load_model(self, decl: ast.ModelDecl) -> LoadedModel:
        with self._lock:
            self._validate_model_decl(decl)
            baseline = len(self.graph.events)
            try:
                root = self.graph.root
                model_event = self.graph.append(
                    base=root.id,
                    type="Model",
                    value=decl.name,
                    actor=SYSTEM_ACTOR,
                    model="",
                    cause=(root.id,),
                )
                ids: dict[int, str] = {}
                for prop, parent in _walk_with_parents(decl):
                    base = ids[id(parent)] if parent is not None else model_event.id
                    event = self.graph.append(
                        base=base,
                        type=prop.name,
                        value=prop.ptype,
                        actor=SYSTEM_ACTOR,
                        model="",
                        cause=(base,),
                    )
                    ids[id(prop)] = event.id
                return self._register_model(decl, model_event.id, ids)
            except BslError:
                self.graph.truncate(baseline)
                raise

    def attach_model(self, decl: ast.ModelDecl) -> LoadedModel:
        """Bind a model definition to template events already in the graph
        (after importing a dump). Appends nothing."""
        with self._lock:
            self._validate_model_decl(decl)
            model_event = None
            for event in self.graph.of_type("Model"):
                if event.value == decl.name:
                    model_event = event
            if model_event is None:
                raise UnknownModel(f"no template events for model {decl.name!r} in graph")
            ids: dict[int, str] = {}
            for prop, parent in _walk_with_parents(decl):
                base = ids[id(parent)] if parent is not None else model_event.id
                found = None
                for event in self.graph.children(base, prop.name):
                    if event.value == prop.ptype:
                        found = event
                if found is None:
                    raise UnknownModel(
                        f"model {decl.name!r} in graph lacks property {prop.name!r}"
                    )
                ids[id(prop)] = found.id
            return self._register_model(decl, model_event.id, ids)

    def attach_document(self, doc: ast.Document) -> list[LoadedModel]:
        return [self.attach_model(m) for m in doc.models]

    def _validate_model_decl(self, decl: ast.ModelDecl) -> None:
        if not decl.name.strip():
            raise ValidationError("model name must not be empty")
        if decl.name in self.models:
            raise ValidationError(f"model {decl.name!r} already loaded")
        for prop in decl.walk():
            if prop.depth > ast.MAX_NESTING:
                raise NestingViolation(
                    f"property {prop.name!r} nests at depth {prop.depth},"
                    f" limit is {ast.MAX_NESTING}"
                )
            if prop.ptype not in ast.PROPERTY_TYPES:
                raise ValidationError(f"unknown property type {prop.ptype!r}")

    def _register_model(
        self, decl: ast.ModelDecl, model_event_id: str, ids: dict[int, str]
    ) -> LoadedModel:
        model = LoadedModel(decl, model_event_id, order=len(self.models))
        scaffold: dict[int, LoadedProperty] = {}
        for order, (prop, parent) in enumerate(_walk_with_parents(decl)):
            loaded = LoadedProperty(
                decl=prop,
                model=model,
                parent=scaffold[id(parent)] if parent is not None else None,
                event_id=ids[id(prop)],
                order=order,
            )
            scaffold[id(prop)] = loaded
            model.add(loaded)
        self.models[decl.name] = model
        return model

    def resolve_model(self, name: str) -> LoadedModel:
        if name in self.models:
            return self.models[name]
        lowered = name.strip().lower()
        by_name = [m for m in self.models.values() if m.name.lower() == lowered]
        if len(by_name) == 1:
            return by_name[0]
        by_concept = [m for m in self.models.values() if m.concept.lower() == lowered]
        if len(by_concept) == 1:
            return by_concept[0]
        if len(by_concept) > 1:
            raise UnknownModel(
                f"concept {name!r} has {len(by_concept)} models; name one explicitly"
            )
        raise UnknownModel(f"no model or concept named {name!r}")

    # --- individuals ---

    def instances_of(self, model: LoadedModel) -> list[Event]:
        return self.graph.children(model.event_id, "Instance")

    def instances(self) -> list[Event]:
        return self.graph.of_type("Instance")

    def resolve_individual(self, individual) -> Event:
        if isinstance(individual, Event):
            return individual
        if isinstance(individual, Ref):
            individual = individual.id
        if isinstance(individual, str) and EVENT_ID_RE.match(individual):
            if not self.graph.has(individual):
                raise UnknownIndividual(f"no event {individual}")
            event = self.graph.get(individual)
            if event.type_lower != "instance":
                raise UnknownIndividual(f"{individual} is not an individual")
            return event
        matches = [e for e in self.instances() if e.value == individual]
        if not matches:
            raise UnknownIndividual(f"no individual named {individual!r}")
        if len(matches) > 1:
            raise UnknownIndividual(
                f"individual name {individual!r} is ambiguous ({len(matches)} matches)"
            )
        return matches[0]

    def instantiate(self, model, name: str, actor=None) -> CommitResult:
        with self._lock:
            baseline = len(self.graph.events)
            try:
                event = self._append_instance(model, name, self._actor_id(actor))
                self._cascade([event])
                return CommitResult(trigger=event, events=self.graph.events[baseline:])
            except BslError:
                self.graph.truncate(baseline)
                raise

    def _append_instance(
        self, model, name: str, actor_id: str, extra_cause: tuple[str, ...] = ()
    ) -> Event:
        if not isinstance(model, LoadedModel):
            model = self.resolve_model(str(model))
        if not name or not str(name).strip():
            raise ValidationError("individual name must not be empty")
        name = str(name).strip()
        for existing in self.instances_of(model):
            if existing.value == name:
                raise DuplicateIdentifier(
                    f"model {model.name} already has an individual {name!r}"
                )
        cause = (model.event_id,) + tuple(c for c in extra_cause if c != model.event_id)
        return self.graph.append(
            base=model.event_id,
            type="Instance",
            value=name,
            actor=actor_id,
            model=model.name,
            cause=cause,
        )

    # --- submission pipeline ---

    def submit(self, individual, prop: str, value, actor=None) -> CommitResult:
        with self._lock:
            baseline = len(self.graph.events)
            try:
                event = self._append_submission(individual, prop, value, actor)
                self._cascade([event])
                return CommitResult(trigger=event, events=self.graph.events[baseline:])
            except BslError:
                self.graph.truncate(baseline)
                raise

    def _append_submission(self, individual, prop: str, value, actor) -> Event:
        instance = self.resolve_individual(individual)
        model = self.models.get(instance.model)
        if model is None:
            raise UnknownModel(
                f"model {instance.model!r} is not attached; load its definition first"
            )
        node = model.require(prop)
        self._check_dotted(node, prop)
        actor_id = self._actor_id(actor)
        parent = self._parent_reification(node, instance)
        if parent is None:
            raise ParentMissing(
                f"{node.dotted} needs its parent {node.parent.name!r} first"
            )
        self._check_enabled(node, instance, parent, actor_id)
        value = self._coerce(node, value)
        self._check_value(node, instance, parent, actor_id, value)
        cause = self._submission_cause(node, instance, parent)
        return self.graph.append(
            base=parent.id,
            type=node.name,
            value=value,
            actor=actor_id,
            model=model.name,
            cause=cause,
        )

    def _check_dotted(self, node: LoadedProperty, prop: str) -> None:
        given = [s.strip().lower() for s in prop.split(".") if s.strip()]
        if len(given) > 1:
            expected = [s.lower() for s in node.path]
            if given != expected[-len(given):]:
                raise NotInModel(
                    f"path {prop!r} does not match declared nesting {node.dotted!r}"
                )

    def _parent_reification(self, node: LoadedProperty, instance: Event) -> Optional[Event]:
        ancestors = node.path[:-1]
        current = instance
        for name in ancestors:
            nxt = self.graph.latest_reification(current.id, name)
            if nxt is None:
                return None
            current = nxt
        return current

    def _ctx(
        self,
        instance: Event,
        actor_id: str,
        node: LoadedProperty,
        parent: Optional[Event],
        pending: Optional[Value] = None,
    ) -> EvalContext:
        parent_event = None
        if node.parent is not None and parent is not None:
            parent_event = parent.id
        return EvalContext(
            graph=self.graph,
            current_individual=instance.id,
            current_actor=actor_id,
            parent_event=parent_event,
            pending_value=pending,
        )

    def _check_enabled(
        self, node: LoadedProperty, instance: Event, parent: Event, actor_id: str
    ) -> None:
        ctx = self._ctx(instance, actor_id, node, parent)
        for cond in node.conditions:
            if not condition_satisfied(cond, ctx):
                raise ConditionFalse(f"condition not met for {node.dotted}")
        existing = self.graph.children(parent.id, node.name)
        if node.immutable and existing:
            raise ImmutableViolation(f"{node.dotted} is immutable and already set")
        if node.multiple_cap is not None and len(existing) >= node.multiple_cap:
            raise MultiplicityViolation(
                f"{node.dotted} allows {node.multiple_cap} events,"
                f" {len(existing)} already present"
            )
        if not self._permitted(node, instance, parent, actor_id):
            raise PermissionDenied(f"actor not permitted to write {node.dotted}")

    def _permitted(
        self, node: LoadedProperty, instance: Event, parent: Event, actor_id: str
    ) -> bool:
        if actor_id == SYSTEM_ACTOR:
            return True
        if node.setvalue is not None:
            return False  # computed properties belong to the engine
        if not node.permissions:
            return True
        ctx = self._ctx(instance, actor_id, node, parent)
        roles = None
        for perm in node.permissions:
            if perm.expr is None:
                if roles is None:
                    roles = self.roles_of(actor_id)
                if perm.value.strip().lower() in roles:
                    return True
                continue
            try:
                outcome = eval_expr(perm.expr, ctx)
            except EvalError:
                continue
            if self._grants(outcome, actor_id):
                return True
        return False

    def _grants(self, outcome: Value, actor_id: str) -> bool:
        if isinstance(outcome, Ref):
            return outcome.id == actor_id
        if isinstance(outcome, list):
            return any(self._grants(item, actor_id) for item in outcome)
        if isinstance(outcome, str):
            if EVENT_ID_RE.match(outcome):
                return outcome == actor_id
            return outcome.lower() in self.roles_of(actor_id)
        return False

    def _coerce(self, node: LoadedProperty, value) -> Value:
        if isinstance(value, Undefined):
            raise DataTypeMismatch(f"{node.dotted} cannot be set to undefined")
        if node.datatype is not None:
            value = self._coerce_datatype(node, value)
        elif isinstance(value, str):
            if EVENT_ID_RE.match(value):
                if not self.graph.has(value):
                    raise DataTypeMismatch(f"value references unknown event {value}")
                value = Ref(value)
            elif node.ptype == "Relation":
                value = self._resolve_relation_text(node, value)
            elif node.ptype == "Role":
                found = self.find_actor(value)
                if found is not None:
                    value = Ref(found.id)
        if isinstance(value, Ref) and node.range_name:
            self._check_range(node, value)
        return value

    def _coerce_datatype(self, node: LoadedProperty, value) -> Value:
        kind = node.datatype
        try:
            if kind == "string":
                return value if isinstance(value, str) else canonical_text(value)
            if kind == "integer":
                if isinstance(value, bool):
                    raise ValueError
                if isinstance(value, int):
                    return value
                if isinstance(value, float) and value.is_integer():
                    return int(value)
                return int(str(value).strip())
            if kind == "float":
                if isinstance(value, bool):
                    raise ValueError
                if isinstance(value, (int, float)):
                    return value
                text = str(value).strip()
                return float(text) if "." in text else int(text)
            if kind == "boolean":
                if isinstance(value, bool):
                    return value
                text = str(value).strip().lower()
                if text in ("true", "1", "yes"):
                    return True
                if text in ("false", "0", "no"):
                    return False
                raise ValueError
            if kind == "datetime":
                from datetime import datetime

                if isinstance(value, datetime):
                    return value
                return parse_instant(str(value).strip())
            # reference
            if isinstance(value, Ref):
                return value
            text = str(value).strip()
            if EVENT_ID_RE.match(text):
                if not self.graph.has(text):
                    raise ValueError
                return Ref(text)
            return Ref(self.resolve_individual(text).id)
        except (ValueError, UnknownIndividual):
            raise DataTypeMismatch(
                f"{node.dotted} expects {node.datatype}, got {value!r}"
            ) from None

    def _resolve_relation_text(self, node: LoadedProperty, value: str) -> Value:
        if node.range_name:
            try:
                model = self.resolve_model(node.range_name)
            except UnknownModel:
                raise RangeViolation(
                    f"{node.dotted} ranges over unknown model {node.range_name!r}"
                ) from None
            for instance in self.instances_of(model):
                if instance.value == value:
                    return Ref(instance.id)
            raise RangeViolation(
                f"no individual {value!r} in model {model.name} for {node.dotted}"
            )
        matches = [e for e in self.instances() if e.value == value]
        if len(matches) == 1:
            return Ref(matches[0].id)
        return value  # plain text relation; target not modeled here

    def _check_range(self, node: LoadedProperty, value: Ref) -> None:
        if not self.graph.has(value.id):
            raise RangeViolation(f"{node.dotted} references unknown event {value.id}")
        target = self.graph.get(value.id)
        if target.type_lower != "instance":
            raise RangeViolation(f"{node.dotted} must reference an individual")
        wanted = node.range_name.strip().lower()
        model = self.models.get(target.model)
        concept = model.concept.lower() if model is not None else ""
        if target.model.lower() != wanted and concept != wanted:
            raise RangeViolation(
                f"{node.dotted} ranges over {node.range_name!r},"
                f" got individual of {target.model!r}"
            )

    def _check_value(
        self,
        node: LoadedProperty,
        instance: Event,
        parent: Event,
        actor_id: str,
        value: Value,
    ) -> None:
        ctx = self._ctx(instance, actor_id, node, parent, pending=value)
        for vc in node.value_conditions:
            try:
                outcome = eval_expr(vc, ctx)
            except EvalError as exc:
                raise ValueConditionFailed(
                    f"value condition on {node.dotted} failed: {exc.message}"
                ) from None
            if not is_truthy(outcome):
                raise ValueConditionFailed(
                    f"value {value!r} rejected by condition on {node.dotted}"
                )
        if node.set_range is not None:
            rendered = value if isinstance(value, str) else canonical_text(value)
            if rendered not in node.set_range:
                raise RangeViolation(
                    f"value {rendered!r} outside SetRange of {node.dotted}"
                )
        if node.unique:
            for other in self.instances_of(node.model):
                if other.id == instance.id:
                    continue
                theirs = current_value(self.graph, other.id, node.path)
                if not isinstance(theirs, Undefined) and loose_equal(theirs, value):
                    raise UniqueViolation(
                        f"value {value!r} for {node.dotted} already used by"
                        f" {other.value!r}"
                    )

    def _submission_cause(
        self, node: LoadedProperty, instance: Event, parent: Event
    ) -> tuple[str, ...]:
        deps: list[Event] = []
        for cond in node.conditions:
            for scope, path in sorted(dependencies(cond)):
                if scope != "individual":
                    continue
                event = path_event(self.graph, instance.id, tuple(path.split(".")))
                if event is not None:
                    deps.append(event)
        deps.sort(key=lambda e: e.seq)
        cause = [parent.id]
        for event in deps:
            if event.id not in cause:
                cause.append(event.id)
        return tuple(cause)

    # --- dataflow cascade ---

    def _cascade(self, initial: list[Event]) -> None:
        queue = deque(initial)
        fires = 0
        while queue:
            event = queue.popleft()
            node = self._property_of(event)
            if node is not None and node.acts and node.ptype != "SetDo":
                for act in node.acts:
                    produced = self._execute_act(act, event)
                    fires += len(produced)
                    self._check_cap(fires)
                    queue.extend(produced)
            for listener, instance in self._listeners(event):
                produced = self._try_fire(listener, instance, event)
                fires += len(produced)
                self._check_cap(fires)
                queue.extend(produced)

    def _check_cap(self, fires: int) -> None:
        if fires > self.cascade_cap:
            raise CascadeLimitExceeded(
                f"cascade generated more than {self.cascade_cap} events;"
                " the model does not reach a fixed point"
            )

    def _property_of(self, event: Event) -> Optional[LoadedProperty]:
        if not event.model or event.type_lower == "instance":
            return None
        model = self.models.get(event.model)
        if model is None:
            return None
        return model.by_lname.get(event.type_lower)

    def _listeners(self, event: Event) -> list[tuple[LoadedProperty, Event]]:
        results: list[tuple[LoadedProperty, Event]] = []
        seen: set[tuple[int, str]] = set()

        def add(node: LoadedProperty, instance: Event) -> None:
            key = (id(node), instance.id)
            if key not in seen:
                seen.add(key)
                results.append((node, instance))

        etype = event.type_lower
        if etype == "instance":
            model = self.models.get(event.model)
            if model is not None:
                for node in model.auto_nodes:
                    add(node, event)
            for other in self.models.values():
                for node in other.auto_nodes:
                    if node.has_global_deps():
                        for instance in self.instances_of(other):
                            add(node, instance)
        else:
            instance = self.graph.owner_instance(event)
            if instance is not None:
                model = self.models.get(instance.model)
                if model is not None:
                    for node in model.auto_nodes:
                        if node.listens_to(etype):
                            add(node, instance)
            for other in self.models.values():
                for node in other.auto_nodes:
                    if node.listens_global(etype):
                        for inst in self.instances_of(other):
                            add(node, inst)
        return results

    def _try_fire(
        self, node: LoadedProperty, instance: Event, trigger: Event
    ) -> list[Event]:
        parent = self._parent_reification(node, instance)
        if parent is None:
            return []
        ctx = self._ctx(instance, SYSTEM_ACTOR, node, parent)
        for cond in node.conditions:
            if not condition_satisfied(cond, ctx):
                return []
        if node.setvalue is not None:
            try:
                value = eval_expr(node.setvalue, ctx)
            except EvalError:
                return []
            if isinstance(value, Undefined):
                return []
            latest = self.graph.latest_reification(parent.id, node.name)
            if latest is not None and strict_equal(latest.value, value):
                return []
            cause = self._auto_cause(node, instance, trigger)
            return [
                self.graph.append(
                    base=parent.id,
                    type=node.name,
                    value=value,
                    actor=SYSTEM_ACTOR,
                    model=node.model.name,
                    cause=cause,
                )
            ]
        if node.ptype == "SetDo" and node.acts:
            if self.graph.latest_reification(parent.id, node.name) is not None:
                return []  # system acts fire once per parent
            marker = self.graph.append(
                base=parent.id,
                type=node.name,
                value="done",
                actor=SYSTEM_ACTOR,
                model=node.model.name,
                cause=self._auto_cause(node, instance, trigger),
            )
            produced = [marker]
            for act in node.acts:
                produced.extend(self._execute_act(act, marker))
            return produced
        if node.default is not None:
            if self.graph.latest_reification(parent.id, node.name) is not None:
                return []
            try:
                value = eval_expr(node.default, ctx)
            except EvalError:
                return []
            if isinstance(value, Undefined):
                return []
            return [
                self.graph.append(
                    base=parent.id,
                    type=node.name,
                    value=value,
                    actor=SYSTEM_ACTOR,
                    model=node.model.name,
                    cause=self._auto_cause(node, instance, trigger),
                )
            ]
        return []

    def _auto_cause(
        self, node: LoadedProperty, instance: Event, trigger: Event
    ) -> tuple[str, ...]:
        deps: list[Event] = []
        exprs = [*node.conditions]
        if node.setvalue is not None:
            exprs.append(node.setvalue)
        for expr in exprs:
            for scope, path in sorted(dependencies(expr)):
                if scope != "individual":
                    continue
                event = path_event(self.graph, instance.id, tuple(path.split(".")))
                if event is not None:
                    deps.append(event)
        deps.sort(key=lambda e: e.seq)
        cause = [trigger.id]
        for event in deps:
            if event.id not in cause:
                cause.append(event.id)
        return tuple(cause)

    def _execute_act(self, act: ast.Act, trigger: Event) -> list[Event]:
        instance = self.graph.owner_instance(trigger)
        # acts run in the triggering event's context: $Value is its value
        ctx = EvalContext(
            graph=self.graph,
            current_individual=instance.id if instance is not None else "",
            current_actor=SYSTEM_ACTOR,
            parent_event=trigger,
            pending_value=trigger.value,
        )
        if isinstance(act, ast.CreateAct):
            model = self.resolve_model(act.concept)
            name = eval_expr(act.name, ctx)
            name_text = name if isinstance(name, str) else canonical_text(name)
            created = self._append_instance(
                model, name_text, SYSTEM_ACTOR, extra_cause=(trigger.id,)
            )
            produced = [created]
            for prop, expr in act.sets:
                value = eval_expr(expr, ctx)
                produced.append(
                    self._append_submission(created, prop, value, SYSTEM_ACTOR)
                )
            return produced
        target = eval_expr(act.target, ctx)
        if isinstance(target, list) and len(target) == 1:
            target = target[0]
        if not isinstance(target, Ref):
            raise NotAReference(f"EditIndividual target must be a reference, got {target!r}")
        value = eval_expr(act.value, ctx)
        return [self._append_submission(target.id, act.prop, value, SYSTEM_ACTOR)]

    # --- projections and reports ---

    def snapshot(self, individual, max_seq: Optional[int] = None) -> dict:
        """Latest value of every property path, keyed by lowercase dotted path."""
        instance = self.resolve_individual(individual)
        out: dict[str, object] = {}

        def rec(node_id: str, prefix: str) -> None:
            latest: dict[str, Event] = {}
            for event in self.graph.children(node_id):
                if max_seq is not None and event.seq > max_seq:
                    continue
                if event.type_lower == "instance":
                    continue
                latest[event.type_lower] = event
            for type_lower, event in latest.items():
                key = prefix + type_lower
                out[key] = value_to_json(event.value)
                rec(event.id, key + ".")

        rec(instance.id, "")
        return out

    def state_at(self, individual, path, seq: int) -> Value:
        instance = self.resolve_individual(individual)
        if isinstance(path, str):
            path = tuple(path.split("."))
        return current_value(self.graph, instance.id, path, max_seq=seq)

    def is_complete(self, individual) -> tuple[bool, list[str]]:
        """Check the Required restrictions of the individual's model."""
        instance = self.resolve_individual(individual)
        model = self.models.get(instance.model)
        if model is None:
            raise UnknownModel(f"model {instance.model!r} is not attached")
        missing = []
        for node in model.properties:
            if not node.required:
                continue
            parent = self._parent_reification(node, instance)
            if parent is None:
                continue  # whole subtree absent; its own Required parent reports
            if not self.graph.children(parent.id, node.name):
                missing.append(node.dotted)
        return (not missing, missing)

    def enabled_properties(self, individual, actor=None) -> list[dict]:
        """Per property: may this actor write it now, and why not otherwise."""
        instance = self.resolve_individual(individual)
        model = self.models.get(instance.model)
        if model is None:
            raise UnknownModel(f"model {instance.model!r} is not attached")
        actor_id = self._actor_id(actor)
        report = []
        for node in model.properties:
            entry = {
                "property": node.dotted,
                "type": node.ptype,
                "enabled": False,
                "reason": "",
                "value": None,
                "computed": node.setvalue is not None,
            }
            parent = self._parent_reification(node, instance)
            if parent is not None:
                latest = self.graph.latest_reification(parent.id, node.name)
                if latest is not None:
                    entry["value"] = value_to_json(latest.value)
            if parent is None:
                entry["reason"] = ParentMissing.code
            elif node.setvalue is not None:
                entry["reason"] = "Computed"
            else:
                try:
                    self._check_enabled(node, instance, parent, actor_id)
                    entry["enabled"] = True
                except ValidationError as exc:
                    entry["reason"] = exc.code
            report.append(entry)
        return report

    def describe_individual(self, individual) -> dict:
        instance = self.resolve_individual(individual)
        return {
            "id": instance.id,
            "name": instance.value if isinstance(instance.value, str) else "",
            "model": instance.model,
            "seq": instance.seq,
            "actor": instance.actor,
            "properties": self.snapshot(instance),
        }

    # --- individual scripts ---

    def run_script(
        self,
        decl: ast.IndividualDecl,
        actor_for: Optional[Callable[[str], object]] = None,
        default_actor=None,
    ) -> ScriptResult:
        """Execute an individual script: plain assertions become submissions;
        assertions on computed (SetValue) properties are checked as
        expectations against the engine's own output."""

        def pick_actor(path: str):
            if actor_for is not None:
                chosen = actor_for(path)
                if chosen is not None:
                    return chosen
            return default_actor

        model = self.resolve_model(decl.concept)
        result_events = self.instantiate(model, decl.name, actor=pick_actor(""))
        instance = result_events.trigger
        checks: list[ScriptCheck] = []

        def handle(assertion: ast.Assertion, prefix: str) -> None:
            node = model.require(assertion.name)
            path = prefix + assertion.name if not prefix else f"{prefix}.{assertion.name}"
            if node.setvalue is not None:
                actual = current_value(self.graph, instance.id, node.path)
                if not _matches_expectation(actual, assertion.value):
                    raise ExpectationFailed(
                        f"{decl.name}.{path}: expected {assertion.value!r},"
                        f" engine computed {actual!r}"
                    )
                checks.append(
                    ScriptCheck(path=path, expected=assertion.value, actual=actual)
                )
            else:
                self.submit(instance, node.name, assertion.value, actor=pick_actor(path))
            for child in assertion.children:
                handle(child, path)

        for assertion in decl.assertions:
            handle(assertion, "")
        return ScriptResult(instance=instance, checks=checks)


def _matches_expectation(actual: Value, expected_text: str) -> bool:
    if isinstance(actual, Undefined):
        return expected_text.strip().lower() in ("undefined", "")
    return loose_equal(actual, expected_text)


def _walk_with_parents(decl: ast.ModelDecl):
    def rec(props, parent):
        for prop in props:
            yield prop, parent
            yield from rec(prop.children, prop)

    yield from rec(decl.properties, None)
