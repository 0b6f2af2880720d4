"""Expression and query evaluation against the event graph.

Path semantics mirror everyday JavaScript member access: walking a path
steps through the latest reification event of each named property. With
the strict prefix ($.) a missing intermediate step aborts evaluation with
MissingValue; a missing final step yields undefined, so expressions can
probe optional leaf properties. The safe prefix ($$) never aborts, it
yields undefined for any break in the path.

undefined propagates through comparisons (the result is undefined, which
conditions treat as not satisfied), except equality written against the
undefined literal, which genuinely tests absence. && and || short-circuit
and return the deciding operand.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from . import ast
from .errors import (
    DivisionByZero,
    EvalError,
    IndexOutOfRange,
    MissingValue,
    NotAReference,
    TypeMismatch,
)
from .graph import EventGraph
from .values import UNDEFINED, Ref, Undefined, Value, canonical_text, is_number

_NUMERIC_RE = re.compile(r"^-?\d+(\.\d+)?$")


@dataclass
class EvalContext:
    graph: EventGraph
    current_individual: str = ""
    current_actor: str = ""
    parent_event: Optional[str] = None
    pending_value: Optional[Value] = None
    max_seq: Optional[int] = None  # evaluate against the log prefix up to here


def is_truthy(value: Value) -> bool:
    if isinstance(value, Undefined):
        return False
    if isinstance(value, bool):
        return value
    if is_number(value):
        return value != 0
    if isinstance(value, str):
        return value != ""
    if isinstance(value, list):
        return len(value) > 0
    return True  # Ref, datetime


def _as_number(value: Value) -> Optional[float | int]:
    """Numeric view of a value, or None when it has none."""
    if is_number(value):
        return value
    if isinstance(value, str) and _NUMERIC_RE.match(value.strip()):
        text = value.strip()
        return float(text) if "." in text else int(text)
    return None


def walk_path(
    graph: EventGraph,
    start_id: str,
    path: tuple[str, ...],
    strict: bool,
    max_seq: Optional[int] = None,
) -> Value:
    """Resolve a property path starting at an individual or event node.

    Each step picks the latest reification of that property under the
    current node. The pseudo-property "actor" reads the node's actor
    field when no declared property shadows it. A reference value in
    mid-path jumps the walk to the referenced event.
    """
    node_id = start_id
    for i, step in enumerate(path):
        last = i == len(path) - 1
        event = graph.latest_reification(node_id, step, max_seq)
        if event is None:
            if step.lower() == "actor" and graph.has(node_id):
                value: Value = Ref(graph.get(node_id).actor)
            elif last:
                return UNDEFINED
            elif strict:
                raise MissingValue(f"no {step!r} on the way to {'.'.join(path)}")
            else:
                return UNDEFINED
        else:
            value = event.value
            node_id = event.id
        if last:
            return value
        if isinstance(value, Ref) and graph.has(value.id) and event is not None:
            # prefer nested reifications; fall through to the referenced
            # node only when this property has no children of the next step
            if not graph.children(event.id, path[i + 1]):
                node_id = value.id
        elif isinstance(value, Ref) and graph.has(value.id):
            node_id = value.id
    return UNDEFINED


def current_value(
    graph: EventGraph, individual_id: str, path: str | tuple[str, ...], max_seq=None
) -> Value:
    """Latest value of a property path on an individual; undefined when absent."""
    if isinstance(path, str):
        path = tuple(path.split("."))
    return walk_path(graph, individual_id, path, strict=False, max_seq=max_seq)


def path_event(
    graph: EventGraph,
    start_id: str,
    path: tuple[str, ...],
    max_seq: Optional[int] = None,
):
    """Final event of a property path, or None when the path breaks.

    Same walk as walk_path, but hands back the event itself so callers can
    record it as a cause.
    """
    node_id = start_id
    event = None
    for i, step in enumerate(path):
        event = graph.latest_reification(node_id, step, max_seq)
        if event is None:
            return None
        node_id = event.id
        if i < len(path) - 1 and isinstance(event.value, Ref) and graph.has(event.value.id):
            if not graph.children(event.id, path[i + 1]):
                node_id = event.value.id
    return event


# --- operator semantics ---


def _loose_eq(a: Value, b: Value) -> bool:
    if isinstance(a, Undefined) or isinstance(b, Undefined):
        return isinstance(a, Undefined) and isinstance(b, Undefined)
    if isinstance(a, bool):
        a = 1 if a else 0
    if isinstance(b, bool):
        b = 1 if b else 0
    na, nb = _as_number(a), _as_number(b)
    if na is not None and nb is not None:
        return na == nb
    if isinstance(a, Ref) and isinstance(b, Ref):
        return a.id == b.id
    if isinstance(a, Ref) and isinstance(b, str):
        return a.id == b
    if isinstance(a, str) and isinstance(b, Ref):
        return a == b.id
    if isinstance(a, datetime) and isinstance(b, datetime):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def _strict_eq(a: Value, b: Value) -> bool:
    if isinstance(a, Undefined) or isinstance(b, Undefined):
        return isinstance(a, Undefined) and isinstance(b, Undefined)
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if is_number(a) and is_number(b):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, Ref) and isinstance(b, Ref):
        return a.id == b.id
    if isinstance(a, datetime) and isinstance(b, datetime):
        return a == b
    return False


def _relational(op: str, a: Value, b: Value) -> Value:
    if isinstance(a, Undefined) or isinstance(b, Undefined):
        return UNDEFINED
    if isinstance(a, datetime) and isinstance(b, datetime):
        na, nb = a.timestamp(), b.timestamp()
    elif isinstance(a, str) and isinstance(b, str) and (
        _as_number(a) is None or _as_number(b) is None
    ):
        return _compare(op, a, b)
    else:
        na, nb = _as_number(a), _as_number(b)
        if na is None or nb is None:
            raise TypeMismatch(f"cannot order {a!r} and {b!r}")
    return _compare(op, na, nb)


def _compare(op: str, a, b) -> bool:
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    return a >= b


def _arith(op: str, a: Value, b: Value) -> Value:
    if isinstance(a, Undefined) or isinstance(b, Undefined):
        return UNDEFINED
    if op == "+" and (isinstance(a, str) or isinstance(b, str)):
        na, nb = _as_number(a), _as_number(b)
        if isinstance(a, str) and isinstance(b, str):
            return a + b
        if na is not None and nb is not None:
            result = na + nb
            return result
        return canonical_text(a) + canonical_text(b)
    na, nb = _as_number(a), _as_number(b)
    if na is None or nb is None:
        raise TypeMismatch(f"arithmetic needs numbers, got {a!r} and {b!r}")
    if op == "+":
        return na + nb
    if op == "-":
        return na - nb
    if op == "*":
        return na * nb
    if nb == 0:
        raise DivisionByZero(f"{na} / 0")
    result = na / nb
    if isinstance(na, int) and isinstance(nb, int) and na % nb == 0:
        return na // nb
    return result


def loose_equal(a: Value, b: Value) -> bool:
    """The == comparison, usable directly by engine-side checks."""
    return _loose_eq(a, b)


def strict_equal(a: Value, b: Value) -> bool:
    """The === comparison, usable directly by engine-side checks."""
    return _strict_eq(a, b)


def _is_undefined_literal(expr: ast.Expr) -> bool:
    return isinstance(expr, ast.Literal) and isinstance(expr.value, Undefined)


def eval_expr(expr: ast.Expr, ctx: EvalContext) -> Value:
    if isinstance(expr, ast.Literal):
        return expr.value
    if isinstance(expr, ast.Prop):
        if not ctx.current_individual:
            raise MissingValue("no current individual to resolve property path")
        return walk_path(
            ctx.graph, ctx.current_individual, expr.path, expr.strict, ctx.max_seq
        )
    if isinstance(expr, ast.ContextVar):
        return _context_var(expr.name, ctx)
    if isinstance(expr, ast.Unary):
        operand = eval_expr(expr.operand, ctx)
        if expr.op == "!":
            return not is_truthy(operand)
        if isinstance(operand, Undefined):
            return UNDEFINED
        n = _as_number(operand)
        if n is None:
            raise TypeMismatch(f"cannot negate {operand!r}")
        return -n
    if isinstance(expr, ast.Binary):
        return _binary(expr, ctx)
    if isinstance(expr, ast.Ternary):
        cond = eval_expr(expr.cond, ctx)
        branch = expr.then if is_truthy(cond) else expr.other
        return eval_expr(branch, ctx)
    if isinstance(expr, ast.Query):
        return run_query(expr, ctx)
    raise TypeError(f"not an expression node: {expr!r}")


def _context_var(name: str, ctx: EvalContext) -> Value:
    if name == "Value":
        if ctx.pending_value is None:
            raise MissingValue("$Value is only bound while checking a candidate value")
        return ctx.pending_value
    if name == "Parent":
        if not ctx.parent_event or not ctx.graph.has(ctx.parent_event):
            raise MissingValue("$Parent is unbound at the top level")
        return Ref(ctx.parent_event)
    if name == "CurrentActor":
        if not ctx.current_actor:
            raise MissingValue("$CurrentActor is unbound")
        return Ref(ctx.current_actor)
    if name == "CurrentIndividual":
        if not ctx.current_individual:
            raise MissingValue("$CurrentIndividual is unbound")
        return Ref(ctx.current_individual)
    raise EvalError(f"unknown context variable ${name}")


def _binary(expr: ast.Binary, ctx: EvalContext) -> Value:
    op = expr.op
    if op == "&&":
        left = eval_expr(expr.left, ctx)
        if not is_truthy(left):
            return left
        return eval_expr(expr.right, ctx)
    if op == "||":
        left = eval_expr(expr.left, ctx)
        if is_truthy(left):
            return left
        return eval_expr(expr.right, ctx)
    left = eval_expr(expr.left, ctx)
    right = eval_expr(expr.right, ctx)
    if op in ("==", "!=", "===", "!=="):
        if isinstance(left, Undefined) or isinstance(right, Undefined):
            # only a spelled-out undefined literal really tests absence
            if not (_is_undefined_literal(expr.left) or _is_undefined_literal(expr.right)):
                return UNDEFINED
        eq = _strict_eq(left, right) if op in ("===", "!==") else _loose_eq(left, right)
        return eq if op in ("==", "===") else not eq
    if op in ("<", ">", "<=", ">="):
        return _relational(op, left, right)
    return _arith(op, left, right)


def condition_satisfied(expr: ast.Expr, ctx: EvalContext) -> bool:
    """Truth of a Condition: eval errors and undefined mean not satisfied."""
    try:
        return is_truthy(eval_expr(expr, ctx))
    except EvalError:
        return False


# --- queries ---


def run_query(query: ast.Query, ctx: EvalContext) -> Value:
    if query.deref is not None:
        target = eval_expr(query.deref, ctx)
        if isinstance(target, list) and len(target) == 1:
            target = target[0]
        if not isinstance(target, Ref):
            raise NotAReference(f"deref query needs a reference, got {target!r}")
        if not query.path:
            return target
        return walk_path(ctx.graph, target.id, query.path, query.strict, ctx.max_seq)

    matches: list[Ref] = []
    for instance in ctx.graph.of_type("Instance"):
        if ctx.max_seq is not None and instance.seq > ctx.max_seq:
            continue
        if all(_satisfies(cond, instance.id, ctx) for cond in query.conditions):
            matches.append(Ref(instance.id))

    if query.path:
        mapped: list[Value] = []
        for ref in matches:
            mapped.append(
                walk_path(ctx.graph, ref.id, query.path, query.strict, ctx.max_seq)
            )
        result: list[Value] = mapped
    else:
        result = list(matches)

    if query.index is not None:
        idx = eval_expr(query.index, ctx)
        n = _as_number(idx)
        if n is None or int(n) != n:
            raise TypeMismatch(f"index must be an integer, got {idx!r}")
        i = int(n)
        if i < 0 or i >= len(result):
            raise IndexOutOfRange(f"index {i} outside 0..{len(result) - 1}")
        return result[i]
    return result


def _satisfies(cond: ast.QueryCond, instance_id: str, ctx: EvalContext) -> bool:
    if isinstance(cond, ast.QueryOr):
        return any(_satisfies(item, instance_id, ctx) for item in cond.items)
    actual = walk_path(ctx.graph, instance_id, (cond.prop,), False, ctx.max_seq)
    try:
        wanted = eval_expr(cond.expr, ctx)
        if cond.op == "EQ":
            return _loose_eq(actual, wanted)
        if cond.op == "NE":
            return not _loose_eq(actual, wanted)
        op = {"LT": "<", "GT": ">", "LE": "<=", "GE": ">="}[cond.op]
        outcome = _relational(op, actual, wanted)
        return outcome is True
    except EvalError:
        return False


# --- static dependency extraction ---


def dependencies(expr: ast.Expr) -> set[tuple[str, str]]:
    """Every (scope, property-path) this expression reads.

    Scope "individual" keys on the current individual's own properties;
    scope "global" keys on any instance's property (query scans).
    """
    deps: set[tuple[str, str]] = set()
    _collect(expr, deps)
    return deps


def _collect(expr: ast.Expr, deps: set[tuple[str, str]]) -> None:
    if isinstance(expr, ast.Prop):
        deps.add(("individual", ".".join(s.lower() for s in expr.path)))
    elif isinstance(expr, ast.Unary):
        _collect(expr.operand, deps)
    elif isinstance(expr, ast.Binary):
        _collect(expr.left, deps)
        _collect(expr.right, deps)
    elif isinstance(expr, ast.Ternary):
        _collect(expr.cond, deps)
        _collect(expr.then, deps)
        _collect(expr.other, deps)
    elif isinstance(expr, ast.Query):
        for cond in expr.conditions:
            _collect_cond(cond, deps)
        if expr.deref is not None:
            _collect(expr.deref, deps)
        for step in expr.path:
            deps.add(("global", step.lower()))
        if expr.index is not None:
            _collect(expr.index, deps)


def _collect_cond(cond: ast.QueryCond, deps: set[tuple[str, str]]) -> None:
    if isinstance(cond, ast.QueryOr):
        for item in cond.items:
            _collect_cond(item, deps)
    else:
        deps.add(("global", cond.prop.lower()))
        _collect(cond.expr, deps)
