"""Canonical text form for parsed BSL.

parse and print form a fixed point: printing a parsed document and parsing
the result yields an equal tree, and printing is idempotent on its own
output. Expressions are emitted with minimal parentheses.
"""

from __future__ import annotations

from . import ast
from .values import UNDEFINED, Undefined

_PREC = {
    "?:": 1,
    "||": 2,
    "&&": 3,
    "==": 4,
    "!=": 4,
    "===": 4,
    "!==": 4,
    "<": 5,
    ">": 5,
    "<=": 5,
    ">=": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
}

_UNARY_PREC = 8
_PRIMARY_PREC = 9


def _escape(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'


def _prec(expr: ast.Expr) -> int:
    if isinstance(expr, ast.Binary):
        return _PREC[expr.op]
    if isinstance(expr, ast.Ternary):
        return _PREC["?:"]
    if isinstance(expr, ast.Unary):
        return _UNARY_PREC
    return _PRIMARY_PREC


def _wrap(expr: ast.Expr, min_prec: int) -> str:
    text = print_expression(expr)
    if _prec(expr) < min_prec:
        return f"({text})"
    return text


def print_expression(expr: ast.Expr) -> str:
    if isinstance(expr, ast.Literal):
        v = expr.value
        if isinstance(v, Undefined):
            return "undefined"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return _escape(v)
        if isinstance(v, float):
            return repr(v)
        return str(v)
    if isinstance(expr, ast.Prop):
        dotted = ".".join(expr.path)
        return f"$.{dotted}" if expr.strict else f"$${dotted}"
    if isinstance(expr, ast.ContextVar):
        return f"${expr.name}"
    if isinstance(expr, ast.Unary):
        return expr.op + _wrap(expr.operand, _UNARY_PREC)
    if isinstance(expr, ast.Binary):
        prec = _PREC[expr.op]
        left = _wrap(expr.left, prec)
        right = _wrap(expr.right, prec + 1)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, ast.Ternary):
        cond = _wrap(expr.cond, _PREC["?:"] + 1)
        return f"{cond} ? {print_expression(expr.then)} : {print_expression(expr.other)}"
    if isinstance(expr, ast.Query):
        prefix = "$" if expr.strict else "$$"
        if expr.deref is not None:
            inner = print_expression(expr.deref)
        else:
            inner = ", ".join(_print_query_cond(c) for c in expr.conditions)
        out = f"{prefix}({inner})"
        if expr.path:
            out += "." + ".".join(expr.path)
        if expr.index is not None:
            out += f"[{print_expression(expr.index)}]"
        return out
    raise TypeError(f"not an expression node: {expr!r}")


def _print_query_cond(cond: ast.QueryCond) -> str:
    if isinstance(cond, ast.QueryCompare):
        return f"${cond.op}.{cond.prop}({print_expression(cond.expr)})"
    if isinstance(cond, ast.QueryOr):
        return "$OR(" + ", ".join(_print_query_cond(c) for c in cond.items) + ")"
    raise TypeError(f"not a query condition: {cond!r}")


def print_act(act: ast.Act) -> str:
    if isinstance(act, ast.CreateAct):
        parts = [act.concept, print_expression(act.name)]
        parts.extend(f"{prop} = {print_expression(expr)}" for prop, expr in act.sets)
        return f"CreateIndividual({', '.join(parts)})"
    if isinstance(act, ast.EditAct):
        return (
            f"EditIndividual({print_expression(act.target)}, {act.prop},"
            f" {print_expression(act.value)})"
        )
    raise TypeError(f"not an act node: {act!r}")


def _property_lines(prop: ast.PropertyDecl, out: list[str]) -> None:
    indent = ":" * prop.depth
    out.append(f"{indent} {prop.ptype}: {prop.name}")
    rindent = ":" * (prop.depth + 1)
    for r in prop.restrictions:
        out.append(f"{rindent} {r.rtype}: {r.value}")
    for child in prop.children:
        _property_lines(child, out)


def _assertion_lines(assertion: ast.Assertion, out: list[str]) -> None:
    indent = ":" * assertion.depth
    out.append(f"{indent} {assertion.name}: {assertion.value}")
    for child in assertion.children:
        _assertion_lines(child, out)


def print_item(item: ast.Item) -> str:
    out: list[str] = []
    if isinstance(item, ast.ModelDecl):
        out.append(f"{item.concept}: Model: {item.name}")
        for prop in item.properties:
            _property_lines(prop, out)
    elif isinstance(item, ast.IndividualDecl):
        out.append(f"{item.concept}: Individual: {item.name}")
        for assertion in item.assertions:
            _assertion_lines(assertion, out)
    elif isinstance(item, ast.VocabularyDecl):
        header = f"{item.name}: Vocabulary"
        if item.description:
            header += f": {item.description}"
        out.append(header)
        for entry in item.entries:
            out.append(f": {entry.ptype}: {entry.name}")
    else:
        raise TypeError(f"not a document item: {item!r}")
    return "\n".join(out)


def print_document(doc: ast.Document) -> str:
    return "\n\n".join(print_item(item) for item in doc.items) + "\n"


def print_bsl(node) -> str:
    """Print any parsed BSL node back to source text."""
    if isinstance(node, ast.Document):
        return print_document(node)
    if isinstance(node, (ast.ModelDecl, ast.IndividualDecl, ast.VocabularyDecl)):
        return print_item(node) + "\n"
    raise TypeError(f"not a printable node: {node!r}")
