"""BSL parsing: model definitions, individual scripts, vocabularies, expressions.

Line shape: a run of ':' sets the nesting depth (1..5), then `Head: Tail`.
Depth-0 lines are headers (`Concept: Model: Name`, `Concept: Individual:
Name`, `Name: Vocabulary: ...`). Lines whose first non-blank character is
'#' are comments. A line that starts with whitespace and not with ':' or
'#' continues the previous line's tail, so long expressions can wrap.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import ast
from .errors import NestingError, ParseError
from .values import UNDEFINED

_ACT_RE = re.compile(r"^(CreateIndividual|EditIndividual)\s*\(")
_ROLE_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")

# --- expression tokenizer ---

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<string>"(?:\\.|[^"\\])*"|'(?:\\.|[^'\\])*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sigil>\$\$|\$)
  | (?P<op>===|!==|==|!=|<=|>=|&&|\|\||[()\[\].,?:!<>+\-*/=])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "'": "'", "\\": "\\"}


@dataclass
class Token:
    kind: str  # number | string | ident | sigil | op | end
    text: str
    pos: int


def _unquote(text: str) -> str:
    out = []
    i = 1
    while i < len(text) - 1:
        ch = text[i]
        if ch == "\\" and i + 1 < len(text) - 1:
            out.append(_ESCAPES.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _tokenize_expr(text: str, line: int = 0) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r} in expression", line, pos + 1)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append(Token(kind=kind, text=m.group(), pos=m.start()))
    tokens.append(Token(kind="end", text="", pos=len(text)))
    return tokens


class _ExprParser:
    """Precedence-climbing parser over the token list."""

    def __init__(self, tokens: list[Token], line: int = 0) -> None:
        self.tokens = tokens
        self.i = 0
        self.line = line

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def fail(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.cur.pos + 1)

    def expect(self, text: str) -> Token:
        if self.cur.text != text or self.cur.kind == "end":
            raise self.fail(f"expected {text!r}, found {self.cur.text!r}")
        return self.advance()

    def at(self, text: str) -> bool:
        return self.cur.kind != "end" and self.cur.text == text

    # grammar, loosest first

    def ternary(self) -> ast.Expr:
        cond = self.logical_or()
        if self.at("?"):
            self.advance()
            then = self.ternary()
            self.expect(":")
            other = self.ternary()
            return ast.Ternary(cond=cond, then=then, other=other)
        return cond

    def logical_or(self) -> ast.Expr:
        left = self.logical_and()
        while self.at("||"):
            self.advance()
            left = ast.Binary(op="||", left=left, right=self.logical_and())
        return left

    def logical_and(self) -> ast.Expr:
        left = self.equality()
        while self.at("&&"):
            self.advance()
            left = ast.Binary(op="&&", left=left, right=self.equality())
        return left

    def equality(self) -> ast.Expr:
        left = self.relational()
        while self.cur.text in ("===", "!==", "==", "!=") and self.cur.kind == "op":
            op = self.advance().text
            left = ast.Binary(op=op, left=left, right=self.relational())
        return left

    def relational(self) -> ast.Expr:
        left = self.additive()
        while self.cur.text in ("<=", ">=", "<", ">") and self.cur.kind == "op":
            op = self.advance().text
            left = ast.Binary(op=op, left=left, right=self.additive())
        return left

    def additive(self) -> ast.Expr:
        left = self.multiplicative()
        while self.cur.text in ("+", "-") and self.cur.kind == "op":
            op = self.advance().text
            left = ast.Binary(op=op, left=left, right=self.multiplicative())
        return left

    def multiplicative(self) -> ast.Expr:
        left = self.unary()
        while self.cur.text in ("*", "/") and self.cur.kind == "op":
            op = self.advance().text
            left = ast.Binary(op=op, left=left, right=self.multiplicative())
        return left

    def unary(self) -> ast.Expr:
        if self.cur.text in ("!", "-") and self.cur.kind == "op":
            op = self.advance().text
            return ast.Unary(op=op, operand=self.unary())
        return self.primary()

    def primary(self) -> ast.Expr:
        tok = self.cur
        if tok.kind == "number":
            self.advance()
            if "." in tok.text:
                return ast.Literal(float(tok.text))
            return ast.Literal(int(tok.text))
        if tok.kind == "string":
            self.advance()
            return ast.Literal(_unquote(tok.text))
        if tok.kind == "ident":
            if tok.text == "true":
                self.advance()
                return ast.Literal(True)
            if tok.text == "false":
                self.advance()
                return ast.Literal(False)
            if tok.text == "undefined":
                self.advance()
                return ast.Literal(UNDEFINED)
            raise self.fail(f"unknown name {tok.text!r} (expressions have no free variables)")
        if tok.kind == "sigil":
            return self.dollar(tok.text)
        if tok.text == "(":
            self.advance()
            inner = self.ternary()
            self.expect(")")
            return inner
        raise self.fail(f"expected a value, found {tok.text!r}")

    def dollar(self, sigil: str) -> ast.Expr:
        strict = sigil == "$"
        self.advance()
        if self.at("("):
            return self.query(strict)
        if self.at("."):
            self.advance()
            return ast.Prop(path=self.path_from_ident(), strict=strict)
        if self.cur.kind == "ident":
            name = self.cur.text
            if strict and name in ast.CONTEXT_VARS:
                self.advance()
                return ast.ContextVar(name=name)
            return ast.Prop(path=self.path_from_ident(), strict=strict)
        raise self.fail(f"expected property path or query after {sigil!r}")

    def path_from_ident(self) -> tuple[str, ...]:
        if self.cur.kind != "ident":
            raise self.fail(f"expected property name, found {self.cur.text!r}")
        parts = [self.advance().text]
        while self.at("."):
            self.advance()
            if self.cur.kind != "ident":
                raise self.fail(f"expected property name after '.', found {self.cur.text!r}")
            parts.append(self.advance().text)
        return tuple(parts)

    def query(self, strict: bool) -> ast.Expr:
        self.expect("(")
        conditions: list[ast.QueryCond] = []
        deref = None
        if self.cur.kind == "sigil" and self._peek_query_op() is not None:
            conditions.append(self.query_condition())
            while self.at(","):
                self.advance()
                conditions.append(self.query_condition())
        else:
            deref = self.ternary()
        self.expect(")")
        path: tuple[str, ...] = ()
        if self.at("."):
            self.advance()
            path = self.path_from_ident()
        index = None
        if self.at("["):
            self.advance()
            index = self.ternary()
            self.expect("]")
        return ast.Query(
            conditions=tuple(conditions), deref=deref, path=path, index=index, strict=strict
        )

    def _peek_query_op(self) -> str | None:
        nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
        if nxt is not None and nxt.kind == "ident" and nxt.text in ast.QUERY_OPS + ("OR",):
            return nxt.text
        return None

    def query_condition(self) -> ast.QueryCond:
        if self.cur.kind != "sigil":
            raise self.fail(f"expected query operator, found {self.cur.text!r}")
        op = self._peek_query_op()
        if op is None:
            raise self.fail("expected $EQ/$NE/$LT/$GT/$LE/$GE/$OR")
        self.advance()  # sigil
        self.advance()  # op name
        if op == "OR":
            self.expect("(")
            items = [self.query_condition()]
            while self.at(","):
                self.advance()
                items.append(self.query_condition())
            self.expect(")")
            return ast.QueryOr(items=tuple(items))
        self.expect(".")
        if self.cur.kind != "ident":
            raise self.fail(f"expected property name after ${op}.")
        prop = self.advance().text
        self.expect("(")
        expr = self.ternary()
        self.expect(")")
        return ast.QueryCompare(op=op, prop=prop, expr=expr)


def parse_expression(text: str, line: int = 0) -> ast.Expr:
    parser = _ExprParser(_tokenize_expr(text, line), line)
    expr = parser.ternary()
    if parser.cur.kind != "end":
        raise parser.fail(f"unexpected {parser.cur.text!r} after expression")
    return expr


def parse_act(text: str, line: int = 0) -> ast.Act:
    """Parse a SetDo payload: CreateIndividual(...) or EditIndividual(...)."""
    parser = _ExprParser(_tokenize_expr(text, line), line)
    if parser.cur.kind != "ident" or parser.cur.text not in (
        "CreateIndividual",
        "EditIndividual",
    ):
        raise parser.fail("expected CreateIndividual or EditIndividual")
    kind = parser.advance().text
    parser.expect("(")
    if kind == "CreateIndividual":
        if parser.cur.kind != "ident":
            raise parser.fail("expected concept name")
        concept = parser.advance().text
        parser.expect(",")
        name = parser.ternary()
        sets: list[tuple[str, ast.Expr]] = []
        while parser.at(","):
            parser.advance()
            if parser.cur.kind != "ident":
                raise parser.fail("expected property name")
            prop = parser.advance().text
            parser.expect("=")
            sets.append((prop, parser.ternary()))
        parser.expect(")")
        act: ast.Act = ast.CreateAct(concept=concept, name=name, sets=tuple(sets))
    else:
        target = parser.ternary()
        parser.expect(",")
        if parser.cur.kind != "ident":
            raise parser.fail("expected property name")
        prop = parser.advance().text
        parser.expect(",")
        value = parser.ternary()
        parser.expect(")")
        act = ast.EditAct(target=target, prop=prop, value=value)
    if parser.cur.kind != "end":
        raise parser.fail(f"unexpected {parser.cur.text!r} after act")
    return act


# --- line reader ---


@dataclass
class _Line:
    number: int
    depth: int
    head: str
    tail: str


def _read_lines(source: str) -> list[_Line]:
    lines: list[_Line] = []
    can_continue = False
    for number, raw in enumerate(source.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            can_continue = False
            continue
        if stripped.startswith("#"):
            can_continue = False
            continue
        if raw[0] in " \t" and not stripped.startswith(":"):
            if not can_continue or not lines:
                raise ParseError("continuation line with nothing to continue", number)
            lines[-1].tail = lines[-1].tail + " " + stripped
            continue
        depth = 0
        while depth < len(stripped) and stripped[depth] == ":":
            depth += 1
        if depth > ast.MAX_NESTING:
            raise NestingError(
                f"nesting deeper than {ast.MAX_NESTING} levels", number, depth
            )
        rest = stripped[depth:].strip()
        colon = rest.find(":")
        if colon < 0:
            raise ParseError(f"expected ':' after {rest!r}", number)
        head = rest[:colon].strip()
        tail = rest[colon + 1 :].strip()
        if not head:
            raise ParseError("empty name before ':'", number)
        lines.append(_Line(number=number, depth=depth, head=head, tail=tail))
        can_continue = True
    return lines


# --- document parser ---


@dataclass
class _PropScaffold:
    ptype: str
    name: str
    depth: int
    line: int
    restrictions: list[ast.Restriction] = field(default_factory=list)
    children: list["_PropScaffold"] = field(default_factory=list)

    def freeze(self) -> ast.PropertyDecl:
        return ast.PropertyDecl(
            ptype=self.ptype,
            name=self.name,
            depth=self.depth,
            restrictions=tuple(self.restrictions),
            children=tuple(c.freeze() for c in self.children),
        )


@dataclass
class _AssertScaffold:
    name: str
    value: str
    depth: int
    line: int
    children: list["_AssertScaffold"] = field(default_factory=list)

    def freeze(self) -> ast.Assertion:
        return ast.Assertion(
            name=self.name,
            value=self.value,
            depth=self.depth,
            children=tuple(c.freeze() for c in self.children),
        )


_EXPR_RESTRICTIONS = ("Condition", "SetValue", "ValueCondition")


def _build_restriction(rtype: str, raw: str, line: int) -> ast.Restriction:
    from .printer import print_expression

    raw = raw.strip()
    if rtype in _EXPR_RESTRICTIONS:
        expr = parse_expression(raw, line)
        return ast.Restriction(rtype=rtype, value=print_expression(expr), expr=expr)
    if rtype == "SetDo":
        act = parse_act(raw, line)
        from .printer import print_act

        return ast.Restriction(rtype=rtype, value=print_act(act), act=act)
    if rtype == "Permission":
        if _ROLE_RE.match(raw):
            return ast.Restriction(rtype=rtype, value=raw)
        expr = parse_expression(raw, line)
        return ast.Restriction(rtype=rtype, value=print_expression(expr), expr=expr)
    if rtype == "Default":
        try:
            expr = parse_expression(raw, line)
        except ParseError:
            return ast.Restriction(rtype=rtype, value=raw)
        return ast.Restriction(rtype=rtype, value=print_expression(expr), expr=expr)
    return ast.Restriction(rtype=rtype, value=raw)


def _parse_model_body(header: _Line, body: list[_Line]) -> ast.ModelDecl:
    top: list[_PropScaffold] = []
    stack: list[_PropScaffold] = []
    for line in body:
        is_property = line.head in ast.PROPERTY_TYPES
        is_restriction = line.head in ast.RESTRICTION_TYPES
        if line.head == "SetDo":
            # An act payload makes it a restriction on the enclosing
            # property; a bare name declares a system-act node.
            is_restriction = bool(_ACT_RE.match(line.tail))
            is_property = not is_restriction
        if is_property and not is_restriction:
            while stack and stack[-1].depth >= line.depth:
                stack.pop()
            if line.depth != (stack[-1].depth + 1 if stack else 1):
                raise ParseError(
                    f"property at depth {line.depth} has no parent at depth {line.depth - 1}",
                    line.number,
                )
            node = _PropScaffold(
                ptype=line.head, name=line.tail, depth=line.depth, line=line.number
            )
            if stack:
                stack[-1].children.append(node)
            else:
                top.append(node)
            stack.append(node)
        elif is_restriction:
            if not stack or stack[-1].depth != line.depth - 1:
                raise ParseError(
                    f"restriction {line.head!r} at depth {line.depth} has no property"
                    f" at depth {line.depth - 1}",
                    line.number,
                )
            stack[-1].restrictions.append(
                _build_restriction(line.head, line.tail, line.number)
            )
        else:
            raise ParseError(f"unknown keyword {line.head!r} in model body", line.number)
    return ast.ModelDecl(
        concept=header.head,
        name=_after_kind(header),
        properties=tuple(p.freeze() for p in top),
    )


def _parse_individual_body(header: _Line, body: list[_Line]) -> ast.IndividualDecl:
    top: list[_AssertScaffold] = []
    stack: list[_AssertScaffold] = []
    for line in body:
        while stack and stack[-1].depth >= line.depth:
            stack.pop()
        if line.depth != (stack[-1].depth + 1 if stack else 1):
            raise ParseError(
                f"assertion at depth {line.depth} has no parent at depth {line.depth - 1}",
                line.number,
            )
        node = _AssertScaffold(
            name=line.head, value=line.tail, depth=line.depth, line=line.number
        )
        if stack:
            stack[-1].children.append(node)
        else:
            top.append(node)
        stack.append(node)
    return ast.IndividualDecl(
        concept=header.head,
        name=_after_kind(header),
        assertions=tuple(a.freeze() for a in top),
    )


def _parse_vocabulary_body(header: _Line, body: list[_Line]) -> ast.VocabularyDecl:
    entries: list[ast.VocabularyEntry] = []
    for line in body:
        if line.depth != 1:
            raise ParseError("vocabulary entries sit at depth 1", line.number)
        if line.head not in ast.PROPERTY_TYPES:
            raise ParseError(
                f"vocabulary entry must declare one of {', '.join(ast.PROPERTY_TYPES)}",
                line.number,
            )
        entries.append(ast.VocabularyEntry(ptype=line.head, name=line.tail))
    return ast.VocabularyDecl(
        name=header.head, description=_after_kind(header), entries=tuple(entries)
    )


def _after_kind(header: _Line) -> str:
    colon = header.tail.find(":")
    return header.tail[colon + 1 :].strip() if colon >= 0 else ""


def _header_kind(header: _Line) -> str:
    colon = header.tail.find(":")
    kind = header.tail[:colon].strip() if colon >= 0 else header.tail.strip()
    return kind


def parse_source(source: str) -> ast.Document:
    """Parse a document that may mix models, individuals and vocabularies."""
    lines = _read_lines(source)
    items: list[ast.Item] = []
    i = 0
    while i < len(lines):
        header = lines[i]
        if header.depth != 0:
            raise ParseError(
                f"expected a header line, found depth-{header.depth} line", header.number
            )
        kind = _header_kind(header)
        body: list[_Line] = []
        i += 1
        while i < len(lines) and lines[i].depth > 0:
            body.append(lines[i])
            i += 1
        if kind == "Model":
            items.append(_parse_model_body(header, body))
        elif kind == "Individual":
            items.append(_parse_individual_body(header, body))
        elif kind == "Vocabulary":
            items.append(_parse_vocabulary_body(header, body))
        else:
            raise ParseError(
                f"expected Model, Individual or Vocabulary after {header.head!r}:,"
                f" found {kind!r}",
                header.number,
            )
    return ast.Document(items=tuple(items))


def parse_model(source: str) -> ast.ModelDecl:
    """Parse a source expected to contain exactly one model definition."""
    doc = parse_source(source)
    models = doc.models
    if len(models) != 1:
        raise ParseError(f"expected exactly one model, found {len(models)}")
    return models[0]
