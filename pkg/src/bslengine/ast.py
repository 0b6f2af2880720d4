"""Syntax trees for BSL documents and for the expression language.

Structure side: a document is a sequence of model definitions, individual
scripts and vocabulary declarations. Properties nest up to five levels
via ':' runs; each property carries restriction lines one level deeper.

Expression side: a closed operator set (ternary, || &&, equality,
relational, additive, multiplicative, unary) over literals, property
access, context variables and graph queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

PROPERTY_TYPES = ("Attribute", "Relation", "Role", "SetDo")

RESTRICTION_TYPES = (
    "Condition",
    "SetValue",
    "Permission",
    "Range",
    "Multiple",
    "Required",
    "ValueCondition",
    "SetRange",
    "Default",
    "Immutable",
    "UniqueIdentifier",
    "Unique",
    "DataType",
    "SetDo",
)

MAX_NESTING = 5

CONTEXT_VARS = ("Value", "Parent", "CurrentActor", "CurrentIndividual")

QUERY_OPS = ("EQ", "NE", "LT", "GT", "LE", "GE")


# --- expressions ---


@dataclass(frozen=True)
class Literal:
    value: object  # str | int | float | bool | Undefined


@dataclass(frozen=True)
class Prop:
    """Property path on the current individual. strict=True is the '$.' form
    that aborts on a broken path; the '$$' form yields undefined instead."""

    path: tuple[str, ...]
    strict: bool = True


@dataclass(frozen=True)
class ContextVar:
    name: str  # one of CONTEXT_VARS


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # "||" "&&" "==" "!=" "===" "!==" "<" ">" "<=" ">=" "+" "-" "*" "/"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class QueryCompare:
    op: str  # one of QUERY_OPS
    prop: str
    expr: "Expr"


@dataclass(frozen=True)
class QueryOr:
    items: tuple["QueryCond", ...]


QueryCond = Union[QueryCompare, QueryOr]


@dataclass(frozen=True)
class Query:
    """Graph query: either a condition scan over all instances, or a deref
    of an inner expression that must yield a reference. An optional property
    path and index apply to the results."""

    conditions: tuple[QueryCond, ...] = ()
    deref: Optional["Expr"] = None
    path: tuple[str, ...] = ()
    index: Optional["Expr"] = None
    strict: bool = True


Expr = Union[Literal, Prop, ContextVar, Unary, Binary, Ternary, Query]


# --- system acts (SetDo restriction payloads) ---


@dataclass(frozen=True)
class CreateAct:
    concept: str
    name: Expr
    sets: tuple[tuple[str, Expr], ...] = ()


@dataclass(frozen=True)
class EditAct:
    target: Expr
    prop: str
    value: Expr


Act = Union[CreateAct, EditAct]


# --- document structure ---


@dataclass(frozen=True)
class Restriction:
    rtype: str
    value: str  # normalized text form
    expr: Optional[Expr] = None  # parsed form when the restriction carries one
    act: Optional[Act] = None  # parsed form for SetDo restrictions


@dataclass(frozen=True)
class PropertyDecl:
    ptype: str
    name: str
    depth: int  # 1..MAX_NESTING
    restrictions: tuple[Restriction, ...] = ()
    children: tuple["PropertyDecl", ...] = ()

    def restriction(self, rtype: str) -> Optional[Restriction]:
        for r in self.restrictions:
            if r.rtype == rtype:
                return r
        return None

    def restriction_values(self, rtype: str) -> list[Restriction]:
        return [r for r in self.restrictions if r.rtype == rtype]


@dataclass(frozen=True)
class ModelDecl:
    concept: str
    name: str
    properties: tuple[PropertyDecl, ...] = ()

    def walk(self):
        """All properties, declaration order, parents before children."""

        def rec(props):
            for p in props:
                yield p
                yield from rec(p.children)

        yield from rec(self.properties)

    def find(self, name: str) -> Optional[PropertyDecl]:
        wanted = name.lower()
        for p in self.walk():
            if p.name.lower() == wanted:
                return p
        return None


@dataclass(frozen=True)
class Assertion:
    name: str
    value: str
    depth: int
    children: tuple["Assertion", ...] = ()


@dataclass(frozen=True)
class IndividualDecl:
    concept: str
    name: str
    assertions: tuple[Assertion, ...] = ()


@dataclass(frozen=True)
class VocabularyEntry:
    ptype: str
    name: str


@dataclass(frozen=True)
class VocabularyDecl:
    name: str
    description: str = ""
    entries: tuple[VocabularyEntry, ...] = ()


Item = Union[ModelDecl, IndividualDecl, VocabularyDecl]


@dataclass(frozen=True)
class Document:
    items: tuple[Item, ...] = ()

    @property
    def models(self) -> list[ModelDecl]:
        return [i for i in self.items if isinstance(i, ModelDecl)]

    @property
    def individuals(self) -> list[IndividualDecl]:
        return [i for i in self.items if isinstance(i, IndividualDecl)]

    @property
    def vocabularies(self) -> list[VocabularyDecl]:
        return [i for i in self.items if isinstance(i, VocabularyDecl)]
