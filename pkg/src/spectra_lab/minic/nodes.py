"""Mini-C abstract syntax tree.

Nodes are frozen dataclasses. Source positions are carried on every node but
excluded from equality, so ``==`` is structural comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Tuple, Union


@dataclass(frozen=True)
class Pos:
    line: int = 0  # 1-based, 0 = synthesized
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos()

BINARY_OPS = ("+", "-", "*", "/", "<", "<=", "==", "!=", ">", ">=", "&&", "||")


class Node:
    """Base of all AST nodes."""

    __slots__ = ()


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class IntLit(Node):
    value: int
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Var(Node):
    name: str
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Call(Node):
    callee: str
    args: Tuple["Expr", ...] = ()
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Comma(Node):
    """``(first, second)``: evaluates ``first``, discards it, yields ``second``."""

    first: "Expr"
    second: "Expr"
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


Expr = Union[IntLit, Var, Binary, Call, Comma]


# -- statements --------------------------------------------------------------


@dataclass(frozen=True)
class ExprStmt(Node):
    expr: Expr
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Decl(Node):
    name: str
    init: Expr
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Assign(Node):
    name: str
    expr: Expr
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class If(Node):
    cond: Expr
    then: Tuple["Stmt", ...]
    orelse: Optional[Tuple["Stmt", ...]] = None
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class While(Node):
    cond: Expr
    body: Tuple["Stmt", ...]
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Return(Node):
    expr: Expr
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


Stmt = Union[ExprStmt, Decl, Assign, If, While, Return]


# -- top level ---------------------------------------------------------------


@dataclass(frozen=True)
class FunDef(Node):
    name: str
    params: Tuple[str, ...]
    body: Tuple[Stmt, ...]
    pos: Pos = field(default=NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Program(Node):
    functions: Tuple[FunDef, ...] = ()

    def function(self, name: str) -> Optional[FunDef]:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.functions)


def child_nodes(node: Node) -> Iterator[Node]:
    """Yield the direct children of ``node`` in source order."""
    for f in fields(node):  # type: ignore[arg-type]
        value = getattr(node, f.name)
        if isinstance(value, Node):
            yield value
        elif isinstance(value, tuple):
            for item in value:
                if isinstance(item, Node):
                    yield item


def walk(node: Node) -> Iterator[Node]:
    """Pre-order walk over ``node`` and all its descendants."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(list(child_nodes(n))))
