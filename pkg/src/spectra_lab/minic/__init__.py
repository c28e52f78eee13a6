"""Mini-C: a small int-only C subset used as the instrumentation target."""

from .nodes import (
    Assign,
    Binary,
    Call,
    Comma,
    Decl,
    Expr,
    ExprStmt,
    FunDef,
    If,
    IntLit,
    Node,
    Pos,
    Program,
    Return,
    Stmt,
    Var,
    While,
    child_nodes,
    walk,
)
from .parser import ParseError, parse, parse_expr
from .printer import print_program, to_source
from .traverse import POST_ACTION, PRE_ACTION, TransformError, TraverseTable, traverse

__all__ = [
    "Assign", "Binary", "Call", "Comma", "Decl", "Expr", "ExprStmt", "FunDef",
    "If", "IntLit", "Node", "Pos", "Program", "Return", "Stmt", "Var", "While",
    "child_nodes", "walk", "ParseError", "parse", "parse_expr", "print_program",
    "to_source", "PRE_ACTION", "POST_ACTION", "TransformError", "TraverseTable",
    "traverse",
]
