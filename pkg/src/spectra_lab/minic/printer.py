"""Pretty-printer producing Mini-C source that reparses to an equal tree."""

from __future__ import annotations

from typing import List, Sequence

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
    Program,
    Return,
    Stmt,
    Var,
    While,
)
from .parser import PRECEDENCE

INDENT = "    "


def print_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.callee}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, Comma):
        return f"({print_expr(e.first)}, {print_expr(e.second)})"
    if isinstance(e, Binary):
        prec = PRECEDENCE[e.op]
        left = print_expr(e.left)
        right = print_expr(e.right)
        if isinstance(e.left, Binary) and PRECEDENCE[e.left.op] < prec:
            left = f"({left})"
        # left-associative: an equal-precedence right operand needs parens
        if isinstance(e.right, Binary) and PRECEDENCE[e.right.op] <= prec:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def _block(stmts: Sequence[Stmt], depth: int, out: List[str]) -> None:
    for s in stmts:
        _stmt(s, depth, out)


def _stmt(s: Stmt, depth: int, out: List[str]) -> None:
    pad = INDENT * depth
    if isinstance(s, ExprStmt):
        out.append(f"{pad}{print_expr(s.expr)};")
    elif isinstance(s, Decl):
        out.append(f"{pad}int {s.name} = {print_expr(s.init)};")
    elif isinstance(s, Assign):
        out.append(f"{pad}{s.name} = {print_expr(s.expr)};")
    elif isinstance(s, Return):
        out.append(f"{pad}return {print_expr(s.expr)};")
    elif isinstance(s, If):
        out.append(f"{pad}if ({print_expr(s.cond)}) {{")
        _block(s.then, depth + 1, out)
        if s.orelse is not None:
            out.append(f"{pad}}} else {{")
            _block(s.orelse, depth + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, While):
        out.append(f"{pad}while ({print_expr(s.cond)}) {{")
        _block(s.body, depth + 1, out)
        out.append(f"{pad}}}")
    else:
        raise TypeError(f"not a statement: {s!r}")


def print_fundef(f: FunDef) -> str:
    params = ", ".join(f"int {p}" for p in f.params)
    out = [f"int {f.name}({params}) {{"]
    _block(f.body, 1, out)
    out.append("}")
    return "\n".join(out) + "\n"


def print_program(program: Program) -> str:
    return "\n".join(print_fundef(f) for f in program.functions)


def to_source(node: Node) -> str:
    """Render any node (program, function, statement or expression)."""
    if isinstance(node, Program):
        return print_program(node)
    if isinstance(node, FunDef):
        return print_fundef(node)
    if isinstance(node, (ExprStmt, Decl, Assign, If, While, Return)):
        out: List[str] = []
        _stmt(node, 0, out)
        return "\n".join(out)
    return print_expr(node)  # type: ignore[arg-type]
