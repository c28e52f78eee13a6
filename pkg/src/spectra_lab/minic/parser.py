"""Recursive-descent parser for Mini-C.

Grammar::

    program := fundef*
    fundef  := "int" IDENT "(" [params] ")" block
    params  := "int" IDENT ("," "int" IDENT)*
    block   := "{" stmt* "}"
    stmt    := "int" IDENT "=" expr ";" | IDENT "=" expr ";" | expr ";"
             | "if" "(" expr ")" block ["else" block]
             | "while" "(" expr ")" block
             | "return" expr ";"

Expressions use C precedence for the binary operators; a comma expression is
only accepted inside parentheses. A ``-`` directly in front of an integer
literal in operand position is folded into the literal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

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
    Pos,
    Program,
    Return,
    Stmt,
    Var,
    While,
)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

KEYWORDS = {"int", "if", "else", "while", "return"}

# Binding power per operator; all are left-associative.
PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/<>=(){},;])
    """,
    re.VERBOSE,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: str = ""):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        text = f"{line}:{col}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    col: int

    @property
    def pos(self) -> Pos:
        return Pos(self.line, self.col)

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    i, line, line_start = 0, 1, 0
    n = len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        col = i - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "ident" and lexeme in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = i + lexeme.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, expected: str) -> ParseError:
        t = self.tok
        return ParseError(f"unexpected {t.describe()}", t.line, t.col, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(repr(text))
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("identifier")
        return self.advance()

    # -- grammar -------------------------------------------------------------

    def program(self) -> Program:
        functions: List[FunDef] = []
        seen = set()
        while self.tok.kind != "eof":
            start = self.tok
            f = self.fundef()
            if f.name in seen:
                raise ParseError(f"duplicate function {f.name!r}", start.line, start.col)
            seen.add(f.name)
            functions.append(f)
        return Program(tuple(functions))

    def fundef(self) -> FunDef:
        start = self.expect("int")
        name = self.expect_ident()
        self.expect("(")
        params: List[str] = []
        if not self.at(")"):
            while True:
                self.expect("int")
                p = self.expect_ident()
                if p.text in params:
                    raise ParseError(f"duplicate parameter {p.text!r}", p.line, p.col)
                params.append(p.text)
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        body = self.block()
        return FunDef(name.text, tuple(params), body, start.pos)

    def block(self) -> Tuple[Stmt, ...]:
        self.expect("{")
        stmts: List[Stmt] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("'}'")
            stmts.append(self.stmt())
        self.advance()
        return tuple(stmts)

    def stmt(self) -> Stmt:
        t = self.tok
        if self.at("int"):
            self.advance()
            name = self.expect_ident()
            self.expect("=")
            init = self.expr()
            self.expect(";")
            return Decl(name.text, init, t.pos)
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse: Optional[Tuple[Stmt, ...]] = None
            if self.at("else"):
                self.advance()
                orelse = self.block()
            return If(cond, then, orelse, t.pos)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return While(cond, self.block(), t.pos)
        if self.at("return"):
            self.advance()
            value = self.expr()
            self.expect(";")
            return Return(value, t.pos)
        if t.kind == "ident" and self.peek().kind == "op" and self.peek().text == "=":
            self.advance()
            self.advance()
            value = self.expr()
            self.expect(";")
            return Assign(t.text, value, t.pos)
        if t.kind == "kw":
            raise self.error("statement")
        value = self.expr()
        self.expect(";")
        return ExprStmt(value, t.pos)

    def expr(self, min_prec: int = 1) -> Expr:
        left = self.operand()
        while True:
            t = self.tok
            prec = PRECEDENCE.get(t.text) if t.kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.expr(prec + 1)
            left = Binary(t.text, left, right, t.pos)

    def operand(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return self.int_lit(int(t.text), t)
        if self.at("-") and self.peek().kind == "int":
            self.advance()
            digits = self.advance()
            return self.int_lit(-int(digits.text), t)
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args: List[Expr] = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args), t.pos)
            return Var(t.text, t.pos)
        if self.at("("):
            self.advance()
            inner = self.expr()
            while self.at(","):
                self.advance()
                inner = Comma(inner, self.expr(), t.pos)
            self.expect(")")
            return inner
        raise self.error("expression")

    @staticmethod
    def int_lit(value: int, t: Token) -> IntLit:
        if not INT64_MIN <= value <= INT64_MAX:
            raise ParseError("integer literal out of 64-bit range", t.line, t.col)
        return IntLit(value, t.pos)


def parse(text: str) -> Program:
    """Parse Mini-C source text into a :class:`Program`.

    Raises :class:`ParseError` with the line/column of the offending token.
    """
    return Parser(text).program()


def parse_expr(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error("end of input")
    return e
