"""Probe instrumentation: put a ``__probe(<id>)`` call in front of function calls.

Two scopes are supported. ``all-calls`` rewrites every call ``f(...)`` in the
program into ``(__probe(id_f), f(...))``. ``dispatch-entry-only`` leaves the
source alone and only produces the manifest; the dispatcher then records the
handler ID itself just before it handles a message.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .minic import Call, Comma, Expr, IntLit, Node, Program, TraverseTable, traverse, walk
from .minic.traverse import TransformError

PROBE = "__probe"


class InstrumentError(Exception):
    pass


class UnknownHandler(InstrumentError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"handler {name!r} is not defined in the program")


class AlreadyInstrumented(InstrumentError):
    pass


class Scope(enum.Enum):
    DISPATCH = "dispatch"
    ALL_CALLS = "all"

    @classmethod
    def parse(cls, text: str) -> "Scope":
        aliases = {"dispatch": cls.DISPATCH, "dispatch-entry-only": cls.DISPATCH,
                   "all": cls.ALL_CALLS, "all-calls": cls.ALL_CALLS}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown scope {text!r}") from None


@dataclass(frozen=True)
class Manifest:
    """Probe ID to function name table. IDs are ``0..n_funcs-1``."""

    names: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("manifest names must be unique")

    @property
    def n_funcs(self) -> int:
        return len(self.names)

    @property
    def entries(self) -> List[Tuple[int, str]]:
        return list(enumerate(self.names))

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def name_of(self, probe_id: int) -> str:
        return self.names[probe_id]

    def as_dict(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    def to_text(self) -> str:
        return "".join(f"{i}\t{name}\n" for i, name in enumerate(self.names))

    @classmethod
    def from_text(cls, text: str) -> "Manifest":
        names: List[str] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                id_text, name = line.split("\t")
                probe_id = int(id_text)
            except ValueError:
                raise ValueError(f"manifest line {lineno}: expected '<id>\\t<name>'") from None
            if probe_id != len(names):
                raise ValueError(f"manifest line {lineno}: id {probe_id} out of sequence")
            names.append(name)
        return cls(tuple(names))


def _calls_in_order(program: Program) -> Iterable[Call]:
    # pre-order walk == order in which callee names appear in the text
    for node in walk(program):
        if isinstance(node, Call):
            yield node


def is_instrumented(program: Program) -> bool:
    return any(c.callee == PROBE for c in _calls_in_order(program))


def assign_probe_ids(program: Program, scope: Scope,
                     handlers: Optional[Sequence[str]] = None) -> Manifest:
    if scope is Scope.DISPATCH:
        if handlers is None:
            raise ValueError("dispatch-entry-only scope needs the registered handler names")
        for name in handlers:
            if program.function(name) is None:
                raise UnknownHandler(name)
        return Manifest(tuple(handlers))
    names: Dict[str, None] = {}
    for call in _calls_in_order(program):
        if call.callee != PROBE:
            names.setdefault(call.callee)
    return Manifest(tuple(names))


def make_probe_call(probe_id: int) -> Call:
    if probe_id < 0:
        raise ValueError("probe id must be non-negative")
    return Call(PROBE, (IntLit(probe_id),))


def is_probe_call(e: Node) -> bool:
    return isinstance(e, Call) and e.callee == PROBE


def wrap_call(call: Expr, probe_id: int) -> Comma:
    """Return ``(__probe(probe_id), call)``; the probe runs strictly first."""
    if not isinstance(call, Call):
        raise InstrumentError(f"can only wrap a call expression, got {type(call).__name__}")
    if call.callee == PROBE:
        raise InstrumentError("refusing to probe a probe call")
    return Comma(make_probe_call(probe_id), call, call.pos)


def instrument(program: Program, scope: Scope,
               handlers: Optional[Sequence[str]] = None) -> Tuple[Program, Manifest]:
    if is_instrumented(program):
        raise AlreadyInstrumented("program already contains probe calls")
    manifest = assign_probe_ids(program, scope, handlers)
    if scope is Scope.DISPATCH:
        return program, manifest
    ids = manifest.as_dict()

    def add_probe(node: Node) -> Optional[Node]:
        if not isinstance(node, Call):
            raise TransformError(f"unexpected node {node!r}")
        return wrap_call(node, ids[node.callee])

    table = TraverseTable().on(Call, pre=add_probe)
    return traverse(program, table), manifest  # type: ignore[return-value]
