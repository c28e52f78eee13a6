"""Virtual-time interpreter for (instrumented) Mini-C.

Functions are compiled to a small stack bytecode. Executions keep an explicit
frame stack, so they can be suspended at any statement boundary and resumed
later; this is what the dispatch simulator uses to model preemption.

Every executed statement costs ``CostModel.cost_per_statement`` virtual
milliseconds. A ``while`` statement is charged once per evaluation of its
condition. Builtins cost ``builtin_costs[name]`` (default 0) and ``__probe`` is
always free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .minic import (
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
from .minic.nodes import NOPOS
from .minic.parser import INT64_MAX, INT64_MIN

PROBE = "__probe"
BUILTINS = (PROBE, "post_message", "print_int")
DEFAULT_MAX_DEPTH = 256

# opcodes
TICK, PUSH, LOAD, STORE, DECL, POP, BIN, CALL, JMP, JF, JT, RET = range(12)


class ExecutionError(RuntimeError):
    """A Mini-C runtime failure.

    ``kind`` is one of DivByZero, Overflow, UnknownFunction, UnknownVariable,
    ArityMismatch or StackDepthExceeded. ``consumed_time`` is the virtual time
    spent up to the fault.
    """

    def __init__(self, kind: str, message: str, pos: Pos = NOPOS, consumed_time: int = 0):
        self.kind = kind
        self.pos = pos
        self.consumed_time = consumed_time
        where = f" at {pos}" if pos.line else ""
        super().__init__(f"{kind}{where}: {message}")


@dataclass
class CostModel:
    cost_per_statement: int = 1
    builtin_costs: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.cost_per_statement < 0:
            raise ValueError("cost_per_statement must be >= 0")
        for name, c in self.builtin_costs.items():
            if c < 0:
                raise ValueError(f"negative cost for builtin {name!r}")
        if self.builtin_costs.get(PROBE, 0) != 0:
            raise ValueError("__probe must cost 0")

    def builtin_cost(self, name: str) -> int:
        return self.builtin_costs.get(name, 0)


class ProbeRecorder:
    """Probe sink that keeps every event in order."""

    def __init__(self):
        self.events: List[int] = []

    def __call__(self, probe_id: int) -> None:
        self.events.append(probe_id)

    def counts(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for e in self.events:
            out[e] = out.get(e, 0) + 1
        return out


@dataclass
class ExecResult:
    return_value: int
    consumed_time: int
    probe_events: Tuple[int, ...] = ()
    output: Tuple[int, ...] = ()


# -- compiler ----------------------------------------------------------------


@dataclass
class Code:
    name: str
    params: Tuple[str, ...]
    ops: List[int] = field(default_factory=list)
    args: List[object] = field(default_factory=list)
    pos: List[Pos] = field(default_factory=list)

    def emit(self, op: int, arg: object = None, pos: Pos = NOPOS) -> int:
        self.ops.append(op)
        self.args.append(arg)
        self.pos.append(pos)
        return len(self.ops) - 1

    def patch(self, at: int, target: int) -> None:
        self.args[at] = target


class _Compiler:
    def __init__(self, fn: FunDef):
        self.code = Code(fn.name, fn.params)
        self.block(fn.body)
        self.code.emit(PUSH, 0, fn.pos)
        self.code.emit(RET, None, fn.pos)

    def block(self, stmts: Sequence[Stmt]) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s: Stmt) -> None:
        c = self.code
        if isinstance(s, While):
            head = c.emit(TICK, None, s.pos)
            self.expr(s.cond)
            exit_jump = c.emit(JF, None, s.pos)
            self.block(s.body)
            c.emit(JMP, head, s.pos)
            c.patch(exit_jump, len(c.ops))
            return
        c.emit(TICK, None, s.pos)
        if isinstance(s, ExprStmt):
            self.expr(s.expr)
            c.emit(POP, None, s.pos)
        elif isinstance(s, Decl):
            self.expr(s.init)
            c.emit(DECL, s.name, s.pos)
        elif isinstance(s, Assign):
            self.expr(s.expr)
            c.emit(STORE, s.name, s.pos)
        elif isinstance(s, Return):
            self.expr(s.expr)
            c.emit(RET, None, s.pos)
        elif isinstance(s, If):
            self.expr(s.cond)
            else_jump = c.emit(JF, None, s.pos)
            self.block(s.then)
            if s.orelse is None:
                c.patch(else_jump, len(c.ops))
            else:
                end_jump = c.emit(JMP, None, s.pos)
                c.patch(else_jump, len(c.ops))
                self.block(s.orelse)
                c.patch(end_jump, len(c.ops))
        else:
            raise TypeError(f"not a statement: {s!r}")

    def expr(self, e: Expr) -> None:
        c = self.code
        if isinstance(e, IntLit):
            c.emit(PUSH, e.value, e.pos)
        elif isinstance(e, Var):
            c.emit(LOAD, e.name, e.pos)
        elif isinstance(e, Call):
            for a in e.args:
                self.expr(a)
            c.emit(CALL, (e.callee, len(e.args)), e.pos)
        elif isinstance(e, Comma):
            self.expr(e.first)
            c.emit(POP, None, e.pos)
            self.expr(e.second)
        elif isinstance(e, Binary) and e.op in ("&&", "||"):
            # && short-circuits on 0, || on non-zero; result is 0 or 1
            jump = JF if e.op == "&&" else JT
            self.expr(e.left)
            j1 = c.emit(jump, None, e.pos)
            self.expr(e.right)
            j2 = c.emit(jump, None, e.pos)
            c.emit(PUSH, 1 if e.op == "&&" else 0, e.pos)
            done = c.emit(JMP, None, e.pos)
            c.patch(j1, len(c.ops))
            c.patch(j2, len(c.ops))
            c.emit(PUSH, 0 if e.op == "&&" else 1, e.pos)
            c.patch(done, len(c.ops))
        elif isinstance(e, Binary):
            self.expr(e.left)
            self.expr(e.right)
            c.emit(BIN, e.op, e.pos)
        else:
            raise TypeError(f"not an expression: {e!r}")


@dataclass
class CompiledProgram:
    program: Program
    functions: Dict[str, Code]


def compile_program(program: Program) -> CompiledProgram:
    return CompiledProgram(program, {f.name: _Compiler(f).code for f in program.functions})


Runnable = Union[Program, CompiledProgram]


def _compiled(p: Runnable) -> CompiledProgram:
    return p if isinstance(p, CompiledProgram) else compile_program(p)


# -- interpreter -------------------------------------------------------------


def _div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
}


class _Frame:
    __slots__ = ("code", "pc", "env", "stack")

    def __init__(self, code: Code, env: Dict[str, int]):
        self.code = code
        self.pc = 0
        self.env = env
        self.stack: List[int] = []


class MessageHost:
    """Interface the dispatch simulator offers to running handlers."""

    def post_message(self, handler_id: int, delay_ms: int) -> None:  # pragma: no cover
        raise NotImplementedError


class Execution:
    """A resumable invocation of one Mini-C function.

    ``step(budget)`` runs whole statements until the next one would exceed the
    budget, the function returns, a runtime error occurs, or a yield was
    requested (see :meth:`request_yield`). Errors are stored on ``error``
    rather than raised.
    """

    def __init__(self, program: Runnable, name: str, args: Sequence[int] = (),
                 sink: Optional[Callable[[int], None]] = None,
                 cost: Optional[CostModel] = None,
                 host: Optional[MessageHost] = None,
                 max_depth: int = DEFAULT_MAX_DEPTH):
        self.compiled = _compiled(program)
        self.name = name
        self.sink = sink
        self.cost = cost or CostModel()
        self.host = host
        self.max_depth = max_depth
        self.consumed = 0
        self.slice_consumed = 0
        self.output: List[int] = []
        self.done = False
        self.return_value: Optional[int] = None
        self.error: Optional[ExecutionError] = None
        self.yielded = False
        self._yield_requested = False
        self.frames: List[_Frame] = []
        try:
            self._push_call(name, list(args), NOPOS)
        except ExecutionError as exc:
            self._fail(exc)

    def request_yield(self) -> None:
        """Ask the execution to suspend at its next statement boundary."""
        self._yield_requested = True

    @property
    def next_cost(self) -> int:
        """Cost of the next atomic unit (statement or costly builtin call)."""
        if self.done:
            return 0
        f = self.frames[-1]
        op = f.code.ops[f.pc]
        if op == CALL:
            return self.cost.builtin_cost(f.code.args[f.pc][0])
        return self.cost.cost_per_statement

    def _fail(self, exc: ExecutionError) -> None:
        exc.consumed_time = self.consumed
        self.error = exc
        self.done = True
        self.frames.clear()

    def _push_call(self, name: str, args: List[int], pos: Pos) -> None:
        code = self.compiled.functions.get(name)
        if code is None:
            raise ExecutionError("UnknownFunction", f"no function {name!r}", pos)
        if len(args) != len(code.params):
            raise ExecutionError(
                "ArityMismatch",
                f"{name} takes {len(code.params)} argument(s), got {len(args)}", pos)
        if len(self.frames) >= self.max_depth:
            raise ExecutionError("StackDepthExceeded", f"call depth exceeds {self.max_depth}", pos)
        self.frames.append(_Frame(code, dict(zip(code.params, args))))

    def _builtin(self, name: str, args: List[int], pos: Pos) -> int:
        if name == PROBE:
            if len(args) != 1:
                raise ExecutionError("ArityMismatch", "__probe takes 1 argument", pos)
            if self.sink is not None:
                self.sink(args[0])
            return 0
        if name == "print_int":
            if len(args) != 1:
                raise ExecutionError("ArityMismatch", "print_int takes 1 argument", pos)
            self.output.append(args[0])
            return 0
        if name == "post_message":
            if len(args) != 2:
                raise ExecutionError("ArityMismatch", "post_message takes 2 arguments", pos)
            if self.host is not None:
                self.host.post_message(args[0], args[1])
            return 0
        raise AssertionError(name)

    def step(self, budget: int) -> int:
        """Run for at most ``budget`` virtual ms; return the time consumed."""
        if budget < 0:
            raise ValueError("budget must be >= 0")
        self.slice_consumed = 0
        self.yielded = False
        if self.done:
            return 0
        try:
            self._run(budget)
        except ExecutionError as exc:
            self._fail(exc)
        return self.slice_consumed

    def _run(self, budget: int) -> None:
        stmt_cost = self.cost.cost_per_statement
        frames = self.frames
        f = frames[-1]
        ops, oargs, stack, env = f.code.ops, f.code.args, f.stack, f.env
        while True:
            op = ops[f.pc]
            if op == TICK:
                if self._yield_requested:
                    self._yield_requested = False
                    self.yielded = True
                    return
                if self.slice_consumed + stmt_cost > budget:
                    return
                self.slice_consumed += stmt_cost
                self.consumed += stmt_cost
                f.pc += 1
            elif op == PUSH:
                stack.append(oargs[f.pc])
                f.pc += 1
            elif op == LOAD:
                name = oargs[f.pc]
                try:
                    stack.append(env[name])
                except KeyError:
                    raise ExecutionError("UnknownVariable", f"{name!r} is not declared",
                                         f.code.pos[f.pc]) from None
                f.pc += 1
            elif op == DECL:
                env[oargs[f.pc]] = stack.pop()
                f.pc += 1
            elif op == STORE:
                name = oargs[f.pc]
                if name not in env:
                    raise ExecutionError("UnknownVariable", f"{name!r} is not declared",
                                         f.code.pos[f.pc])
                env[name] = stack.pop()
                f.pc += 1
            elif op == POP:
                stack.pop()
                f.pc += 1
            elif op == BIN:
                b = stack.pop()
                a = stack.pop()
                opname = oargs[f.pc]
                if opname == "/":
                    if b == 0:
                        raise ExecutionError("DivByZero", "division by zero", f.code.pos[f.pc])
                    v = _div(a, b)
                else:
                    v = _ARITH[opname](a, b)
                if not INT64_MIN <= v <= INT64_MAX:
                    raise ExecutionError("Overflow", f"{a} {opname} {b} overflows int64",
                                         f.code.pos[f.pc])
                stack.append(v)
                f.pc += 1
            elif op == JMP:
                f.pc = oargs[f.pc]
            elif op == JF:
                f.pc = oargs[f.pc] if stack.pop() == 0 else f.pc + 1
            elif op == JT:
                f.pc = oargs[f.pc] if stack.pop() != 0 else f.pc + 1
            elif op == CALL:
                callee, argc = oargs[f.pc]
                pos = f.code.pos[f.pc]
                args = stack[len(stack) - argc:] if argc else []
                if callee in BUILTINS:
                    c = self.cost.builtin_cost(callee)
                    if c:
                        if self.slice_consumed + c > budget:
                            return
                        self.slice_consumed += c
                        self.consumed += c
                    del stack[len(stack) - argc:]
                    stack.append(self._builtin(callee, args, pos))
                    f.pc += 1
                else:
                    del stack[len(stack) - argc:]
                    f.pc += 1
                    self._push_call(callee, args, pos)
                    f = frames[-1]
                    ops, oargs, stack, env = f.code.ops, f.code.args, f.stack, f.env
            elif op == RET:
                value = stack.pop()
                frames.pop()
                if not frames:
                    self.return_value = value
                    self.done = True
                    return
                f = frames[-1]
                ops, oargs, stack, env = f.code.ops, f.code.args, f.stack, f.env
                stack.append(value)
            else:  # pragma: no cover
                raise AssertionError(f"bad opcode {op}")


def step_budgeted(state: Execution, budget: int) -> Tuple[Execution, int]:
    """Advance ``state`` by at most ``budget`` ms; returns ``(state, consumed)``."""
    if budget <= 0:
        raise ValueError("budget must be > 0")
    consumed = state.step(budget)
    return state, consumed


def run_function(program: Runnable, name: str, args: Sequence[int] = (),
                 sink: Optional[Callable[[int], None]] = None,
                 cost: Optional[CostModel] = None,
                 host: Optional[MessageHost] = None,
                 max_depth: int = DEFAULT_MAX_DEPTH) -> ExecResult:
    """Run ``name(*args)`` to completion.

    Raises :class:`ExecutionError` on a runtime failure. When no sink is given a
    recorder is used and its events are returned in ``probe_events``.
    """
    recorder = None
    if sink is None:
        recorder = ProbeRecorder()
        sink = recorder
    ex = Execution(program, name, args, sink=sink, cost=cost, host=host, max_depth=max_depth)
    while not ex.done:
        ex.step(max(ex.next_cost, 1) * 1_000_000)
    if ex.error is not None:
        raise ex.error
    return ExecResult(
        return_value=ex.return_value,  # type: ignore[arg-type]
        consumed_time=ex.consumed,
        probe_events=tuple(recorder.events) if recorder else (),
        output=tuple(ex.output),
    )


def function_cost(program: Runnable, name: str, args: Sequence[int] = (),
                  cost: Optional[CostModel] = None) -> int:
    """Virtual time a standalone run of ``name`` takes."""
    return run_function(program, name, list(args), cost=cost).consumed_time
