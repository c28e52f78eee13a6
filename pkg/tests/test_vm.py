from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from spectra_lab.instrument import Scope, instrument
from spectra_lab.minic import parse
from spectra_lab.vm import (
    CostModel, Execution, ExecutionError, ProbeRecorder, function_cost, run_function,
    step_budgeted,
)

LOOP = """
int work(int n) {
    int i = 0;
    while (i < n) {
        i = i + 1;
    }
    return i;
}
"""

CORPUS = Path(__file__).parent / "corpus"


@pytest.mark.parametrize("n", [0, 1, 5, 40])
def test_statement_cost_model(n):
    # decl + (n+1) condition checks + n assignments + return
    assert function_cost(parse(LOOP), "work", [n]) == 2 * n + 3


def test_custom_statement_cost():
    assert function_cost(parse(LOOP), "work", [4], CostModel(cost_per_statement=3)) == 3 * 11


def test_probe_cost_must_be_zero():
    with pytest.raises(ValueError):
        CostModel(builtin_costs={"__probe": 1})
    with pytest.raises(ValueError):
        CostModel(cost_per_statement=-1)


@pytest.mark.parametrize("src, kind", [
    ("int main() { return 1 / 0; }", "DivByZero"),
    ("int main() { return 9223372036854775807 + 1; }", "Overflow"),
    ("int main() { return x; }", "UnknownVariable"),
    ("int main() { return nope(); }", "UnknownFunction"),
    ("int f(int a) { return a; } int main() { return f(); }", "ArityMismatch"),
    ("int f(int a) { return f(a); } int main() { return f(1); }", "StackDepthExceeded"),
])
def test_runtime_errors(src, kind):
    with pytest.raises(ExecutionError) as info:
        run_function(parse(src), "main")
    assert info.value.kind == kind


def test_error_records_consumed_time_and_position():
    prog = parse("int main() {\n    int a = 1;\n    return a / 0;\n}\n")
    ex = Execution(prog, "main")
    ex.step(100)
    assert ex.done and ex.error.kind == "DivByZero"
    assert ex.error.consumed_time == 2
    assert ex.error.pos.line == 3


def test_step_stops_at_statement_boundary():
    ex = Execution(parse(LOOP), "work", [10])
    assert ex.step(4) == 4
    assert not ex.done
    total = 4
    while not ex.done:
        total += ex.step(3)
    assert total == 23 and ex.return_value == 10


def test_step_budgeted_rejects_empty_budget():
    with pytest.raises(ValueError):
        step_budgeted(Execution(parse(LOOP), "work", [1]), 0)


def test_request_yield_suspends_after_current_statement():
    class Host:
        def __init__(self):
            self.posts = []

        def post_message(self, hid, delay):
            self.posts.append((hid, delay))
            ex.request_yield()

    host = Host()
    prog = parse("int main() { post_message(3, 10); post_message(4, 0); return 7; }")
    ex = Execution(prog, "main", host=host)
    assert ex.step(1000) == 1 and ex.yielded and not ex.done
    assert ex.step(1000) == 1 and ex.yielded
    ex.step(1000)
    assert ex.done and ex.return_value == 7 and host.posts == [(3, 10), (4, 0)]


def test_builtin_cost_is_charged():
    prog = parse("int main() { print_int(1); return 0; }")
    assert function_cost(prog, "main", cost=CostModel(builtin_costs={"print_int": 5})) == 7


def test_determinism(corpus_program):
    a = run_function(corpus_program, "main")
    b = run_function(corpus_program, "main")
    assert a == b


def test_probe_neutrality(corpus_program):
    out, _ = instrument(corpus_program, Scope.ALL_CALLS)
    a = run_function(corpus_program, "main")
    b = run_function(out, "main", sink=lambda i: None)
    assert (a.return_value, a.consumed_time) == (b.return_value, b.consumed_time)


@settings(max_examples=60, deadline=None)
@given(budgets=st.lists(st.integers(min_value=1, max_value=9), min_size=1, max_size=50))
def test_sliced_run_matches_unsliced(budgets):
    src = (CORPUS / "binomial.mc").read_text()
    prog, _ = instrument(parse(src), Scope.ALL_CALLS)
    whole = ProbeRecorder()
    ref = run_function(prog, "main", sink=whole)

    sliced = ProbeRecorder()
    ex = Execution(prog, "main", sink=sliced)
    i, total = 0, 0
    while not ex.done:
        total += ex.step(max(budgets[i % len(budgets)], ex.next_cost))
        i += 1
    assert sliced.events == whole.events
    assert total == ref.consumed_time
    assert ex.return_value == ref.return_value

