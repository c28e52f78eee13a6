import sys
from pathlib import Path

import pytest

from spectra_lab.minic import parse

sys.path.insert(0, str(Path(__file__).parent))

CORPUS_DIR = Path(__file__).parent / "corpus"
CORPUS = sorted(CORPUS_DIR.glob("*.mc"))


@pytest.fixture(params=CORPUS, ids=lambda p: p.stem)
def corpus_program(request):
    return parse(request.param.read_text())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[name]
        label = name.replace("test_", "", 1).replace("_", " ")
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
