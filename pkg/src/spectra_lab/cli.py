"""``spectra-lab`` command line.

Exit codes: 0 success, 2 usage, 3 parse error, 4 I/O error, 5 input already
instrumented, 6 scenario/manifest validation failure, 7 empty selector.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .diagnosis import (
    EmptyWindow,
    SpectraSet,
    accuracy,
    load_delta,
    parse_selector,
    suspects,
)
from .fixture import write_fixture
from .instrument import (
    PROBE,
    AlreadyInstrumented,
    Manifest,
    Scope,
    UnknownHandler,
    instrument,
    is_instrumented,
)
from .minic import Call, Comma, ParseError, parse, print_program, walk
from .scenario import ScenarioError, parse_scenario
from .sim import SimError, build_sim, load_csv, read_load_csv
from .spectrum import SpectraLog, SpectrumPool
from .serial import SerialChannel

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_IO = 4
EXIT_INSTRUMENTED = 5
EXIT_SCENARIO = 6
EXIT_EMPTY_SELECTOR = 7


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise CliError(EXIT_IO, f"{path} is not UTF-8") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _parse_program(path: str):
    try:
        return parse(_read(path))
    except ParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}:{exc}") from None


def _load_scenario(path: str):
    try:
        sc = parse_scenario(_read(path))
        sc.validate()
    except ScenarioError as exc:
        raise CliError(EXIT_SCENARIO, f"{path}: {exc}") from None
    return sc


def _load_manifest(path: str) -> Manifest:
    try:
        return Manifest.from_text(_read(path))
    except ValueError as exc:
        raise CliError(EXIT_SCENARIO, f"{path}: {exc}") from None


# -- instrument --------------------------------------------------------------


def cmd_instrument(args) -> int:
    program = _parse_program(args.input)
    scope = Scope.parse(args.scope)
    handlers = None
    if scope is Scope.DISPATCH:
        if not args.scenario:
            raise CliError(EXIT_USAGE, "--scope dispatch needs --scenario to name the handlers")
        handlers = [name for name, _ in _load_scenario(args.scenario).handlers]
    try:
        out, manifest = instrument(program, scope, handlers)
    except AlreadyInstrumented:
        raise CliError(EXIT_INSTRUMENTED, f"{args.input} is already instrumented") from None
    except UnknownHandler as exc:
        raise CliError(EXIT_SCENARIO, str(exc)) from None
    _write(args.output, print_program(out))
    _write(args.manifest, manifest.to_text())
    print(f"instrumented {args.input} -> {args.output} ({manifest.n_funcs} probe ids, "
          f"scope={scope.value})")
    return EXIT_OK


# -- run ---------------------------------------------------------------------


def _check_manifest(program, manifest: Manifest, scope: Scope, handler_names: List[str]) -> None:
    if scope is Scope.DISPATCH:
        if list(manifest.names) != handler_names:
            raise CliError(EXIT_SCENARIO,
                           "manifest does not list the scenario's handlers in registration order")
        return
    if not is_instrumented(program):
        raise CliError(EXIT_SCENARIO, "scope=all needs an instrumented program")
    for node in walk(program):
        if isinstance(node, Comma) and isinstance(node.first, Call) and node.first.callee == PROBE:
            (arg,) = node.first.args
            pid = getattr(arg, "value", -1)
            if not 0 <= pid < manifest.n_funcs:
                raise CliError(EXIT_SCENARIO, f"probe id {pid} not in manifest")
            if isinstance(node.second, Call) and manifest.name_of(pid) != node.second.callee:
                raise CliError(EXIT_SCENARIO,
                               f"probe id {pid} is {manifest.name_of(pid)!r} in the manifest "
                               f"but guards a call to {node.second.callee!r}")


def cmd_run(args) -> int:
    outputs = [p for p in (args.spectra, args.load, args.events) if p]
    inputs = [args.scenario, args.program, args.manifest]
    if len({str(Path(p).resolve()) for p in outputs + inputs}) != len(outputs + inputs):
        raise CliError(EXIT_USAGE, "input and output paths must all be distinct")
    scenario = _load_scenario(args.scenario)
    program = _parse_program(args.program)
    manifest = _load_manifest(args.manifest)
    if args.seed is not None:
        scenario.header["seed"] = str(args.seed)
    if args.capacity is not None:
        scenario.header["capacity"] = str(args.capacity)
    if args.baud is not None:
        scenario.header["bytes_per_second"] = str(max(1, args.baud // 10))
    try:
        scenario.validate()
        scope = Scope.parse(scenario.scope)
        if scenario.n_funcs is not None and scenario.n_funcs != manifest.n_funcs:
            raise ScenarioError(f"scenario says n_funcs={scenario.n_funcs}, "
                                f"manifest has {manifest.n_funcs}")
        _check_manifest(program, manifest, scope, [n for n, _ in scenario.handlers])
        sim = build_sim(program, scenario, scope=scope)
        pool = SpectrumPool(manifest.n_funcs, scenario.capacity)
        result = sim.run(scenario, pool, SerialChannel(scenario.bytes_per_second))
    except (ScenarioError, SimError, ValueError) as exc:
        raise CliError(EXIT_SCENARIO, str(exc)) from None
    _write(args.spectra, result.log.to_text())
    _write(args.load, load_csv(result.load))
    if args.events:
        _write(args.events, result.events.to_text())
    print(result.stats.summary())
    print(f"spectra logged={len(result.log)} failed_epochs={len(result.failed_epochs)}")
    return EXIT_OK


# -- diagnose ----------------------------------------------------------------


def cmd_diagnose(args) -> int:
    try:
        log = SpectraLog.from_text(_read(args.spectra))
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"{args.spectra}: {exc}") from None
    try:
        pass_ids = parse_selector(args.pass_sel)
        fail_ids = parse_selector(args.fail_sel)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    manifest = _load_manifest(args.manifest) if args.manifest else None
    pass_spectra, fail_spectra = log.select(pass_ids), log.select(fail_ids)
    for role, sel, chosen in (("pass", args.pass_sel, pass_spectra),
                              ("fail", args.fail_sel, fail_spectra)):
        if not chosen:
            raise CliError(EXIT_EMPTY_SELECTOR, f"{role} selector {sel!r} matches no logged epoch")
    try:
        report = suspects(SpectraSet(pass_spectra, args.pass_sel, "pass"),
                          SpectraSet(fail_spectra, args.fail_sel, "fail"), manifest)
    except ValueError as exc:
        raise CliError(EXIT_SCENARIO, str(exc)) from None
    with_accuracy = args.truth is not None
    if with_accuracy:
        if manifest is None:
            raise CliError(EXIT_USAGE, "--truth needs --manifest to map names to probe ids")
        names = [n.strip() for n in _read(args.truth).splitlines() if n.strip()]
        try:
            truth = {manifest.id_of(n) for n in names}
        except KeyError as exc:
            raise CliError(EXIT_SCENARIO, f"truth names unknown function {exc}") from None
        report.accuracy = accuracy(report, truth)
    text = report.to_text(with_accuracy)
    _write(args.output, text)
    print("".join(line + "\n" for line in text.splitlines() if not line.startswith("#")), end="")
    return EXIT_OK


# -- report ------------------------------------------------------------------


def _parse_window(text: str):
    name, sep, sel = text.partition("=")
    lo, dots, hi = sel.partition("..")
    if not sep or not dots or not name:
        raise CliError(EXIT_USAGE, f"window must look like NAME=A..B, got {text!r}")
    try:
        return name, (int(lo), int(hi))
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad window bounds in {text!r}") from None


def cmd_report(args) -> int:
    try:
        rows = read_load_csv(_read(args.load))
    except ValueError as exc:
        raise CliError(EXIT_IO, f"{args.load}: {exc}") from None
    if not rows:
        raise CliError(EXIT_IO, f"{args.load}: no load samples")
    windows = [_parse_window(w) for w in args.window or []]
    out = ["# second load"] + [f"{sec} {load:.3f}" for sec, load in rows]
    summary: List[str] = []
    means = {}
    for name, win in windows:
        try:
            mean, _, _ = load_delta(rows, win, win)
        except EmptyWindow as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
        means[name] = mean
        summary.append(f"# {name} {win[0]}..{win[1]} mean={mean:.3f}")
    if len(windows) >= 2:
        (first, wa) = windows[0]
        for name, wb in windows[1:]:
            _, _, delta = load_delta(rows, wa, wb)
            summary.append(f"# delta {name}-{first} = {delta:+.2f} points")
    text = "\n".join(out + summary) + "\n"
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write("\n".join(out) + "\n")
    for line in summary:
        print(line[2:])
    return EXIT_OK


def cmd_fixture(args) -> int:
    try:
        paths = write_fixture(Path(args.directory), seed=args.seed, fault=not args.no_fault)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc)) from None
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectra-lab",
                                description="Program-spectra collection and diagnosis lab.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("instrument", help="insert probe calls and write the manifest")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--scope", choices=["all", "dispatch"], default="all")
    s.add_argument("--scenario", help="scenario whose handler lines define dispatch probe ids")
    s.set_defaults(func=cmd_instrument)

    s = sub.add_parser("run", help="simulate a scenario and collect spectra")
    s.add_argument("--scenario", required=True)
    s.add_argument("--program", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--spectra", required=True)
    s.add_argument("--load", required=True)
    s.add_argument("--events")
    s.add_argument("--seed", type=int)
    s.add_argument("--capacity", type=int)
    s.add_argument("--baud", type=int, help="line rate in baud (8N1: bytes/s = baud/10)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("diagnose", help="compare pass and fail spectra")
    s.add_argument("--spectra", required=True)
    s.add_argument("--pass", dest="pass_sel", required=True)
    s.add_argument("--fail", dest="fail_sel", required=True)
    s.add_argument("--manifest")
    s.add_argument("--truth")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("report", help="gnuplot-ready load table with window means")
    s.add_argument("--load", required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--window", action="append", metavar="NAME=A..B")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("fixture", help="write the case-study program and scenario")
    s.add_argument("directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-fault", action="store_true")
    s.set_defaults(func=cmd_fixture)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"spectra-lab: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
