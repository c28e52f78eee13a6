"""Scenario files: run configuration, thread/handler layout, phases, stimuli.

Format (UTF-8, ``#`` starts a comment)::

    seed=0
    scope=dispatch
    capacity=8
    bytes_per_second=960
    jitter_ms=0
    thread <thread_id> <priority>
    handler <name> <thread_id>
    phase <name> <duration_ms>
    fault lingering-repost <handler> <period_ms> <phase>
    at <t_ms> post <thread_id> <handler> [args...]

``key=value`` header lines come first. Handlers are registered, and get their
IDs, in the order of their ``handler`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

HEADER_KEYS = ("seed", "n_funcs", "scope", "capacity", "bytes_per_second", "jitter_ms")
FAULT_KINDS = ("lingering-repost", "none")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ThreadSpec:
    thread_id: int
    priority: int  # higher runs first


@dataclass(frozen=True)
class Stimulus:
    time: int
    thread_id: int
    handler: str
    args: Tuple[int, ...] = ()


@dataclass(frozen=True)
class FaultInjection:
    kind: str
    handler: str
    repost_period: int
    phase: str


@dataclass
class Scenario:
    header: Dict[str, str] = field(default_factory=dict)
    threads: List[ThreadSpec] = field(default_factory=list)
    handlers: List[Tuple[str, int]] = field(default_factory=list)
    phases: List[Tuple[str, int]] = field(default_factory=list)
    faults: List[FaultInjection] = field(default_factory=list)
    stimuli: List[Stimulus] = field(default_factory=list)

    @property
    def duration(self) -> int:
        return sum(d for _, d in self.phases)

    def phase_start(self, name: str) -> int:
        t = 0
        for n, d in self.phases:
            if n == name:
                return t
            t += d
        raise ScenarioError(f"no phase named {name!r}")

    def phase_windows(self) -> List[Tuple[str, int, int]]:
        """``(name, start_ms, end_ms)`` per phase."""
        out, t = [], 0
        for n, d in self.phases:
            out.append((n, t, t + d))
            t += d
        return out

    def _int(self, key: str, default: int) -> int:
        value = self.header.get(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ScenarioError(f"header {key}={value!r} is not an integer") from None

    @property
    def seed(self) -> int:
        return self._int("seed", 0)

    @property
    def capacity(self) -> int:
        return self._int("capacity", 8)

    @property
    def bytes_per_second(self) -> int:
        return self._int("bytes_per_second", 960)

    @property
    def jitter_ms(self) -> int:
        return self._int("jitter_ms", 0)

    @property
    def n_funcs(self) -> Optional[int]:
        return self._int("n_funcs", -1) if "n_funcs" in self.header else None

    @property
    def scope(self) -> str:
        return self.header.get("scope", "dispatch")

    def validate(self) -> None:
        if not self.phases:
            raise ScenarioError("scenario has no phases")
        names = [n for n, _ in self.phases]
        if len(set(names)) != len(names):
            raise ScenarioError("phase names must be unique")
        if any(d <= 0 for _, d in self.phases):
            raise ScenarioError("phase durations must be positive")
        prios = [t.priority for t in self.threads]
        if len(set(prios)) != len(prios):
            raise ScenarioError("thread priorities must be unique")
        tids = {t.thread_id for t in self.threads}
        if len(tids) != len(self.threads):
            raise ScenarioError("thread ids must be unique")
        registered: Dict[str, int] = {}
        for name, tid in self.handlers:
            if name in registered:
                raise ScenarioError(f"handler {name!r} registered twice")
            if tid not in tids:
                raise ScenarioError(f"handler {name!r} on unknown thread {tid}")
            registered[name] = tid
        for key in ("seed", "capacity", "bytes_per_second", "jitter_ms", "n_funcs"):
            if key in self.header:
                self._int(key, 0)
        if self.capacity < 1 or self.bytes_per_second < 1 or self.jitter_ms < 0:
            raise ScenarioError("capacity and bytes_per_second must be positive")
        if self.scope not in ("dispatch", "all", "dispatch-entry-only", "all-calls"):
            raise ScenarioError(f"unknown scope {self.scope!r}")
        total = self.duration
        last = -1
        for s in self.stimuli:
            if s.handler not in registered:
                raise ScenarioError(f"stimulus at {s.time} names unknown handler {s.handler!r}")
            if registered[s.handler] != s.thread_id:
                raise ScenarioError(
                    f"stimulus at {s.time}: {s.handler!r} runs on thread "
                    f"{registered[s.handler]}, not {s.thread_id}")
            if not 0 <= s.time < total:
                raise ScenarioError(f"stimulus at {s.time} outside [0, {total})")
            if s.time < last:
                raise ScenarioError(f"stimulus at {s.time} is out of time order")
            last = s.time
        for f in self.faults:
            if f.kind not in FAULT_KINDS:
                raise ScenarioError(f"unknown fault kind {f.kind!r}")
            if f.kind == "none":
                continue
            if f.handler not in registered:
                raise ScenarioError(f"fault names unknown handler {f.handler!r}")
            if f.repost_period <= 0:
                raise ScenarioError("fault repost period must be positive")
            self.phase_start(f.phase)

    def to_text(self) -> str:
        lines = [f"{k}={v}" for k, v in self.header.items()]
        lines += [f"thread {t.thread_id} {t.priority}" for t in self.threads]
        lines += [f"handler {n} {tid}" for n, tid in self.handlers]
        lines += [f"phase {n} {d}" for n, d in self.phases]
        lines += [f"fault {f.kind} {f.handler} {f.repost_period} {f.phase}" for f in self.faults]
        for s in self.stimuli:
            args = "".join(f" {a}" for a in s.args)
            lines.append(f"at {s.time} post {s.thread_id} {s.handler}{args}")
        return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    in_header = True
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if "=" in line and len(words) == 1:
                if not in_header:
                    raise ScenarioError("header lines must precede the body")
                key, value = line.split("=", 1)
                if key not in HEADER_KEYS:
                    raise ScenarioError(f"unknown header key {key!r}")
                sc.header[key] = value
                continue
            in_header = False
            kind = words[0]
            if kind == "thread" and len(words) == 3:
                sc.threads.append(ThreadSpec(int(words[1]), int(words[2])))
            elif kind == "handler" and len(words) == 3:
                sc.handlers.append((words[1], int(words[2])))
            elif kind == "phase" and len(words) == 3:
                sc.phases.append((words[1], int(words[2])))
            elif kind == "fault" and len(words) == 5:
                sc.faults.append(FaultInjection(words[1], words[2], int(words[3]), words[4]))
            elif kind == "at" and len(words) >= 5 and words[2] == "post":
                sc.stimuli.append(Stimulus(int(words[1]), int(words[3]), words[4],
                                           tuple(int(a) for a in words[5:])))
            else:
                raise ScenarioError(f"cannot parse {line!r}")
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise ScenarioError(f"line {lineno}: {exc}") from None
            raise ScenarioError(f"line {lineno}: bad number in {line!r}") from None
    return sc
