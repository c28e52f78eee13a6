"""Deterministic virtual-time model of a prioritized message-dispatch runtime.

Each simulated thread owns a FIFO message queue and runs a dispatch loop:
take the next message, record the handler in the current spectrum, run the
handler's Mini-C body. The scheduler always runs the highest-priority thread
with work; a lower-priority handler is suspended at its next statement
boundary when a message arrives for a more urgent thread, and resumed later.

A 1000 ms timer rotates the spectrum epoch. Whenever no thread has work the
system is idle and the spectrum send queue is drained onto the serial link,
one counter frame at a time. Idle work never counts as CPU load.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Sequence, Tuple

from .instrument import Manifest, Scope, UnknownHandler
from .minic import Program
from .receiver import Reassembler, Receiver
from .scenario import Scenario, ScenarioError, ThreadSpec
from .serial import FRAME_SIZE, ChannelBusy, SerialChannel, Transmitter
from .spectrum import EPOCH_MS, Drain, Label, Rotation, SpectraLog, SpectrumPool
from .vm import CompiledProgram, CostModel, Execution, ExecutionError, compile_program


class SimError(Exception):
    pass


class DuplicateHandler(SimError):
    pass


class UnknownThread(SimError):
    pass


@dataclass(frozen=True)
class Message:
    handler: str
    payload: Tuple[int, ...] = ()
    enqueue_time: int = 0
    injected: bool = False


@dataclass(frozen=True)
class HandlerEntry:
    name: str
    handler_id: int
    thread_id: int


@dataclass(frozen=True)
class LoadSample:
    second_index: int
    busy_ms: int

    @property
    def load(self) -> float:
        return self.busy_ms / 1000


@dataclass(frozen=True)
class Event:
    time: int
    kind: str
    fields: Tuple[Tuple[str, object], ...] = ()

    def get(self, key: str, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def to_text(self) -> str:
        return " ".join([str(self.time), self.kind] + [f"{k}={v}" for k, v in self.fields])


class EventLog(list):
    def add(self, time: int, kind: str, **fields) -> None:
        self.append(Event(time, kind, tuple(fields.items())))

    def to_text(self) -> str:
        return "".join(e.to_text() + "\n" for e in self)


@dataclass
class RunStats:
    epochs_rotated: int = 0
    epochs_extended: int = 0
    dropped_rotations: int = 0
    dropped_probes: int = 0
    total_busy_ms: int = 0
    messages_handled: int = 0
    handler_errors: int = 0
    messages_discarded: int = 0
    frames_sent: int = 0

    def summary(self) -> str:
        return (f"epochs rotated={self.epochs_rotated} extended={self.epochs_extended} "
                f"dropped_rotations={self.dropped_rotations} dropped_probes={self.dropped_probes} "
                f"busy_ms={self.total_busy_ms} handled={self.messages_handled} "
                f"errors={self.handler_errors} discarded={self.messages_discarded} "
                f"frames={self.frames_sent}")


@dataclass
class RunResult:
    load: List[LoadSample]
    log: Optional[SpectraLog]
    events: EventLog
    stats: RunStats
    failed_epochs: List[int] = field(default_factory=list)


ErrorDetector = Callable[[str, Optional[ExecutionError]], bool]


def runtime_error_detector(handler: str, error: Optional[ExecutionError]) -> bool:
    return error is not None


class _Thread:
    def __init__(self, spec: ThreadSpec):
        self.spec = spec
        self.queue: Deque[Message] = deque()
        self.active: Optional[Execution] = None
        self.active_msg: Optional[Message] = None

    @property
    def busy(self) -> bool:
        return self.active is not None or bool(self.queue)


class DispatchSim:
    def __init__(self, program: Program | CompiledProgram, threads: Sequence[ThreadSpec],
                 cost: Optional[CostModel] = None, scope: Scope = Scope.DISPATCH,
                 error_detector: ErrorDetector = runtime_error_detector,
                 period_ms: int = EPOCH_MS):
        self.compiled = program if isinstance(program, CompiledProgram) else compile_program(program)
        prios = [t.priority for t in threads]
        if len(set(prios)) != len(prios):
            raise SimError("thread priorities must be unique")
        self.thread_specs = {t.thread_id: t for t in threads}
        self.cost = cost or CostModel()
        self.scope = scope
        self.error_detector = error_detector
        self.period_ms = period_ms
        self.handlers: Dict[str, HandlerEntry] = {}
        self._by_id: List[HandlerEntry] = []
        self._external: List[Tuple[int, Message]] = []

    # -- setup ---------------------------------------------------------------

    def register_handler(self, name: str, thread_id: int) -> HandlerEntry:
        if name in self.handlers:
            raise DuplicateHandler(name)
        if thread_id not in self.thread_specs:
            raise UnknownThread(thread_id)
        if name not in self.compiled.functions:
            raise UnknownHandler(name)
        entry = HandlerEntry(name, len(self._by_id), thread_id)
        self.handlers[name] = entry
        self._by_id.append(entry)
        return entry

    def manifest(self) -> Manifest:
        """Dispatch-entry manifest: handler names in registration order."""
        return Manifest(tuple(e.name for e in self._by_id))

    def post(self, thread_id: int, message: Message) -> None:
        """Queue ``message`` on ``thread_id`` at ``message.enqueue_time``.

        Before :meth:`run` this schedules an external stimulus; during a run
        it behaves like a message posted by a handler.
        """
        if thread_id not in self.thread_specs:
            raise UnknownThread(thread_id)
        if message.handler not in self.handlers:
            raise UnknownHandler(message.handler)
        if getattr(self, "_running", False):
            self._push(message.enqueue_time, thread_id, message)
        else:
            self._external.append((thread_id, message))

    # -- run -----------------------------------------------------------------

    def _push(self, time: int, thread_id: int, message: Message) -> None:
        heapq.heappush(self._heap, (time, next(self._seq), thread_id, message))

    def post_message(self, handler_id: int, delay_ms: int) -> None:
        """``post_message`` builtin, called from a running handler."""
        if not 0 <= handler_id < len(self._by_id):
            raise ExecutionError("UnknownHandler", f"no handler with id {handler_id}")
        if delay_ms < 0:
            raise ExecutionError("BadDelay", f"negative delay {delay_ms}")
        entry = self._by_id[handler_id]
        ex = self._running_exec
        t = self._slice_start + (ex.slice_consumed if ex else 0) + delay_ms
        if t < self._end:
            self._push(t, entry.thread_id, Message(entry.name, (), t))
        if ex is not None:
            ex.request_yield()

    def run(self, scenario: Scenario, pool: Optional[SpectrumPool] = None,
            channel: Optional[SerialChannel] = None,
            receiver: Optional[Receiver] = None) -> RunResult:
        scenario.validate()
        end = scenario.duration
        period = self.period_ms
        self._end = end
        self._heap: List = []
        self._seq = itertools.count()
        self._running = True
        self._running_exec: Optional[Execution] = None
        self._slice_start = 0
        threads = {tid: _Thread(spec) for tid, spec in self.thread_specs.items()}
        by_priority = sorted(threads.values(), key=lambda t: -t.spec.priority)
        events = EventLog()
        stats = RunStats()
        failed_epochs: List[int] = []
        events.add(0, "start", seed=scenario.seed, duration=end, scope=self.scope.value,
                   recording=int(pool is not None))

        if pool is not None and self.scope is Scope.DISPATCH and pool.n_funcs != len(self._by_id):
            raise SimError(f"pool has {pool.n_funcs} counters for {len(self._by_id)} handlers")
        if pool is not None and channel is None:
            channel = SerialChannel(scenario.bytes_per_second)
        if pool is not None and receiver is None:
            receiver = Receiver(Reassembler(pool.n_funcs, SpectraLog(), period))
        clock_now = [0]
        tx = Transmitter(channel, lambda: clock_now[0]) if channel is not None else None

        rng = random.Random(scenario.seed)
        for s in scenario.stimuli:
            t = s.time
            if scenario.jitter_ms:
                t = min(t + rng.randint(0, scenario.jitter_ms), end - 1)
            self._push(t, s.thread_id, Message(s.handler, s.args, t))
        for tid, msg in self._external:
            if msg.enqueue_time < end:
                self._push(msg.enqueue_time, tid, msg)
        fault_periods: Dict[str, int] = {}
        for f in scenario.faults:
            if f.kind == "lingering-repost":
                start = scenario.phase_start(f.phase)
                entry = self.handlers[f.handler]
                fault_periods[f.handler] = f.repost_period
                self._push(start, entry.thread_id, Message(f.handler, (), start, injected=True))
                events.add(start, "fault-armed", handler=f.handler, period=f.repost_period)

        sink = pool if (pool is not None and self.scope is Scope.ALL_CALLS) else None

        def current_epoch(now: int) -> int:
            if pool is not None and pool.current is not None:
                return pool.current.epoch_seq
            return now // period

        def idle_work(now: int) -> Optional[int]:
            """Drain and poll at ``now``; return when idle work can next progress."""
            clock_now[0] = now
            if receiver is not None and channel is not None:
                for s in receiver.feed_bytes(channel.poll(now)):
                    events.add(now, "received", epoch=s.epoch_seq)
            if pool is None or tx is None:
                return None
            while True:
                try:
                    r = pool.drain_step(tx)
                except ChannelBusy:
                    break
                if r is Drain.IDLE:
                    break
                stats.frames_sent += 1
                if r is Drain.SENT_END:
                    events.add(now, "spectrum-sent", epoch=pool.free_queue[-1].epoch_seq)
            wake = None
            if pool.pending_frames():
                room = channel.room_at(FRAME_SIZE, now)
                if room is not None:
                    wake = max(math.ceil(room), now + 1)
            return wake

        now = 0
        next_tick = period
        last_thread: Optional[_Thread] = None
        while True:
            while self._heap and self._heap[0][0] <= now:
                _, _, tid, msg = heapq.heappop(self._heap)
                threads[tid].queue.append(msg)
                events.add(now, "arrive", thread=tid, handler=msg.handler)
            while next_tick <= now and next_tick <= end:
                if pool is not None:
                    r = pool.rotate(next_tick)
                    if r is Rotation.ROTATED:
                        stats.epochs_rotated += 1
                        events.add(now, "rotate", epoch=pool.current.epoch_seq)
                    else:
                        stats.epochs_extended += 1
                        events.add(now, "extend", epoch=current_epoch(now))
                next_tick += period
            if now >= end:
                break

            thread = next((t for t in by_priority if t.busy), None)
            if thread is None:
                wake = idle_work(now)
                candidates = [next_tick, end]
                if self._heap:
                    candidates.append(self._heap[0][0])
                if wake is not None:
                    candidates.append(wake)
                now = min(candidates)
                continue

            if last_thread is not None and last_thread is not thread and last_thread.active is not None:
                events.add(now, "preempt", thread=last_thread.spec.thread_id,
                           by=thread.spec.thread_id)
            ex = thread.active
            if ex is None:
                msg = thread.queue.popleft()
                entry = self.handlers[msg.handler]
                if pool is not None and self.scope is Scope.DISPATCH:
                    pool.record(entry.handler_id)
                ex = Execution(self.compiled, msg.handler, msg.payload, sink=sink,
                               cost=self.cost, host=self)
                thread.active, thread.active_msg = ex, msg
                events.add(now, "dispatch", thread=thread.spec.thread_id, handler=msg.handler)
                if msg.injected:
                    t = now + fault_periods[msg.handler]
                    if t < end:
                        self._push(t, entry.thread_id, Message(msg.handler, (), t, injected=True))
            elif last_thread is not thread:
                events.add(now, "resume", thread=thread.spec.thread_id,
                           handler=thread.active_msg.handler)
            last_thread = thread

            nxt = min(next_tick, end, self._heap[0][0] if self._heap else end)
            self._running_exec = ex
            self._slice_start = now
            consumed = ex.step(nxt - now)
            if consumed == 0 and not ex.done and not ex.yielded:
                # next statement is longer than the gap to the next event
                consumed = ex.step(ex.next_cost)
            self._running_exec = None
            if consumed:
                events.add(now, "run", thread=thread.spec.thread_id,
                           handler=thread.active_msg.handler, until=now + consumed)
                stats.total_busy_ms += consumed
            now += consumed
            if ex.done:
                name = thread.active_msg.handler
                if ex.error is not None:
                    stats.handler_errors += 1
                    events.add(now, "error", thread=thread.spec.thread_id, handler=name,
                               fault=ex.error.kind)
                else:
                    events.add(now, "finish", thread=thread.spec.thread_id, handler=name)
                stats.messages_handled += 1
                if self.error_detector(name, ex.error):
                    epoch = current_epoch(now)
                    if pool is not None:
                        pool.label_current(Label.FAIL)
                    if epoch not in failed_epochs:
                        failed_epochs.append(epoch)
                thread.active = thread.active_msg = None

        self._running = False
        for t in by_priority:
            dropped = len(t.queue) + (t.active is not None)
            if dropped:
                stats.messages_discarded += dropped
                events.add(end, "discard", thread=t.spec.thread_id, messages=dropped)
        stats.messages_discarded += len(self._heap)
        self._heap.clear()
        events.add(end, "end")

        log = None
        if pool is not None:
            pool.seal(end)
            t = end
            while pool.pending_frames() or not channel.empty:
                wake = idle_work(t)
                nr = channel.next_ready()
                candidates = [c for c in (wake, math.ceil(nr) if nr is not None else None)
                              if c is not None]
                if not candidates:
                    break
                t = max(min(candidates), t + 1)
            idle_work(t)
            events.add(t, "flushed")
            stats.dropped_rotations = pool.dropped_rotations
            stats.dropped_probes = pool.dropped_probes
            log = receiver.log
            for epoch in failed_epochs:
                if epoch in log.spectra:
                    log.label_epoch(epoch, Label.FAIL)

        load = cpu_load_series(events, end, period)
        return RunResult(load, log, events, stats, failed_epochs)


def cpu_load_series(events: Sequence[Event], duration_ms: Optional[int] = None,
                    period_ms: int = EPOCH_MS) -> List[LoadSample]:
    """Busy milliseconds per one-second window, from the ``run`` events."""
    slices = [(e.time, e.get("until")) for e in events if e.kind == "run"]
    if duration_ms is None:
        duration_ms = max((u for _, u in slices), default=0)
    n = -(-duration_ms // period_ms)
    busy = [0] * n
    for start, until in slices:
        t = start
        while t < until and t < duration_ms:
            k = t // period_ms
            stop = min(until, (k + 1) * period_ms, duration_ms)
            busy[k] += stop - t
            t = stop
    return [LoadSample(i, b) for i, b in enumerate(busy)]


def load_csv(samples: Sequence[LoadSample]) -> str:
    return "second,load\n" + "".join(f"{s.second_index},{s.load:.3f}\n" for s in samples)


def read_load_csv(text: str) -> List[Tuple[int, float]]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#") or line == "second,load":
            continue
        try:
            sec, load = line.split(",")
            rows.append((int(sec), float(load)))
        except ValueError:
            raise ValueError(f"load CSV line {lineno}: expected '<second>,<load>'") from None
    return rows


def build_sim(program: Program | CompiledProgram, scenario: Scenario,
              cost: Optional[CostModel] = None, scope: Optional[Scope] = None,
              error_detector: ErrorDetector = runtime_error_detector) -> DispatchSim:
    """Create a simulator with the threads and handlers declared in ``scenario``."""
    scenario.validate()
    scope = scope or Scope.parse(scenario.scope)
    sim = DispatchSim(program, scenario.threads, cost=cost, scope=scope,
                      error_detector=error_detector)
    for name, tid in scenario.handlers:
        try:
            sim.register_handler(name, tid)
        except UnknownHandler as exc:
            raise ScenarioError(str(exc)) from None
    return sim
