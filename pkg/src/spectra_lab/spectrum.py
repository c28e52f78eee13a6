"""Bounded-memory recording of function-call count spectra.

All spectrum buffers are allocated when the pool is built. One buffer is
``current`` and receives probe hits; on every timer tick it moves to the send
queue and a zeroed buffer from the free queue takes its place. The send queue
is drained one counter per idle step, and a fully sent buffer goes back to the
free queue. When the free queue is empty the tick is dropped and the current
epoch simply keeps counting.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, Iterator, List, Optional, Sequence

from .serial import Frame

SATURATION = 127
DEFAULT_CAPACITY = 8
EPOCH_MS = 1000


class Label(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    UNLABELED = "unlabeled"


class IdOutOfRange(IndexError):
    pass


class UnknownEpoch(KeyError):
    pass


@dataclass
class Spectrum:
    epoch_seq: int
    start_time: int
    counters: Sequence[int]
    label: Label = Label.UNLABELED

    @property
    def n_funcs(self) -> int:
        return len(self.counters)

    def hits(self) -> frozenset:
        return frozenset(i for i, c in enumerate(self.counters) if c > 0)

    def frozen(self) -> "Spectrum":
        """Copy with an immutable counter tuple."""
        return Spectrum(self.epoch_seq, self.start_time, tuple(self.counters), self.label)


class Rotation(str, enum.Enum):
    ROTATED = "rotated"
    EXTENDED = "extended"


class Drain(str, enum.Enum):
    SENT_COUNTER = "sent-one-counter"
    SENT_END = "sent-end"
    IDLE = "idle-nothing"


class SpectrumPool:
    def __init__(self, n_funcs: int, capacity: int = DEFAULT_CAPACITY,
                 period_ms: int = EPOCH_MS, now: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if n_funcs < 0:
            raise ValueError("n_funcs must be >= 0")
        self.n_funcs = n_funcs
        self.capacity = capacity
        self.period_ms = period_ms
        buffers = [Spectrum(0, now, bytearray(n_funcs)) for _ in range(capacity)]
        self.current: Optional[Spectrum] = buffers[0]
        self.free_queue: Deque[Spectrum] = deque(buffers[1:])
        self.send_queue: Deque[Spectrum] = deque()
        self.ticks = 0
        self.rotations = 0
        self.dropped_rotations = 0
        self.dropped_probes = 0
        self._cursor = 0  # next counter index of send_queue[0]

    @property
    def buffer_count(self) -> int:
        return len(self.free_queue) + len(self.send_queue) + (self.current is not None)

    def record(self, probe_id: int) -> None:
        if not 0 <= probe_id < self.n_funcs:
            raise IdOutOfRange(f"probe id {probe_id} not in [0, {self.n_funcs})")
        cur = self.current
        if cur is None:
            self.dropped_probes += 1
            return
        counters = cur.counters
        if counters[probe_id] < SATURATION:
            counters[probe_id] += 1  # type: ignore[index]

    __call__ = record  # usable directly as a VM probe sink

    def rotate(self, now: int) -> Rotation:
        self.ticks += 1
        if not self.free_queue or self.current is None:
            self.dropped_rotations += 1
            return Rotation.EXTENDED
        self.send_queue.append(self.current)
        nxt = self.free_queue.popleft()
        counters = nxt.counters
        for i in range(len(counters)):
            counters[i] = 0  # type: ignore[index]
        nxt.epoch_seq = self.ticks
        nxt.start_time = now
        nxt.label = Label.UNLABELED
        self.current = nxt
        self.rotations += 1
        return Rotation.ROTATED

    def seal(self, now: int) -> None:
        """Stop recording. A current epoch that has run for a while is queued."""
        cur = self.current
        if cur is None:
            return
        if now > cur.start_time:
            self.send_queue.append(cur)
        else:
            self.free_queue.append(cur)
        self.current = None

    def label_current(self, label: Label) -> None:
        if self.current is not None:
            self.current.label = label

    def drain_step(self, tx) -> Drain:
        """Hand one frame of the oldest queued spectrum to ``tx.send_frame``.

        If the transmitter raises (busy), nothing changes and the exception
        propagates; the same frame is offered again on the next call.
        """
        if not self.send_queue:
            return Drain.IDLE
        head = self.send_queue[0]
        if self._cursor < self.n_funcs:
            tx.send_frame(Frame(head.epoch_seq, self._cursor, head.counters[self._cursor]))
            self._cursor += 1
            return Drain.SENT_COUNTER
        tx.send_frame(Frame.end(head.epoch_seq))
        self.send_queue.popleft()
        self.free_queue.append(head)
        self._cursor = 0
        return Drain.SENT_END

    def pending_frames(self) -> int:
        """Frames still to send for everything on the send queue."""
        if not self.send_queue:
            return 0
        return len(self.send_queue) * (self.n_funcs + 1) - self._cursor


def probe_record(pool: SpectrumPool, probe_id: int) -> None:
    pool.record(probe_id)


def rotate_epoch(pool: SpectrumPool, now: int) -> Rotation:
    return pool.rotate(now)


def drain_step(pool: SpectrumPool, tx) -> Drain:
    return pool.drain_step(tx)


# -- offline log -------------------------------------------------------------

_LOG_RE = re.compile(
    r"^epoch=(\d+) t=(\d+) label=(pass|fail|unlabeled) counts=([0-9,]*)$")


@dataclass
class SpectraLog:
    """Spectra received off the device, keyed by epoch, in ascending order."""

    spectra: Dict[int, Spectrum] = field(default_factory=dict)

    def append(self, s: Spectrum) -> None:
        if self.spectra and s.epoch_seq <= next(reversed(self.spectra)):
            raise ValueError(f"epoch {s.epoch_seq} is not after the last logged epoch")
        self.spectra[s.epoch_seq] = s.frozen()

    def __iter__(self) -> Iterator[Spectrum]:
        return iter(self.spectra.values())

    def __len__(self) -> int:
        return len(self.spectra)

    def __getitem__(self, epoch_seq: int) -> Spectrum:
        try:
            return self.spectra[epoch_seq]
        except KeyError:
            raise UnknownEpoch(epoch_seq) from None

    @property
    def epochs(self) -> List[int]:
        return list(self.spectra)

    def label_epoch(self, epoch_seq: int, label: Label) -> None:
        self[epoch_seq].label = Label(label)

    def label_range(self, first: int, last: int, label: Label) -> int:
        """Label every logged epoch in ``first..last``; returns how many."""
        n = 0
        for seq, s in self.spectra.items():
            if first <= seq <= last:
                s.label = Label(label)
                n += 1
        return n

    def select(self, epochs: Iterable[int]) -> List[Spectrum]:
        wanted = set(epochs)
        return [s for seq, s in self.spectra.items() if seq in wanted]

    def to_text(self) -> str:
        return "".join(
            f"epoch={s.epoch_seq} t={s.start_time} label={s.label.value} "
            f"counts={','.join(map(str, s.counters))}\n"
            for s in self.spectra.values())

    @classmethod
    def from_text(cls, text: str) -> "SpectraLog":
        log = cls()
        n_funcs = None
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            m = _LOG_RE.match(line)
            if m is None:
                raise ValueError(f"spectra log line {lineno}: malformed")
            counts = tuple(int(c) for c in m.group(4).split(",")) if m.group(4) else ()
            if any(c > SATURATION for c in counts):
                raise ValueError(f"spectra log line {lineno}: count above {SATURATION}")
            if n_funcs is None:
                n_funcs = len(counts)
            elif len(counts) != n_funcs:
                raise ValueError(f"spectra log line {lineno}: expected {n_funcs} counts")
            log.append(Spectrum(int(m.group(1)), int(m.group(2)), counts, Label(m.group(3))))
        return log


def label_epoch(log: SpectraLog, epoch_seq: int, label: Label) -> None:
    log.label_epoch(epoch_seq, label)
