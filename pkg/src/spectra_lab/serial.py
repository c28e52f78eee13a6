"""Wire format and simulated serial link for spectrum extraction.

A frame carries one counter of one spectrum::

    A5 | epoch_hi epoch_lo | index_hi index_lo | count | checksum

Fields are big-endian. ``index == 0xFFFF`` marks the end of a spectrum (count
0). The checksum is the XOR of the six preceding bytes, so any single-byte
corruption is detected.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from operator import xor
from typing import Callable, Deque, Optional, Tuple, Union

MAGIC = 0xA5
END_INDEX = 0xFFFF
FRAME_SIZE = 7
MAX_COUNT = 127

DEFAULT_BYTES_PER_SECOND = 960  # 9600 baud, 8N1
DEFAULT_BUFFER_BYTES = 64

Time = Union[int, Fraction]


class CodecError(ValueError):
    pass


class FieldRange(CodecError):
    pass


class FrameLength(CodecError):
    pass


class BadMagic(CodecError):
    pass


class ChecksumMismatch(CodecError):
    pass


class CountRange(CodecError):
    pass


@dataclass(frozen=True)
class Frame:
    epoch_seq: int
    counter_index: int
    count: int = 0

    @classmethod
    def end(cls, epoch_seq: int) -> "Frame":
        return cls(epoch_seq, END_INDEX, 0)

    @property
    def is_end(self) -> bool:
        return self.counter_index == END_INDEX


def checksum(data: bytes) -> int:
    return reduce(xor, data, 0)


def encode_frame(f: Frame) -> bytes:
    if not 0 <= f.epoch_seq <= 0xFFFF:
        raise FieldRange(f"epoch_seq {f.epoch_seq} does not fit 16 bits")
    if not 0 <= f.counter_index <= 0xFFFF:
        raise FieldRange(f"counter_index {f.counter_index} does not fit 16 bits")
    if f.is_end and f.count != 0:
        raise FieldRange("END frame must carry count 0")
    if not 0 <= f.count <= MAX_COUNT:
        raise FieldRange(f"count {f.count} outside [0, {MAX_COUNT}]")
    body = bytes((MAGIC, f.epoch_seq >> 8, f.epoch_seq & 0xFF,
                  f.counter_index >> 8, f.counter_index & 0xFF, f.count))
    return body + bytes((checksum(body),))


def decode_frame(data: bytes) -> Frame:
    if len(data) != FRAME_SIZE:
        raise FrameLength(f"frame must be {FRAME_SIZE} bytes, got {len(data)}")
    if data[0] != MAGIC:
        raise BadMagic(f"bad magic byte 0x{data[0]:02X}")
    if checksum(data[:6]) != data[6]:
        raise ChecksumMismatch(f"checksum 0x{data[6]:02X} != 0x{checksum(data[:6]):02X}")
    epoch = (data[1] << 8) | data[2]
    index = (data[3] << 8) | data[4]
    count = data[5]
    if count > MAX_COUNT or (index == END_INDEX and count != 0):
        raise CountRange(f"count {count} invalid for index 0x{index:04X}")
    return Frame(epoch, index, count)


# -- channel -----------------------------------------------------------------


class ChannelBusy(Exception):
    """The in-flight buffer cannot take the bytes now; retry later."""


# drain_step reports this to its caller
TransmitterBusy = ChannelBusy


class SerialChannel:
    """Reliable, in-order byte pipe with a fixed line rate.

    Bytes go out back to back: each occupies the line for
    ``1000 / bytes_per_second`` ms and becomes readable when its transmission
    finishes. Bytes still on the line count against ``buffer_bytes``.
    Readiness times are exact fractions of a millisecond.
    """

    def __init__(self, bytes_per_second: int = DEFAULT_BYTES_PER_SECOND,
                 buffer_bytes: int = DEFAULT_BUFFER_BYTES):
        if bytes_per_second <= 0:
            raise ValueError("bytes_per_second must be positive")
        if buffer_bytes <= 0:
            raise ValueError("buffer_bytes must be positive")
        self.bytes_per_second = bytes_per_second
        self.buffer_bytes = buffer_bytes
        self.byte_time = Fraction(1000, bytes_per_second)
        self._fifo: Deque[Tuple[Fraction, int]] = deque()
        self._line_free: Fraction = Fraction(0)
        self.bytes_sent = 0

    def _pending_times(self, now: Time):
        return [t for t, _ in self._fifo if t > now]

    def in_flight(self, now: Time) -> int:
        return len(self._pending_times(now))

    def send(self, data: bytes, now: Time) -> None:
        if self.in_flight(now) + len(data) > self.buffer_bytes:
            raise ChannelBusy(f"{self.in_flight(now)} bytes in flight")
        t = max(Fraction(now), self._line_free)
        for b in data:
            t += self.byte_time
            self._fifo.append((t, b))
        self._line_free = t
        self.bytes_sent += len(data)

    def poll(self, now: Time) -> bytes:
        out = bytearray()
        while self._fifo and self._fifo[0][0] <= now:
            out.append(self._fifo.popleft()[1])
        return bytes(out)

    def room_at(self, n_bytes: int, now: Time) -> Optional[Fraction]:
        """Earliest time ``n_bytes`` fit in the buffer, or None if they never will."""
        if n_bytes > self.buffer_bytes:
            return None
        pending = self._pending_times(now)
        excess = len(pending) + n_bytes - self.buffer_bytes
        if excess <= 0:
            return Fraction(now)
        return pending[excess - 1]

    def next_ready(self) -> Optional[Fraction]:
        return self._fifo[0][0] if self._fifo else None

    @property
    def empty(self) -> bool:
        return not self._fifo


def channel_send(ch: SerialChannel, data: bytes, now: Time) -> None:
    ch.send(data, now)


def channel_poll(ch: SerialChannel, now: Time) -> bytes:
    return ch.poll(now)


class Transmitter:
    """Encodes frames onto a channel at the time given by ``clock``."""

    def __init__(self, channel: SerialChannel, clock: Callable[[], Time]):
        self.channel = channel
        self.clock = clock
        self.frames_sent = 0

    def send_frame(self, frame: Frame) -> None:
        self.channel.send(encode_frame(frame), self.clock())
        self.frames_sent += 1
