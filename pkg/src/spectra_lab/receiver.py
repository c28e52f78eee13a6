"""PC side of the serial link: bytes to frames to completed spectra."""

from __future__ import annotations

from typing import Dict, List, Optional

from .serial import FRAME_SIZE, Frame, decode_frame
from .spectrum import EPOCH_MS, SpectraLog, Spectrum


class ReassemblyError(Exception):
    pass


class IncompleteSpectrum(ReassemblyError):
    def __init__(self, epoch_seq: int, missing: List[int]):
        self.epoch_seq = epoch_seq
        self.missing = missing
        super().__init__(f"epoch {epoch_seq} ended with missing counters {missing}")


class EpochRegression(ReassemblyError):
    pass


class Reassembler:
    """Collects counter frames per epoch; an END frame completes the spectrum.

    Epoch start times are not on the wire; they follow from the epoch number
    because epoch ``k`` always starts at ``k * period_ms``.
    """

    def __init__(self, n_funcs: int, log: Optional[SpectraLog] = None,
                 period_ms: int = EPOCH_MS):
        self.n_funcs = n_funcs
        self.period_ms = period_ms
        self.log = log if log is not None else SpectraLog()
        self.last_completed: Optional[int] = None
        self._partial: Dict[int, Dict[int, int]] = {}

    def feed(self, frame: Frame) -> Optional[Spectrum]:
        seq = frame.epoch_seq
        if self.last_completed is not None and seq <= self.last_completed:
            raise EpochRegression(
                f"frame for epoch {seq} after epoch {self.last_completed} completed")
        counts = self._partial.setdefault(seq, {})
        if not frame.is_end:
            if frame.counter_index >= self.n_funcs:
                raise ReassemblyError(
                    f"counter index {frame.counter_index} out of range for {self.n_funcs}")
            counts[frame.counter_index] = frame.count
            return None
        del self._partial[seq]
        missing = [i for i in range(self.n_funcs) if i not in counts]
        if missing:
            raise IncompleteSpectrum(seq, missing)
        spectrum = Spectrum(seq, seq * self.period_ms, tuple(counts[i] for i in range(self.n_funcs)))
        self.log.append(spectrum)
        self.last_completed = seq
        return spectrum


def reassemble_feed(r: Reassembler, frame: Frame) -> Optional[Spectrum]:
    return r.feed(frame)


class Receiver:
    """Splits the raw byte stream into frames and feeds a reassembler."""

    def __init__(self, reassembler: Reassembler):
        self.reassembler = reassembler
        self._buf = bytearray()
        self.frames_received = 0

    @property
    def log(self) -> SpectraLog:
        return self.reassembler.log

    def feed_bytes(self, data: bytes) -> List[Spectrum]:
        self._buf.extend(data)
        done: List[Spectrum] = []
        while len(self._buf) >= FRAME_SIZE:
            chunk = bytes(self._buf[:FRAME_SIZE])
            del self._buf[:FRAME_SIZE]
            frame = decode_frame(chunk)
            self.frames_received += 1
            s = self.reassembler.feed(frame)
            if s is not None:
                done.append(s)
        return done

    @property
    def idle(self) -> bool:
        return not self._buf
