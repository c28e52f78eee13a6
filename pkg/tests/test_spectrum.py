import pytest
from hypothesis import given, settings, strategies as st

from spectra_lab.spectrum import (
    SATURATION, Drain, IdOutOfRange, Label, Rotation, SpectraLog, Spectrum, SpectrumPool,
    UnknownEpoch,
)


class FrameSink:
    def __init__(self):
        self.frames = []

    def send_frame(self, frame):
        self.frames.append(frame)


def test_saturates_at_127():
    pool = SpectrumPool(4)
    for _ in range(200):
        pool.record(2)
    assert pool.current.counters[2] == 127


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=5), max_size=1200))
def test_counter_is_min_of_true_count_and_127(hits):
    pool = SpectrumPool(6)
    truth = [0] * 6
    for h in hits:
        pool.record(h)
        truth[h] += 1
    assert list(pool.current.counters) == [min(t, SATURATION) for t in truth]


def test_record_rejects_unknown_id():
    pool = SpectrumPool(3)
    with pytest.raises(IdOutOfRange):
        pool.record(3)
    with pytest.raises(IdOutOfRange):
        pool.record(-1)


def test_rotation_starts_a_fresh_epoch():
    pool = SpectrumPool(3, capacity=2)
    pool.record(1)
    assert pool.rotate(1000) is Rotation.ROTATED
    assert pool.current.epoch_seq == 1 and pool.current.start_time == 1000
    assert list(pool.current.counters) == [0, 0, 0]
    assert list(pool.send_queue[0].counters) == [0, 1, 0]


def test_exhaustion_extends_current_epoch():
    pool = SpectrumPool(2, capacity=1)
    pool.record(0)
    assert pool.rotate(1000) is Rotation.EXTENDED
    pool.record(0)
    assert pool.current.epoch_seq == 0 and pool.current.counters[0] == 2
    assert pool.dropped_rotations == 1


@pytest.mark.parametrize("capacity, rotations, dropped", [(3, 10, 8), (1, 5, 5), (8, 7, 0), (8, 9, 2)])
def test_dropped_rotations_without_draining(capacity, rotations, dropped):
    pool = SpectrumPool(5, capacity=capacity)
    for k in range(1, rotations + 1):
        pool.rotate(k * 1000)
        assert pool.buffer_count <= capacity
    # the current buffer is held, so capacity - 1 rotations succeed
    assert pool.dropped_rotations == max(0, rotations - (capacity - 1)) == dropped


def test_drain_sends_every_counter_then_end():
    pool = SpectrumPool(3, capacity=2)
    pool.record(2)
    pool.rotate(1000)
    sink = FrameSink()
    steps = [pool.drain_step(sink) for _ in range(5)]
    assert steps == [Drain.SENT_COUNTER] * 3 + [Drain.SENT_END, Drain.IDLE]
    assert [(f.epoch_seq, f.counter_index, f.count) for f in sink.frames] == [
        (0, 0, 0), (0, 1, 0), (0, 2, 1), (0, 0xFFFF, 0)]
    assert len(pool.free_queue) == 1


def test_busy_transmitter_keeps_the_frame():
    class Busy(Exception):
        pass

    class Flaky(FrameSink):
        fail = True

        def send_frame(self, frame):
            if self.fail:
                self.fail = False
                raise Busy()
            super().send_frame(frame)

    pool = SpectrumPool(1, capacity=2)
    pool.rotate(1000)
    tx = Flaky()
    with pytest.raises(Busy):
        pool.drain_step(tx)
    assert pool.pending_frames() == 2
    pool.drain_step(tx)
    assert tx.frames[0].counter_index == 0


@settings(max_examples=200, deadline=None)
@given(capacity=st.integers(min_value=1, max_value=6),
       ops=st.lists(st.sampled_from(["rec", "rot", "drain"]), max_size=300))
def test_buffer_count_never_exceeds_capacity(capacity, ops):
    pool = SpectrumPool(3, capacity=capacity)
    sink, t = FrameSink(), 0
    for op in ops:
        if op == "rec":
            pool.record(t % 3)
        elif op == "rot":
            t += 1000
            pool.rotate(t)
        else:
            pool.drain_step(sink)
        assert pool.buffer_count == capacity
        assert len(pool.free_queue) + len(pool.send_queue) + 1 <= capacity
    seqs = [f.epoch_seq for f in sink.frames]
    assert seqs == sorted(seqs)


def test_seal_queues_a_started_epoch():
    pool = SpectrumPool(2, capacity=2)
    pool.seal(500)
    assert pool.current is None and len(pool.send_queue) == 1
    pool.record(0)
    assert pool.dropped_probes == 1


def test_label_current():
    pool = SpectrumPool(1)
    pool.label_current(Label.FAIL)
    assert pool.current.label is Label.FAIL


def test_log_text_round_trip():
    log = SpectraLog()
    log.append(Spectrum(0, 0, (0, 3, 127)))
    log.append(Spectrum(4, 4000, (1, 0, 0), Label.FAIL))
    text = log.to_text()
    assert text.splitlines()[1] == "epoch=4 t=4000 label=fail counts=1,0,0"
    assert SpectraLog.from_text(text).to_text() == text


def test_log_is_ascending_and_selectable():
    log = SpectraLog()
    for k in (1, 2, 5):
        log.append(Spectrum(k, k * 1000, (k,)))
    with pytest.raises(ValueError):
        log.append(Spectrum(3, 3000, (0,)))
    assert [s.epoch_seq for s in log.select(range(0, 4))] == [1, 2]
    assert log.label_range(2, 9, Label.PASS) == 2
    assert log[5].label is Label.PASS
    with pytest.raises(UnknownEpoch):
        log.label_epoch(4, Label.FAIL)


@pytest.mark.parametrize("line", [
    "epoch=1 t=0 label=maybe counts=1",
    "epoch=1 t=0 label=pass counts=1,128",
    "epoch=x t=0 label=pass counts=1",
])
def test_log_rejects_bad_lines(line):
    with pytest.raises(ValueError):
        SpectraLog.from_text(line + "\n")


def test_wide_counter_array():
    pool = SpectrumPool(320, capacity=2)
    for i in range(320):
        pool.record(i)
    pool.rotate(1000)
    assert pool.pending_frames() == 321
