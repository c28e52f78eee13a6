import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from pipeline import random_schedule, run_schedule
from spectra_lab.receiver import (
    EpochRegression, IncompleteSpectrum, Reassembler, Receiver, ReassemblyError,
)
from spectra_lab.serial import (
    END_INDEX, BadMagic, ChannelBusy, ChecksumMismatch, CodecError, CountRange, FieldRange,
    Frame, FrameLength, SerialChannel, channel_poll, channel_send, checksum, decode_frame,
    encode_frame,
)

frames = st.builds(
    Frame,
    st.integers(min_value=0, max_value=0xFFFF),
    st.integers(min_value=0, max_value=0xFFFE),
    st.integers(min_value=0, max_value=127),
) | st.integers(min_value=0, max_value=0xFFFF).map(Frame.end)


def test_frame_layout():
    # XOR of A5 00 01 00 02 07 is A1
    assert encode_frame(Frame(1, 2, 7)) == bytes([0xA5, 0x00, 0x01, 0x00, 0x02, 0x07, 0xA1])
    assert encode_frame(Frame(0, 0, 0)) == bytes([0xA5, 0, 0, 0, 0, 0, 0xA5])


def test_end_frame_layout():
    raw = encode_frame(Frame.end(1))
    assert raw[:6] == bytes([0xA5, 0x00, 0x01, 0xFF, 0xFF, 0x00])
    assert raw[6] == 0xA5 ^ 0x01  # the two 0xFF bytes cancel
    assert decode_frame(raw).is_end


def test_checksum_is_xor():
    assert checksum(b"\x01\x02\x04") == 7


@pytest.mark.parametrize("frame", [Frame(0x10000, 0, 0), Frame(0, 0x10000, 0), Frame(0, 0, 128),
                                   Frame(-1, 0, 0), Frame(0, 0, -1), Frame(1, END_INDEX, 3)])
def test_field_range(frame):
    with pytest.raises(FieldRange):
        encode_frame(frame)


def test_decode_errors():
    good = encode_frame(Frame(3, 4, 5))
    with pytest.raises(FrameLength):
        decode_frame(good[:6])
    with pytest.raises(BadMagic):
        decode_frame(b"\x00" + good[1:])
    with pytest.raises(ChecksumMismatch):
        decode_frame(good[:6] + bytes([good[6] ^ 1]))
    bad_count = bytearray(good)
    bad_count[5] = 200
    bad_count[6] = checksum(bad_count[:6])
    with pytest.raises(CountRange):
        decode_frame(bytes(bad_count))


@settings(max_examples=1000, deadline=None)
@given(frames)
def test_codec_round_trip(frame):
    assert decode_frame(encode_frame(frame)) == frame


@settings(max_examples=300, deadline=None)
@given(frames, st.integers(min_value=0, max_value=6), st.integers(min_value=1, max_value=255))
def test_single_byte_corruption_is_rejected(frame, pos, flip):
    raw = bytearray(encode_frame(frame))
    raw[pos] ^= flip
    with pytest.raises(CodecError):
        decode_frame(bytes(raw))


def test_channel_timing_at_960_bytes_per_second():
    ch = SerialChannel(960)
    channel_send(ch, encode_frame(Frame(1, 2, 7)), 0)
    assert ch.next_ready() == Fraction(1000, 960)
    assert channel_poll(ch, 7) == b"\xa5\x00\x01\x00\x02\x07"  # 7 bytes need 7.29 ms
    assert channel_poll(ch, Fraction(7 * 1000, 960)) == b"\xa1"


def test_channel_preserves_order():
    ch = SerialChannel(960)
    a, b = encode_frame(Frame(1, 0, 1)), encode_frame(Frame(1, 1, 2))
    ch.send(a, 0)
    ch.send(b, 0)
    assert ch.poll(1000) == a + b


def test_full_buffer_is_busy_and_enqueues_nothing():
    ch = SerialChannel(960, buffer_bytes=14)
    ch.send(b"x" * 14, 0)
    with pytest.raises(ChannelBusy):
        ch.send(b"y" * 7, 0)
    assert ch.poll(10_000) == b"x" * 14
    assert ch.room_at(7, 0) is not None


def test_channel_rejects_bad_configuration():
    with pytest.raises(ValueError):
        SerialChannel(0)
    with pytest.raises(ValueError):
        SerialChannel(960, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 7)), min_size=1, max_size=30),
       st.integers(min_value=2, max_value=2000))
def test_slower_line_never_delivers_earlier(sends, bps):
    def ready_times(rate):
        ch = SerialChannel(rate, buffer_bytes=10_000)
        t = 0
        for gap, n in sends:
            t += gap
            ch.send(bytes(n), t)
        return [rt for rt, _ in ch._fifo]

    fast, slow = ready_times(bps), ready_times(max(1, bps // 2))
    assert all(s >= f for f, s in zip(fast, slow))


def test_reassembly_completes_on_end():
    r = Reassembler(2)
    assert r.feed(Frame(3, 1, 9)) is None
    assert r.feed(Frame(3, 0, 4)) is None
    s = r.feed(Frame.end(3))
    assert (s.epoch_seq, s.start_time, tuple(s.counters)) == (3, 3000, (4, 9))
    assert r.log.epochs == [3]


def test_reassembly_errors():
    r = Reassembler(2)
    r.feed(Frame(1, 0, 0))
    with pytest.raises(IncompleteSpectrum) as info:
        r.feed(Frame.end(1))
    assert info.value.missing == [1]
    with pytest.raises(ReassemblyError):
        r.feed(Frame(2, 5, 0))
    r.feed(Frame(2, 0, 1))
    r.feed(Frame(2, 1, 1))
    r.feed(Frame.end(2))
    with pytest.raises(EpochRegression):
        r.feed(Frame(2, 0, 1))


def test_receiver_handles_split_byte_stream():
    data = b"".join(encode_frame(f) for f in [Frame(0, 0, 5), Frame.end(0)])
    rx = Receiver(Reassembler(1))
    assert rx.feed_bytes(data[:3]) == []
    assert not rx.idle
    done = rx.feed_bytes(data[3:])
    assert [tuple(s.counters) for s in done] == [(5,)]
    assert rx.idle


@pytest.mark.parametrize("seed", range(20))
def test_random_schedules_are_lossless(seed):
    rng = random.Random(seed)
    sent, log, pool = run_schedule(random_schedule(rng), capacity=rng.randint(1, 5), seed=seed)
    assert [(s.epoch_seq, tuple(s.counters)) for s in log] == sent
    assert len(log) == pool.rotations + 1
