import random
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spitgate.g711 import (
    ALAW_SCALE,
    ULAW_SCALE,
    decode_g711_alaw,
    decode_g711_ulaw,
    encode_g711_alaw,
    encode_g711_ulaw,
    linear14_to_ulaw,
    ulaw_to_linear14,
)
from spitgate.rtp_media import (
    RtpPacket,
    RtpParseError,
    parse_rtp,
    reassemble,
    stream_from,
)


# Independent oracles: reconstruction values are the midpoints of the G.711
# decision intervals (segment edges and step sizes from the standard's tables).
def ulaw_oracle():
    table = {}
    lower = -1  # first interval is [-1, 1], reconstructed as 0
    for seg in range(8):
        step = 2 ** (seg + 1)
        for m in range(16):
            level = seg * 16 + m
            value = lower + (m + 0.5) * step
            table[0xFF - level] = value
            table[0x7F - level] = -value
        lower += 16 * step
    assert lower == 8159
    return table


def alaw_oracle():
    table = {}
    for seg in range(8):
        lower, step = (0, 2) if seg == 0 else (32, 2) if seg == 1 else (2 ** (seg + 4), 2 ** seg)
        for m in range(16):
            value = lower + (m + 0.5) * step
            code = (seg << 4) | m
            table[(0x80 | code) ^ 0x55] = value
            table[code ^ 0x55] = -value
    return table


ULAW = ulaw_oracle()
ALAW = alaw_oracle()


def test_ulaw_matches_oracle_all_256():
    got = ulaw_to_linear14(bytes(range(256)))
    assert [int(v) for v in got] == [ULAW[b] for b in range(256)]
    np.testing.assert_array_equal(decode_g711_ulaw(bytes(range(256))),
                                  np.array([ULAW[b] for b in range(256)]) / ULAW_SCALE)


def test_ulaw_matches_audioop():
    audioop = pytest.importorskip("audioop")
    ref = struct.unpack("<256h", audioop.ulaw2lin(bytes(range(256)), 2))
    assert [v // 4 for v in ref] == [int(v) for v in ulaw_to_linear14(bytes(range(256)))]


def test_ulaw_named_points():
    assert decode_g711_ulaw(b"\xff")[0] == 0.0
    assert decode_g711_ulaw(b"\x7f")[0] == 0.0
    low = decode_g711_ulaw(b"\x00")[0]
    assert low == decode_g711_ulaw(bytes(range(256))).min()
    assert ulaw_to_linear14(b"\x00")[0] == -8031
    assert low == pytest.approx(-8031 / 8159)


def test_ulaw_reencode_identity():
    decoded = ulaw_to_linear14(bytes(range(256)))
    back = linear14_to_ulaw(decoded)
    for b in range(256):
        expected = 0xFF if b == 0x7F else b  # negative zero folds to positive zero
        assert back[b] == expected
    assert encode_g711_ulaw(decode_g711_ulaw(bytes(range(256)))) == back


def test_alaw_matches_oracle_and_round_trips():
    got = decode_g711_alaw(bytes(range(256))) * ALAW_SCALE
    assert list(got) == [ALAW[b] for b in range(256)]
    assert np.abs(decode_g711_alaw(bytes(range(256)))).max() == 1.0
    assert encode_g711_alaw(decode_g711_alaw(bytes(range(256)))) == bytes(range(256))


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=200))
def test_decoded_samples_in_range(xs):
    for codec in ((encode_g711_ulaw, decode_g711_ulaw), (encode_g711_alaw, decode_g711_alaw)):
        y = codec[1](codec[0](xs))
        assert np.all(np.abs(y) <= 1.0)
        assert len(y) == len(xs)


def test_ulaw_encode_quantizes_to_nearest_level():
    x = np.linspace(-1, 1, 2001)
    err = np.abs(decode_g711_ulaw(encode_g711_ulaw(x)) - x)
    # worst error is half the top segment step (256 / 2) plus clipping beyond 8159
    assert err.max() <= 129 / ULAW_SCALE


def test_parse_minimal_packet():
    p = parse_rtp(struct.pack("!BBHII", 0x80, 0, 7, 0, 1))
    assert (p.version, p.payload_type, p.sequence, len(p.payload)) == (2, 0, 7, 0)


def test_parse_bad_version():
    with pytest.raises(RtpParseError, match="version"):
        parse_rtp(b"\x00" + bytes(11))


def test_parse_too_short():
    with pytest.raises(RtpParseError, match="short"):
        parse_rtp(b"\x80\x00")


def test_parse_csrc():
    data = struct.pack("!BBHIII", 0x81, 8, 1, 2, 3, 0xDEADBEEF) + b"abcd"
    assert len(data) == 20
    p = parse_rtp(data)
    assert p.csrcs == (0xDEADBEEF,) and p.payload == b"abcd"


def test_parse_csrc_overflow():
    with pytest.raises(RtpParseError, match="CSRC"):
        parse_rtp(struct.pack("!BBHII", 0x8F, 0, 1, 2, 3) + bytes(8))


def test_parse_padding_and_extension():
    ext = struct.pack("!HH", 0xBEDE, 1) + b"\x00" * 4
    data = struct.pack("!BBHII", 0xB0, 0x80, 9, 1, 2) + ext + b"pay" + b"\x00\x00\x03"
    p = parse_rtp(data)
    assert p.payload == b"pay" and p.marker
    with pytest.raises(RtpParseError, match="padding"):
        parse_rtp(struct.pack("!BBHII", 0xA0, 0, 1, 2, 3) + b"\x20")


@given(st.integers(0, 127), st.integers(0, 65535), st.integers(0, 2**32 - 1),
       st.integers(0, 2**32 - 1), st.binary(max_size=64), st.booleans())
def test_rtp_render_parse_round_trip(pt, seq, ts, ssrc, payload, marker):
    p = RtpPacket(pt, seq, ts, ssrc, payload, marker)
    assert parse_rtp(p.to_bytes()) == p


def _pk(seq, ssrc=1, payload=b"\xff" * 4):
    return RtpPacket(0, seq, seq * 160, ssrc, payload)


def _seqs(packets):
    return [p.sequence for p in packets]


def test_reassemble_sorts():
    (s,) = reassemble([_pk(3), _pk(1), _pk(2)]).values()
    assert _seqs(s.packets) == [1, 2, 3] and s.gaps == [] and s.duplicates == 0


def test_reassemble_wraparound():
    (s,) = reassemble([_pk(0), _pk(65535), _pk(1), _pk(65534)]).values()
    assert _seqs(s.packets) == [65534, 65535, 0, 1]


def test_reassemble_duplicates_keep_first():
    first, second = _pk(5, payload=b"a"), _pk(5, payload=b"b")
    (s,) = reassemble([first, second]).values()
    assert s.packets == [first] and s.duplicates == 1


def test_reassemble_gaps_and_ssrc_grouping():
    streams = reassemble([_pk(1), _pk(4), _pk(65535, ssrc=2), _pk(1, ssrc=2)])
    assert streams[1].gaps == [2, 3]
    assert _seqs(streams[2].packets) == [65535, 1]
    assert streams[2].gaps == [0]


@given(st.integers(0, 65535), st.integers(1, 300), st.randoms(use_true_random=False))
def test_reassemble_permutation_invariant_and_idempotent(start, n, rnd):
    packets = [_pk((start + i) & 0xFFFF) for i in range(n)]
    shuffled = packets[:]
    rnd.shuffle(shuffled)
    (a,) = reassemble(packets).values()
    (b,) = reassemble(shuffled).values()
    assert a.packets == b.packets == packets
    (c,) = reassemble(a.packets).values()
    assert c.packets == a.packets


def test_stream_from_concatenates():
    packets = [RtpPacket(0, i, i * 160, 9, bytes(range(160))) for i in range(2)]
    s = stream_from(packets)
    assert len(s.samples) == 320 and s.boundaries == [0, 160]
    np.testing.assert_array_equal(s.samples[:160], decode_g711_ulaw(bytes(range(160))))


def test_stream_from_unsupported_payload_type():
    with pytest.raises(ValueError, match="unsupported payload type"):
        stream_from([RtpPacket(99, 1, 0, 9, b"\x00")])


def test_stream_from_silence_payload():
    s = stream_from([RtpPacket(0, i, 0, 9, b"\xff" * 160) for i in range(3)])
    assert not s.samples.any()


def test_stream_from_alaw_and_gaps():
    rnd = random.Random(3)
    payload = bytes(rnd.randrange(256) for _ in range(80))
    (rs,) = reassemble([RtpPacket(8, 1, 0, 4, payload), RtpPacket(8, 3, 0, 4, payload)]).values()
    s = stream_from(rs)
    assert s.gaps == 1 and len(s.samples) == 160 and s.boundaries == [0, 80]
    assert np.all(np.abs(s.samples) <= 1)
