"""RTP parsing, per-SSRC reassembly and G.711 stream decoding."""

from __future__ import annotations

import logging
import struct
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .g711 import decode_g711_alaw, decode_g711_ulaw, encode_g711_ulaw  # noqa: F401

log = logging.getLogger(__name__)

RTP_HEADER_LEN = 12
SAMPLE_RATE = 8000
PT_PCMU = 0
PT_PCMA = 8
DECODERS = {PT_PCMU: decode_g711_ulaw, PT_PCMA: decode_g711_alaw}

# sequence numbers at or above WRAP_HIGH together with ones at or below
# WRAP_LOW mean the stream wrapped past 65535
WRAP_HIGH = 65400
WRAP_LOW = 135


class RtpParseError(ValueError):
    pass


@dataclass(frozen=True)
class RtpPacket:
    payload_type: int
    sequence: int
    timestamp: int
    ssrc: int
    payload: bytes = b""
    marker: bool = False
    csrcs: tuple[int, ...] = ()
    version: int = 2

    def to_bytes(self) -> bytes:
        first = (self.version << 6) | len(self.csrcs)
        second = (int(self.marker) << 7) | self.payload_type
        head = struct.pack("!BBHII", first, second, self.sequence, self.timestamp, self.ssrc)
        return head + b"".join(struct.pack("!I", c) for c in self.csrcs) + self.payload


def parse_rtp(data: bytes) -> RtpPacket:
    if len(data) < RTP_HEADER_LEN:
        raise RtpParseError(f"RTP packet too short: {len(data)} bytes")
    first, second, seq, ts, ssrc = struct.unpack("!BBHII", data[:RTP_HEADER_LEN])
    version = first >> 6
    if version != 2:
        raise RtpParseError(f"RTP version {version} != 2")
    padding = bool(first & 0x20)
    extension = bool(first & 0x10)
    cc = first & 0x0F
    offset = RTP_HEADER_LEN + 4 * cc
    if offset > len(data):
        raise RtpParseError(f"CSRC count {cc} exceeds packet length {len(data)}")
    csrcs = struct.unpack(f"!{cc}I", data[RTP_HEADER_LEN:offset])
    if extension:
        if offset + 4 > len(data):
            raise RtpParseError("extension header exceeds packet length")
        (words,) = struct.unpack("!H", data[offset + 2 : offset + 4])
        offset += 4 + 4 * words
        if offset > len(data):
            raise RtpParseError("extension header exceeds packet length")
    end = len(data)
    if padding:
        pad = data[-1]
        if pad == 0 or end - pad < offset:
            raise RtpParseError(f"padding {pad} exceeds packet length")
        end -= pad
    return RtpPacket(
        payload_type=second & 0x7F,
        sequence=seq,
        timestamp=ts,
        ssrc=ssrc,
        payload=bytes(data[offset:end]),
        marker=bool(second & 0x80),
        csrcs=tuple(csrcs),
        version=version,
    )


@dataclass
class RtpStream:
    ssrc: int
    packets: list[RtpPacket] = field(default_factory=list)
    gaps: list[int] = field(default_factory=list)  # missing sequence numbers
    duplicates: int = 0


def _extended(seqs) -> dict[int, int]:
    wrapped = any(s >= WRAP_HIGH for s in seqs) and any(s <= WRAP_LOW for s in seqs)
    return {s: s + 65536 if wrapped and s < 32768 else s for s in seqs}


def reassemble(packets) -> dict[int, RtpStream]:
    """Group by SSRC and order by (wrap-aware) sequence number."""
    by_ssrc: dict[int, dict[int, RtpPacket]] = defaultdict(dict)
    dups: dict[int, int] = defaultdict(int)
    for p in packets:
        seen = by_ssrc[p.ssrc]
        if p.sequence in seen:
            dups[p.ssrc] += 1
        else:
            seen[p.sequence] = p

    streams = {}
    for ssrc in sorted(by_ssrc):
        seen = by_ssrc[ssrc]
        ext = _extended(seen)
        order = sorted(seen, key=ext.__getitem__)
        gaps = []
        for a, b in zip(order, order[1:]):
            gaps.extend(s & 0xFFFF for s in range(ext[a] + 1, ext[b]))
        streams[ssrc] = RtpStream(ssrc, [seen[s] for s in order], gaps, dups[ssrc])
    return streams


@dataclass
class MediaStream:
    ssrc: int
    samples: np.ndarray
    boundaries: list[int]
    sample_rate: int = SAMPLE_RATE
    payload_type: int = PT_PCMU
    gaps: int = 0

    @property
    def packet_count(self) -> int:
        return len(self.boundaries)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def stream_from(packets, gaps=()) -> MediaStream:
    """Decode sequence-ordered packets of one SSRC into a normalized stream."""
    if isinstance(packets, RtpStream):
        packets, gaps = packets.packets, packets.gaps
    packets = list(packets)
    if not packets:
        return MediaStream(0, np.zeros(0), [])
    ssrc, pt = packets[0].ssrc, packets[0].payload_type
    if pt not in DECODERS:
        raise ValueError(f"unsupported payload type {pt}")
    decode = DECODERS[pt]
    chunks, boundaries, pos = [], [], 0
    for p in packets:
        if p.ssrc != ssrc:
            raise ValueError(f"mixed SSRCs {ssrc:#x} and {p.ssrc:#x}")
        if p.payload_type != pt:
            raise ValueError(f"unsupported payload type {p.payload_type} in a PT {pt} stream")
        if not p.payload:
            continue
        boundaries.append(pos)
        chunk = decode(p.payload)
        chunks.append(chunk)
        pos += len(chunk)
    if gaps:
        log.debug("ssrc %#x: %d missing packets not concealed", ssrc, len(gaps))
    samples = np.concatenate(chunks) if chunks else np.zeros(0)
    return MediaStream(ssrc, samples, boundaries, payload_type=pt, gaps=len(gaps))
