"""Classic pcap reading/writing and per-call grouping of UDP datagrams."""

from __future__ import annotations

import os
import socket
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

PCAP_MAGIC = 0xA1B2C3D4
PCAP_GLOBAL_HEADER_LEN = 24
PCAP_RECORD_HEADER_LEN = 16
LINKTYPE_ETHERNET = 1
SNAPLEN = 65535

ETH_HEADER_LEN = 14
IPV4_HEADER_LEN = 20
UDP_HEADER_LEN = 8
ETHERTYPE_IPV4 = 0x0800
IPPROTO_UDP = 17

_SRC_MAC = bytes.fromhex("020000000001")
_DST_MAC = bytes.fromhex("020000000002")


class CaptureError(ValueError):
    pass


@dataclass(frozen=True)
class Datagram:
    ts_sec: int
    ts_usec: int
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    payload: bytes

    def __post_init__(self):
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise ValueError(f"port out of range: {port}")
        if not 0 <= self.ts_usec < 1_000_000:
            raise ValueError(f"ts_usec out of range: {self.ts_usec}")

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6

    @property
    def ts_key(self) -> tuple[int, int]:
        return (self.ts_sec, self.ts_usec)


class Datagrams(list):
    """List of datagrams read from a capture; ``skipped`` counts non-UDP frames."""

    def __init__(self, items=(), skipped: int = 0):
        super().__init__(items)
        self.skipped = skipped


@dataclass
class CallCapture:
    call_id: str
    sip_messages: list[Datagram] = field(default_factory=list)
    rtp_packets: list[Datagram] = field(default_factory=list)


class CallGroups(list):
    """List of CallCapture; ``orphans`` holds datagrams that matched no call."""

    def __init__(self, items=(), orphans=()):
        super().__init__(items)
        self.orphans = list(orphans)

    @property
    def orphan_count(self) -> int:
        return len(self.orphans)


def read_capture(path) -> Datagrams:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise CaptureError(f"{path}: bad magic number (file too short)")
    magic_le = struct.unpack("<I", data[:4])[0]
    if magic_le == PCAP_MAGIC:
        endian = "<"
    elif struct.unpack(">I", data[:4])[0] == PCAP_MAGIC:
        endian = ">"
    else:
        raise CaptureError(f"{path}: bad magic number 0x{magic_le:08x}")
    if len(data) < PCAP_GLOBAL_HEADER_LEN:
        raise CaptureError(f"{path}: truncated global header at offset 0")
    _, _major, _minor, _zone, _sigfigs, _snaplen, linktype = struct.unpack(
        endian + "IHHiIII", data[:PCAP_GLOBAL_HEADER_LEN]
    )
    if linktype != LINKTYPE_ETHERNET:
        raise CaptureError(f"{path}: unsupported link type {linktype}")

    out = Datagrams()
    offset = PCAP_GLOBAL_HEADER_LEN
    while offset < len(data):
        if offset + PCAP_RECORD_HEADER_LEN > len(data):
            raise CaptureError(f"{path}: truncated record header at offset {offset}")
        ts_sec, ts_usec, incl_len, _orig_len = struct.unpack(
            endian + "IIII", data[offset : offset + PCAP_RECORD_HEADER_LEN]
        )
        start = offset + PCAP_RECORD_HEADER_LEN
        if start + incl_len > len(data):
            raise CaptureError(f"{path}: truncated record at offset {offset}")
        frame = data[start : start + incl_len]
        offset = start + incl_len
        dgram = _decode_frame(frame, ts_sec, ts_usec)
        if dgram is None:
            out.skipped += 1
        else:
            out.append(dgram)
    return out


def _decode_frame(frame: bytes, ts_sec: int, ts_usec: int) -> Datagram | None:
    """Decode Ethernet/IPv4/UDP; None for anything else (including fragments)."""
    if len(frame) < ETH_HEADER_LEN + IPV4_HEADER_LEN:
        return None
    (ethertype,) = struct.unpack("!H", frame[12:14])
    if ethertype != ETHERTYPE_IPV4:
        return None
    ip = frame[ETH_HEADER_LEN:]
    version_ihl = ip[0]
    if version_ihl >> 4 != 4:
        return None
    ihl = (version_ihl & 0x0F) * 4
    if ihl < IPV4_HEADER_LEN or len(ip) < ihl:
        return None
    total_len, flags_frag = struct.unpack("!H2xH", ip[2:8])
    if flags_frag & 0x2000 or flags_frag & 0x1FFF:
        return None
    if ip[9] != IPPROTO_UDP:
        return None
    src_ip = socket.inet_ntoa(ip[12:16])
    dst_ip = socket.inet_ntoa(ip[16:20])
    udp = ip[ihl:total_len] if total_len >= ihl else ip[ihl:]
    if len(udp) < UDP_HEADER_LEN:
        return None
    src_port, dst_port, udp_len = struct.unpack("!HHH", udp[:6])
    if udp_len < UDP_HEADER_LEN or udp_len > len(udp):
        return None
    return Datagram(ts_sec, ts_usec, src_ip, src_port, dst_ip, dst_port,
                    bytes(udp[UDP_HEADER_LEN:udp_len]))


def _ipv4_checksum(header: bytes) -> int:
    total = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def encode_frame(d: Datagram, ident: int = 0) -> bytes:
    udp_len = UDP_HEADER_LEN + len(d.payload)
    total_len = IPV4_HEADER_LEN + udp_len
    if total_len > 0xFFFF:
        raise CaptureError(f"payload too large for one IPv4 datagram: {len(d.payload)}")
    ip = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, total_len, ident & 0xFFFF, 0, 64, IPPROTO_UDP, 0,
        socket.inet_aton(d.src_ip), socket.inet_aton(d.dst_ip),
    )
    ip = ip[:10] + struct.pack("!H", _ipv4_checksum(ip)) + ip[12:]
    udp = struct.pack("!HHHH", d.src_port, d.dst_port, udp_len, 0)
    eth = _DST_MAC + _SRC_MAC + struct.pack("!H", ETHERTYPE_IPV4)
    return eth + ip + udp + d.payload


def capture_bytes(datagrams) -> bytes:
    chunks = [struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, SNAPLEN, LINKTYPE_ETHERNET)]
    prev = None
    for i, d in enumerate(datagrams):
        if prev is not None and d.ts_key < prev:
            raise CaptureError(f"timestamps decrease at datagram {i}")
        prev = d.ts_key
        frame = encode_frame(d, ident=i)
        chunks.append(struct.pack("<IIII", d.ts_sec, d.ts_usec, len(frame), len(frame)))
        chunks.append(frame)
    return b"".join(chunks)


def write_capture(datagrams, path) -> None:
    blob = capture_bytes(datagrams)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def media_ports(body: bytes) -> list[int]:
    """Ports of every ``m=audio`` line in a session description body."""
    ports = []
    for line in body.decode("utf-8", "replace").splitlines():
        if line.startswith("m=audio"):
            parts = line.split()
            if len(parts) >= 2 and parts[1].isdigit():
                ports.append(int(parts[1]))
    return ports


def group_calls(datagrams, sip_port: int = 5060) -> CallGroups:
    from .sip import SipParseError, parse_message

    calls: dict[str, CallCapture] = {}
    endpoints: dict[tuple[str, int], str] = {}
    hosts: dict[str, set[str]] = defaultdict(set)
    orphans = []
    media = []

    for d in datagrams:
        if sip_port not in (d.src_port, d.dst_port):
            media.append(d)
            continue
        try:
            msg = parse_message(d.payload)
        except SipParseError:
            orphans.append(d)
            continue
        call_id = msg.header("Call-ID")
        if not call_id:
            orphans.append(d)
            continue
        call = calls.get(call_id)
        if call is None:
            call = calls[call_id] = CallCapture(call_id)
        call.sip_messages.append(d)
        hosts[call_id].update((d.src_ip, d.dst_ip))
        for port in media_ports(msg.body):
            endpoints.setdefault((d.src_ip, port), call_id)

    for d in media:
        call_id = endpoints.get((d.dst_ip, d.dst_port)) or endpoints.get((d.src_ip, d.src_port))
        if call_id is None:
            call_id = _fallback_call(d, calls, hosts, endpoints)
        if call_id is None:
            orphans.append(d)
        else:
            calls[call_id].rtp_packets.append(d)

    for call in calls.values():
        call.sip_messages.sort(key=lambda x: x.ts_key)
        call.rtp_packets.sort(key=lambda x: x.ts_key)
    return CallGroups(calls.values(), orphans)


def _fallback_call(d, calls, hosts, endpoints):
    # only calls that never advertised a media port are eligible
    advertised = set(endpoints.values())
    if d.src_port % 2 and d.dst_port % 2:
        return None
    pair = {d.src_ip, d.dst_ip}
    for call_id in calls:
        if call_id not in advertised and pair <= hosts[call_id]:
            return call_id
    return None
