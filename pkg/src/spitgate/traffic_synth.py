"""Deterministic synthetic SIP + RTP calls with genuine and spam audio profiles.

All randomness comes from a 64-bit linear congruential generator
(state <- A * state + C mod 2**64, A = 6364136223846793005,
C = 1442695040888963407, uniform draws use the top 53 bits), so a given
(profile, seed) always produces the same capture bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .capture_io import CallCapture, Datagram, write_capture
from .rtp_media import PT_PCMU, RtpPacket, SAMPLE_RATE, encode_g711_ulaw
from .sip import SipMessage

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_MASK = (1 << 64) - 1

KINDS = ("genuine", "spam_signaling", "spam_continuous", "spam_silent")
SAMPLES_PER_PACKET = 160  # 20 ms
SIP_PORT = 5060
CALLEE_IP = "10.1.0.1"
BASE_EPOCH = 1_700_000_000

VOICED_AMPLITUDE = 0.25
CONTINUOUS_AMPLITUDE = 0.6
COMFORT_NOISE = 0.002
VOICED_NOISE = 0.02


class Lcg64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (LCG_A * self.state + LCG_C) & _MASK
        return self.state

    def random(self) -> float:
        return (self.next_u64() >> 11) / 2.0**53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbits(self, k: int) -> int:
        return self.next_u64() >> (64 - k)

    def random_array(self, n: int) -> np.ndarray:
        """n successive draws, identical to n calls of random()."""
        out = np.empty(n, dtype=np.uint64)
        mul, add = _jump_tables()
        block = len(mul)
        with np.errstate(over="ignore"):
            for start in range(0, n, block):
                k = min(block, n - start)
                s = np.uint64(self.state)
                out[start : start + k] = mul[:k] * s + add[:k]
                self.state = int(out[start + k - 1])
        return (out >> np.uint64(11)).astype(np.float64) / 2.0**53


_JUMP = None


def _jump_tables(block: int = 4096):
    # state_k = A^k * s + C * (A^(k-1) + ... + 1), all mod 2**64
    global _JUMP
    if _JUMP is None:
        mul, add = [], []
        a, c = 1, 0
        for _ in range(block):
            a = (a * LCG_A) & _MASK
            c = (c * LCG_A + LCG_C) & _MASK
            mul.append(a)
            add.append(c)
        _JUMP = (np.array(mul, dtype=np.uint64), np.array(add, dtype=np.uint64))
    return _JUMP


@dataclass(frozen=True)
class CallProfile:
    kind: str
    seed: int
    duration: float = 10.0
    talk: float = 1.2  # mean talk-spurt length, seconds
    silence: float = 0.8  # mean pause length, seconds
    display: str | None = None
    user: str | None = None
    host: str | None = None
    source_ip: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.duration <= 0 or self.talk <= 0 or self.silence <= 0:
            raise ValueError("duration and periods must be > 0")

    @property
    def label(self) -> str:
        return "genuine" if self.kind == "genuine" else "spam"

    @property
    def call_id(self) -> str:
        return f"{self.kind}-{self.seed}@synth.invalid"

    def identity(self) -> dict[str, str]:
        if self.kind == "spam_signaling":
            ident = {"display": "Anonymous", "user": "anonymous", "host": "anonymous.net"}
        else:
            ident = {"display": f"Caller {self.seed}", "user": f"user{self.seed}", "host": "example.org"}
        ident["source_ip"] = f"10.0.{(self.seed >> 8) & 0xFF}.{(self.seed & 0xFF) or 1}"
        for key in ident:
            if getattr(self, key) is not None:
                ident[key] = getattr(self, key)
        return ident


def voiced_spans(profile: CallProfile) -> list[tuple[int, int]]:
    """Sample ranges [start, end) that carry voice; everything else is near-silent."""
    n = int(round(profile.duration * SAMPLE_RATE))
    if profile.kind == "spam_continuous":
        return [(0, n)]
    if profile.kind == "spam_silent":
        return [(0, min(n, int(round(profile.talk * SAMPLE_RATE))))]
    rng = Lcg64(profile.seed ^ 0x5EED)
    spans, pos, talking = [], 0, True
    while pos < n:
        mean = profile.talk if talking else profile.silence
        length = max(1, int(round(mean * rng.uniform(0.75, 1.25) * SAMPLE_RATE)))
        end = min(n, pos + length)
        if talking:
            spans.append((pos, end))
        pos, talking = end, not talking
    return spans


def synth_audio(profile: CallProfile) -> np.ndarray:
    n = int(round(profile.duration * SAMPLE_RATE))
    rng = Lcg64(profile.seed)
    f1 = rng.uniform(150.0, 260.0)
    f2 = rng.uniform(600.0, 1200.0)
    p1 = rng.uniform(0.0, 2 * math.pi)
    p2 = rng.uniform(0.0, 2 * math.pi)
    t = np.arange(n) / SAMPLE_RATE
    tone = 0.6 * np.sin(2 * math.pi * f1 * t + p1) + 0.4 * np.sin(2 * math.pi * f2 * t + p2)
    noise = 2.0 * rng.random_array(n) - 1.0

    x = COMFORT_NOISE * noise
    for start, end in voiced_spans(profile):
        if profile.kind == "spam_continuous":
            amp = CONTINUOUS_AMPLITUDE
        else:
            amp = VOICED_AMPLITUDE * rng.uniform(0.75, 1.25)
        x[start:end] = amp * tone[start:end] + VOICED_NOISE * noise[start:end]
    return np.clip(x, -1.0, 1.0)


def _ts(seconds: float) -> tuple[int, int]:
    usec = int(round(seconds * 1e6))
    return BASE_EPOCH + usec // 1_000_000, usec % 1_000_000


def _media_ports(profile: CallProfile) -> tuple[int, int]:
    slot = (profile.seed * len(KINDS) + KINDS.index(profile.kind)) % 4000
    return 16000 + 2 * slot, 26000 + 2 * slot


def _sdp(ip: str, port: int, session: int) -> bytes:
    return (
        f"v=0\r\no=- {session} {session} IN IP4 {ip}\r\ns=-\r\nc=IN IP4 {ip}\r\n"
        f"t=0 0\r\nm=audio {port} RTP/AVP 0\r\na=rtpmap:0 PCMU/8000\r\n"
    ).encode()


def _sip_messages(profile: CallProfile, caller_port: int, callee_port: int, branch: int):
    ident = profile.identity()
    caller_ip = ident["source_ip"]
    display = ident["display"]
    from_hdr = f'"{display}" <sip:{ident["user"]}@{ident["host"]}>;tag={branch & 0xFFFFFF:x}'
    to_hdr = f"<sip:callee@{CALLEE_IP}>"
    via = f"SIP/2.0/UDP {caller_ip}:{SIP_PORT};branch=z9hG4bK{branch:x}"
    common = [("Via", via), ("Max-Forwards", "70"), ("From", from_hdr), ("To", to_hdr),
              ("Call-ID", profile.call_id)]
    offer = _sdp(caller_ip, caller_port, branch & 0xFFFF)
    answer = _sdp(CALLEE_IP, callee_port, (branch >> 16) & 0xFFFF)
    to_tagged = f"{to_hdr};tag=b{profile.seed:x}"

    def request(method, cseq, extra=(), body=b"", to=to_hdr):
        headers = [(n, to if n == "To" else v) for n, v in common] + [("CSeq", f"{cseq} {method}")]
        headers += list(extra) + [("Content-Length", str(len(body)))]
        return SipMessage("request", method=method, request_uri=f"sip:callee@{CALLEE_IP}",
                          headers=headers, body=body)

    def response(status, reason, cseq, body=b"", extra=()):
        headers = [(n, to_tagged if n == "To" else v) for n, v in common if n != "Max-Forwards"]
        headers += [("CSeq", cseq)] + list(extra) + [("Content-Length", str(len(body)))]
        return SipMessage("response", status=status, reason=reason, headers=headers, body=body)

    invite = request("INVITE", 1, [
        ("Contact", f"<sip:{ident['user']}@{caller_ip}:{SIP_PORT}>"),
        ("Subject", "Call"),
        ("Content-Type", "application/sdp"),
    ], offer)
    return [
        ("caller", 0.00, invite),
        ("callee", 0.05, response(180, "Ringing", "1 INVITE")),
        ("callee", 1.00, response(200, "OK", "1 INVITE", answer, [
            ("Contact", f"<sip:callee@{CALLEE_IP}:{SIP_PORT}>"),
            ("Content-Type", "application/sdp")])),
        ("caller", 1.02, request("ACK", 1, to=to_tagged)),
        ("caller", 1.10 + profile.duration + 0.10, request("BYE", 2, to=to_tagged)),
        ("callee", 1.10 + profile.duration + 0.15, response(200, "OK", "2 BYE")),
    ]


def synth_call(profile: CallProfile) -> CallCapture:
    caller_ip = profile.identity()["source_ip"]
    caller_port, callee_port = _media_ports(profile)
    rng = Lcg64(profile.seed ^ 0xC0FFEE)
    branch = rng.randbits(48)
    ssrc = rng.randbits(32)
    seq0 = rng.randbits(16)
    ts0 = rng.randbits(32)
    offset = (profile.seed % 1000) * 0.01

    capture = CallCapture(profile.call_id)
    for side, at, msg in _sip_messages(profile, caller_port, callee_port, branch):
        src, dst = (caller_ip, CALLEE_IP) if side == "caller" else (CALLEE_IP, caller_ip)
        capture.sip_messages.append(
            Datagram(*_ts(offset + at), src, SIP_PORT, dst, SIP_PORT, msg.render()))

    audio = synth_audio(profile)
    payload = encode_g711_ulaw(audio)
    for i in range(0, len(payload), SAMPLES_PER_PACKET):
        k = i // SAMPLES_PER_PACKET
        pkt = RtpPacket(PT_PCMU, (seq0 + k) & 0xFFFF, (ts0 + i) & 0xFFFFFFFF, ssrc,
                        payload[i : i + SAMPLES_PER_PACKET], marker=(k == 0))
        capture.rtp_packets.append(Datagram(
            *_ts(offset + 1.10 + k * SAMPLES_PER_PACKET / SAMPLE_RATE),
            caller_ip, caller_port, CALLEE_IP, callee_port, pkt.to_bytes()))
    return capture


def capture_datagrams(*captures: CallCapture) -> list[Datagram]:
    """All datagrams of the given calls merged in timestamp order."""
    items = [d for c in captures for d in c.sip_messages + c.rtp_packets]
    return sorted(items, key=lambda d: d.ts_key)


def parse_spec_line(line: str) -> CallProfile:
    """``kind|seed|duration|key=value...`` with keys talk, silence, display, user, host, source_ip."""
    parts = [p.strip() for p in line.split("|")]
    if len(parts) < 2:
        raise ValueError(f"malformed profile line {line!r}")
    kwargs = {"kind": parts[0], "seed": int(parts[1])}
    if len(parts) > 2 and parts[2]:
        kwargs["duration"] = float(parts[2])
    for item in parts[3:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        if key in ("talk", "silence"):
            kwargs[key] = float(value)
        elif key in ("display", "user", "host", "source_ip"):
            kwargs[key] = value
        else:
            raise ValueError(f"unknown profile parameter {key!r}")
    return CallProfile(**kwargs)


def read_spec_file(path) -> list[CallProfile]:
    profiles = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            profiles.append(parse_spec_line(line))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return profiles


MANIFEST_NAME = "manifest.txt"
MANIFEST_HEADER = (
    "# spitgate synthetic corpus: path|kind|seed\n"
    f"# rng: 64-bit LCG state = ({LCG_A} * state + {LCG_C}) mod 2^64\n"
)


def synth_corpus(profiles, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths, rows = [], []
    for i, profile in enumerate(profiles):
        name = f"{i:03d}_{profile.kind}_{profile.seed}.pcap"
        write_capture(capture_datagrams(synth_call(profile)), out_dir / name)
        paths.append(out_dir / name)
        rows.append(f"{name}|{profile.kind}|{profile.seed}\n")
    (out_dir / MANIFEST_NAME).write_text(MANIFEST_HEADER + "".join(rows), encoding="utf-8")
    return paths


def read_manifest(path) -> list[tuple[Path, str, int]]:
    """Rows of (capture path, profile kind, seed); paths resolved against the manifest's folder."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    rows = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        if not raw.strip() or raw.startswith("#"):
            continue
        name, kind, seed = raw.split("|")
        rows.append((path.parent / name, kind, int(seed)))
    return rows


def default_corpus(per_kind: int = 1, seeds=None) -> list[CallProfile]:
    seeds = list(seeds) if seeds is not None else list(range(1, per_kind + 1))
    return [CallProfile(kind, s) for kind in KINDS for s in seeds]


def measured_abs_mean(profile: CallProfile) -> float:
    """Raw (unscaled) absolute mean of a profile's audio after the mu-law round trip."""
    from .g711 import decode_g711_ulaw

    return float(np.mean(np.abs(decode_g711_ulaw(encode_g711_ulaw(synth_audio(profile))))))


def calibration_scale(seeds=(1, 2, 3, 4), table=None) -> float:
    """Calibration scale from labeled genuine synth calls (the default uses four, one per genuine prototype)."""
    from .classify_media import PrototypeTable, calibrate_scale

    table = table or PrototypeTable()
    return calibrate_scale([measured_abs_mean(CallProfile("genuine", s)) for s in seeds], table)


def with_identity(profile: CallProfile, **identity) -> CallProfile:
    return replace(profile, **identity)
