"""The two-layer firewall: signaling first, media only for calls that pass."""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .capture_io import CallCapture, group_calls, read_capture
from .classify_media import (
    GENUINE,
    MediaRuleParams,
    PrototypeTable,
    classify_media,
    load_prototypes,
)
from .classify_signaling import SPAM, LayerVerdict, classify_signaling
from .features import FrameSpec
from .rtp_media import RtpParseError, parse_rtp, reassemble, stream_from
from .sip import SipParseError, extract_invite, parse_message
from .spam_db import PatternStore, load


def default_patterns_path() -> Path:
    return Path(resources.files("spitgate") / "data" / "patterns.txt")


def default_prototypes_path(calibrated: bool = True) -> Path:
    name = "prototypes_calibrated.txt" if calibrated else "prototypes.txt"
    return Path(resources.files("spitgate") / "data" / name)


def default_store() -> PatternStore:
    return load(default_patterns_path())


def default_table() -> PrototypeTable:
    return load_prototypes(default_prototypes_path())


class NoInviteError(ValueError):
    pass


@dataclass
class Verdict:
    call_id: str
    layer1: LayerVerdict
    layer2: LayerVerdict | None
    final: str  # "spam" | "genuine"
    decoded_packets: int = 0

    def __post_init__(self):
        if self.layer1.is_spam:
            if self.layer2 is not None or self.final != SPAM:
                raise ValueError("layer-1 spam must short-circuit to a final spam verdict")
        elif self.layer2 is None or self.final != (SPAM if self.layer2.is_spam else GENUINE):
            raise ValueError("layer-1 pass must take the layer-2 decision")

    @property
    def layer1_elapsed(self) -> float:
        return self.layer1.elapsed

    @property
    def layer2_elapsed(self) -> float | None:
        return self.layer2.elapsed if self.layer2 else None

    @property
    def reasons(self) -> list[str]:
        return self.layer1.reasons + (self.layer2.reasons if self.layer2 else [])


@dataclass
class Settings:
    combination: str = "any"
    params: MediaRuleParams = field(default_factory=MediaRuleParams)
    spec: FrameSpec = field(default_factory=FrameSpec)


def first_invite(capture: CallCapture):
    for d in capture.sip_messages:
        try:
            msg = parse_message(d.payload)
        except SipParseError:
            continue
        if msg.kind == "request" and msg.method.upper() == "INVITE":
            return msg, d.src_ip
    raise NoInviteError(f"call {capture.call_id}: no INVITE in capture")


def caller_stream(capture: CallCapture, caller_ip: str):
    """RTP stream sent by the caller (largest one if several); None without media."""
    packets, sources = [], {}
    for d in capture.rtp_packets:
        try:
            p = parse_rtp(d.payload)
        except RtpParseError:
            continue
        packets.append(p)
        sources.setdefault(p.ssrc, d.src_ip)
    streams = reassemble(packets)
    if not streams:
        return None, 0
    best = max(streams.values(), key=lambda s: (sources[s.ssrc] == caller_ip, len(s.packets), -s.ssrc))
    return stream_from(best), len(best.packets)


def analyze_call(capture: CallCapture, store: PatternStore, table: PrototypeTable,
                 settings: Settings = Settings()) -> Verdict:
    start = time.perf_counter()
    msg, src_ip = first_invite(capture)
    record = extract_invite(msg, src_ip)
    layer1 = classify_signaling(record, store, settings.combination)
    layer1.elapsed = time.perf_counter() - start
    if layer1.is_spam:
        return Verdict(capture.call_id, layer1, None, SPAM, decoded_packets=0)

    start = time.perf_counter()
    stream, decoded = caller_stream(capture, src_ip)
    if stream is None:
        layer2 = LayerVerdict(SPAM if settings.params.fail_closed else "pass", ["insufficient media"])
    else:
        layer2 = classify_media(stream, table, settings.params, settings.spec)
    layer2.elapsed = time.perf_counter() - start
    return Verdict(capture.call_id, layer1, layer2, SPAM if layer2.is_spam else GENUINE, decoded)


@dataclass
class RunReport:
    verdicts: list[Verdict]
    skipped: int = 0
    source: str = ""

    @property
    def spam_count(self) -> int:
        return sum(v.final == SPAM for v in self.verdicts)

    @property
    def genuine_count(self) -> int:
        return sum(v.final == GENUINE for v in self.verdicts)

    @property
    def mean_layer1(self) -> float | None:
        xs = [v.layer1_elapsed for v in self.verdicts]
        return statistics.fmean(xs) if xs else None

    @property
    def mean_layer2(self) -> float | None:
        xs = [v.layer2_elapsed for v in self.verdicts if v.layer2 is not None]
        return statistics.fmean(xs) if xs else None

    def format(self) -> str:
        def ms(x):
            return "-" if x is None else f"{x * 1000:.3f}"

        lines = ["call_id\tfinal\tlayer1\tlayer1_ms\tlayer2\tlayer2_ms\treasons"]
        for v in self.verdicts:
            lines.append("\t".join([
                v.call_id, v.final, v.layer1.decision, ms(v.layer1_elapsed),
                v.layer2.decision if v.layer2 else "-", ms(v.layer2_elapsed),
                "; ".join(v.reasons),
            ]))
        lines += [
            f"# calls\t{len(self.verdicts)}",
            f"# spam\t{self.spam_count}",
            f"# genuine\t{self.genuine_count}",
            f"# skipped\t{self.skipped}",
            f"# mean_layer1_ms\t{ms(self.mean_layer1)}",
            f"# mean_layer2_ms\t{ms(self.mean_layer2)}",
        ]
        return "\n".join(lines) + "\n"


def _analyze_or_skip(args):
    capture, store, table, settings = args
    try:
        return analyze_call(capture, store, table, settings)
    except NoInviteError:
        return None


def analyze_calls(captures, store, table, settings: Settings = Settings(), jobs: int = 1):
    work = [(c, store, table, settings) for c in captures]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_analyze_or_skip, work))
    else:
        results = [_analyze_or_skip(w) for w in work]
    verdicts = sorted((r for r in results if r is not None), key=lambda v: v.call_id)
    return verdicts, sum(r is None for r in results)


def _orphan_flows(orphans) -> int:
    return len({(d.src_ip, d.src_port, d.dst_ip, d.dst_port) for d in orphans})


def analyze_capture(path, store=None, table=None, settings: Settings = Settings(),
                    jobs: int = 1, sip_port: int = 5060) -> RunReport:
    """Analyze every call in a capture file. ``store``/``table`` may be paths or loaded objects."""
    store = _as_store(store)
    table = _as_table(table)
    try:
        datagrams = read_capture(path)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    groups = group_calls(datagrams, sip_port)
    verdicts, no_invite = analyze_calls(groups, store, table, settings, jobs)
    return RunReport(verdicts, no_invite + _orphan_flows(groups.orphans), str(path))


def _as_store(store):
    if store is None:
        return default_store()
    return store if isinstance(store, PatternStore) else load(store)


def _as_table(table):
    if table is None:
        return default_table()
    return table if isinstance(table, PrototypeTable) else load_prototypes(table)


@dataclass
class BenchmarkTable:
    calls: int
    repetitions: int
    layer1_mean: float
    layer1_std: float
    layer2_mean: float | None
    layer2_std: float | None
    layer2_calls: int

    def format(self) -> str:
        def ms(x):
            return "-" if x is None else f"{x * 1000:.3f}"

        return (
            "layer\tmean_ms\tstd_ms\tcalls\n"
            f"signaling\t{ms(self.layer1_mean)}\t{ms(self.layer1_std)}\t{self.calls}\n"
            f"media\t{ms(self.layer2_mean)}\t{ms(self.layer2_std)}\t{self.layer2_calls}\n"
            f"# repetitions\t{self.repetitions}\n"
        )


def benchmark(corpus_paths, repetitions: int = 5, store=None, table=None,
              settings: Settings = Settings()) -> BenchmarkTable:
    if repetitions < 3:
        raise ValueError("benchmark needs at least 3 repetitions")
    corpus_paths = list(corpus_paths)
    if not corpus_paths:
        raise ValueError("empty corpus")
    store, table = _as_store(store), _as_table(table)
    captures = [c for p in corpus_paths for c in group_calls(read_capture(p))]
    if not captures:
        raise ValueError("corpus contains no calls")

    l1, l2 = [], []
    layer2_calls = 0
    for _ in range(repetitions):
        verdicts, _ = analyze_calls(captures, store, table, settings)
        l1 += [v.layer1_elapsed for v in verdicts]
        reached = [v.layer2_elapsed for v in verdicts if v.layer2 is not None]
        l2 += reached
        layer2_calls = len(reached)
    return BenchmarkTable(
        calls=len(captures),
        repetitions=repetitions,
        layer1_mean=statistics.fmean(l1),
        layer1_std=statistics.stdev(l1) if len(l1) > 1 else 0.0,
        layer2_mean=statistics.fmean(l2) if l2 else None,
        layer2_std=(statistics.stdev(l2) if len(l2) > 1 else 0.0) if l2 else None,
        layer2_calls=layer2_calls,
    )
