"""Layer 2: silence-run rules plus 1-NN on the stream's absolute mean."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify_signaling import PASS, SPAM, LayerVerdict
from .features import FrameSpec, absolute_mean, silence_stats
from .rtp_media import MediaStream

GENUINE = "genuine"
CLASSES = (GENUINE, SPAM)

# absolute means of the four genuine and four spam reference calls
REFERENCE_ENTRIES = (
    (GENUINE, 4.078), (GENUINE, 5.613), (GENUINE, 6.446), (GENUINE, 2.599),
    (SPAM, 0.195), (SPAM, 0.112), (SPAM, 0.181), (SPAM, 18.174),
)


class PrototypeFileError(ValueError):
    pass


@dataclass(frozen=True)
class PrototypeTable:
    entries: tuple[tuple[str, float], ...] = REFERENCE_ENTRIES
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("calibration scale must be > 0")
        for cls, value in self.entries:
            if cls not in CLASSES:
                raise ValueError(f"unknown class {cls!r}")
            if value < 0:
                raise ValueError(f"negative absolute mean {value}")
        present = {cls for cls, _ in self.entries}
        if self.entries and present != set(CLASSES):
            raise ValueError("prototype table needs at least one entry per class")

    def means(self, cls: str) -> list[float]:
        return [v for c, v in self.entries if c == cls]


def load_prototypes(path) -> PrototypeTable:
    scale = 1.0
    entries = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("|")
        try:
            number = float(value)
        except ValueError:
            number = None
        if not sep or number is None:
            raise PrototypeFileError(f"{path}:{lineno}: malformed line {raw!r}")
        if key == "scale":
            scale = number
        elif key in CLASSES:
            entries.append((key, number))
        else:
            raise PrototypeFileError(f"{path}:{lineno}: unknown class {key!r}")
    try:
        return PrototypeTable(tuple(entries), scale)
    except ValueError as exc:
        raise PrototypeFileError(f"{path}: {exc}") from exc


def dump_prototypes(table: PrototypeTable) -> str:
    lines = [f"scale|{table.scale!r}"] + [f"{c}|{v!r}" for c, v in table.entries]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class NNResult:
    label: str
    prototype: float
    distance: float


def nn_classify(value: float, table: PrototypeTable) -> NNResult:
    """Nearest prototype by absolute difference; cross-class ties go to genuine."""
    if not table.entries:
        raise ValueError("empty prototype table")
    best = min(
        table.entries,
        key=lambda e: (abs(value - e[1]), e[0] != GENUINE, e[1]),
    )
    return NNResult(best[0], best[1], abs(value - best[1]))


def calibrate_scale(measured_genuine_means, table: PrototypeTable = PrototypeTable()) -> float:
    """Scale that maps the mean measured genuine absolute mean onto the prototype genuine mean."""
    measured = np.asarray(list(measured_genuine_means), dtype=float)
    if measured.size == 0 or measured.mean() <= 0:
        raise ValueError("need at least one genuine measurement with nonzero mean")
    return float(np.mean(table.means(GENUINE)) / measured.mean())


@dataclass(frozen=True)
class MediaRuleParams:
    min_packets: int = 50
    no_silence_frames: int = 100  # 3 s of 30 ms frames
    long_silence_frames: int = 200  # 6 s
    fail_closed: bool = False

    def __post_init__(self):
        if min(self.min_packets, self.no_silence_frames, self.long_silence_frames) < 1:
            raise ValueError("media rule thresholds must be >= 1")


def classify_media(stream: MediaStream, table: PrototypeTable = PrototypeTable(),
                   params: MediaRuleParams = MediaRuleParams(),
                   spec: FrameSpec = FrameSpec()) -> LayerVerdict:
    start = time.perf_counter()
    if len(stream.samples) < spec.frame_length:
        decision = SPAM if params.fail_closed else PASS
        return LayerVerdict(decision, ["insufficient media"], time.perf_counter() - start)

    reasons = []
    if stream.packet_count >= params.min_packets:
        stats = silence_stats(stream, spec)
        silent_frames = int(np.count_nonzero(stats.mask))
        if silent_frames == 0 and stats.longest_voiced_run >= params.no_silence_frames:
            reasons.append(f"no-silence rule: {stats.longest_voiced_run} voiced frames, none silent")
        if stats.longest_silent_run >= params.long_silence_frames:
            reasons.append(f"long-silence rule: {stats.longest_silent_run} silent frames")
    rules_fired = bool(reasons)

    value = absolute_mean(stream.samples, table.scale)
    nn = nn_classify(value, table)
    reasons.append(
        f"nearest prototype: {nn.label} {nn.prototype:g} (abs mean {value:.3f}, distance {nn.distance:.3f})"
    )
    decision = SPAM if rules_fired or nn.label == SPAM else PASS
    return LayerVerdict(decision, reasons, time.perf_counter() - start)
