"""Framing, the four speech features and silence-run statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rtp_media import MediaStream


@dataclass(frozen=True)
class FrameSpec:
    frame_length: int = 240  # 30 ms at 8 kHz
    hop: int = 240
    silence_threshold: float = 1e-4
    bins: int = 16

    def __post_init__(self):
        if self.frame_length < 2:
            raise ValueError("frame_length must be >= 2")
        if not 1 <= self.hop <= self.frame_length:
            raise ValueError("hop must be in [1, frame_length]")
        if self.silence_threshold <= 0:
            raise ValueError("silence_threshold must be > 0")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")


@dataclass(frozen=True)
class FeatureVector:
    zcr: float
    abs_mean: float
    energy: float
    entropy: float


@dataclass(frozen=True)
class SilenceStats:
    mask: np.ndarray  # True where the frame is silent
    silence_fraction: float
    longest_silent_run: int
    longest_voiced_run: int

    @property
    def frame_count(self) -> int:
        return len(self.mask)


def _samples(x) -> np.ndarray:
    if isinstance(x, MediaStream):
        x = x.samples
    return np.asarray(x, dtype=float)


def frames(stream, spec: FrameSpec = FrameSpec()) -> np.ndarray:
    x = _samples(stream)
    if len(x) < spec.frame_length:
        return np.zeros((0, spec.frame_length))
    windows = np.lib.stride_tricks.sliding_window_view(x, spec.frame_length)
    return windows[:: spec.hop]


def _nonempty(x) -> np.ndarray:
    x = _samples(x)
    if x.size == 0:
        raise ValueError("empty input")
    return x


def zero_crossing_rate(frame) -> float:
    x = _samples(frame)
    if len(x) < 2:
        raise ValueError("frame too short for zero crossing rate")
    signs = np.sign(x)
    nz = np.flatnonzero(signs)
    if nz.size == 0:
        return 0.0
    # zeros carry the previous sign; a leading zero run takes the first nonzero sign
    idx = np.maximum.accumulate(np.where(signs != 0, np.arange(len(x)), 0))
    idx[: nz[0]] = nz[0]
    filled = signs[idx]
    return float(np.count_nonzero(filled[1:] != filled[:-1]) / (len(x) - 1))


def absolute_mean(samples, scale: float = 1.0) -> float:
    return float(np.mean(np.abs(_nonempty(samples))) * scale)


def energy(samples) -> float:
    x = _nonempty(samples)
    return float(np.mean(x * x))


def entropy(samples, bins: int = 16) -> float:
    """Shannon entropy in bits of the amplitude histogram over [-1, 1]."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    x = np.clip(_nonempty(samples), -1.0, 1.0)
    counts, _ = np.histogram(x, bins=bins, range=(-1.0, 1.0))
    p = counts[counts > 0] / x.size
    return float(max(0.0, -np.sum(p * np.log2(p))))


def feature_vector(samples, spec: FrameSpec = FrameSpec(), scale: float = 1.0) -> FeatureVector:
    x = _nonempty(samples)
    return FeatureVector(
        zcr=zero_crossing_rate(x) if len(x) >= 2 else 0.0,
        abs_mean=absolute_mean(x, scale),
        energy=energy(x),
        entropy=entropy(x, spec.bins),
    )


def _longest_run(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return int(np.max(edges[1::2] - edges[::2]))


def silence_stats(stream, spec: FrameSpec = FrameSpec()) -> SilenceStats:
    f = frames(stream, spec)
    if len(f) == 0:
        raise ValueError("stream shorter than one frame")
    mask = np.mean(f * f, axis=1) < spec.silence_threshold
    return SilenceStats(
        mask=mask,
        silence_fraction=float(np.count_nonzero(mask) / len(mask)),
        longest_silent_run=_longest_run(mask),
        longest_voiced_run=_longest_run(~mask),
    )
