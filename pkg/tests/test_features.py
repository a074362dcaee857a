import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from spitgate.features import (
    FrameSpec,
    absolute_mean,
    energy,
    entropy,
    frames,
    silence_stats,
    zero_crossing_rate,
)
from spitgate.rtp_media import MediaStream
from spitgate.traffic_synth import CallProfile, SAMPLE_RATE, synth_audio, voiced_spans


def brute_crossings(x):
    """Sign changes with zeros carrying the previous sign (leading zeros: first nonzero sign)."""
    signs = []
    for v in x:
        if v > 0:
            signs.append(1)
        elif v < 0:
            signs.append(-1)
        else:
            signs.append(signs[-1] if signs else 0)
    first = next((s for s in signs if s), 0)
    signs = [s or first for s in signs]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


@pytest.mark.parametrize("n, expected", [(480, 2), (239, 0), (500, 2)])
def test_frame_counts(n, expected):
    assert len(frames(np.zeros(n), FrameSpec())) == expected


def test_hopped_frames():
    f = frames(np.arange(10.0), FrameSpec(frame_length=4, hop=2))
    assert f.tolist() == [[0, 1, 2, 3], [2, 3, 4, 5], [4, 5, 6, 7], [6, 7, 8, 9]]


@pytest.mark.parametrize("kwargs", [
    {"frame_length": 1}, {"hop": 0}, {"hop": 241}, {"silence_threshold": 0}, {"bins": 1},
])
def test_frame_spec_validation(kwargs):
    with pytest.raises(ValueError):
        FrameSpec(**kwargs)


def test_zcr_examples():
    assert zero_crossing_rate([0.5] * 10) == 0.0
    assert zero_crossing_rate([0.3, -0.3] * 5) == 1.0
    assert zero_crossing_rate(np.zeros(8)) == 0.0
    assert zero_crossing_rate([0, 0, 1, 0, -1, 0]) == pytest.approx(1 / 5)
    with pytest.raises(ValueError):
        zero_crossing_rate([1.0])


def test_zcr_full_period():
    n = np.arange(240)
    cosine = np.cos(2 * np.pi * n / 240)
    assert brute_crossings(cosine) == 2
    assert zero_crossing_rate(cosine) == pytest.approx(2 / 239)
    # sine starting at 0: the leading zero takes the sign of what follows, leaving one change
    sine = np.sin(2 * np.pi * n / 240)
    assert zero_crossing_rate(sine) == pytest.approx(brute_crossings(sine) / 239)


@given(st.floats(0, 2 * math.pi), st.integers(1, 12))
def test_zcr_sine_matches_brute_force(phase, periods):
    x = np.sin(2 * np.pi * periods * np.arange(240) / 240 + phase)
    assert zero_crossing_rate(x) == pytest.approx(brute_crossings(x) / 239)


def test_absolute_mean_examples():
    assert absolute_mean([1, -1, 1, -1]) == 1.0
    assert absolute_mean(np.zeros(5)) == 0.0
    assert absolute_mean([0.5, -0.25, 0.25]) == pytest.approx(1 / 3)
    assert absolute_mean([0.5, -0.5], scale=4) == 2.0
    with pytest.raises(ValueError):
        absolute_mean([])


def test_energy_examples():
    assert energy(np.zeros(4)) == 0.0
    assert energy([0.3] * 7) == pytest.approx(0.09)
    assert energy([1, -1]) == 1.0
    with pytest.raises(ValueError):
        energy([])


def test_entropy_examples():
    assert entropy([0.2] * 50) == 0.0
    centers = -1 + (np.arange(16) + 0.5) * 2 / 16
    assert entropy(centers, 16) == pytest.approx(4.0)
    assert entropy([-1.0, 1.0], 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        entropy([], 16)


samples = arrays(np.float64, st.integers(2, 300), elements=st.floats(-1, 1))


@given(samples)
def test_feature_ranges(x):
    assert 0 <= zero_crossing_rate(x) <= 1
    assert energy(x) >= 0
    assert 0 <= entropy(x, 16) <= 4 + 1e-12
    assert absolute_mean(x) >= 0


@given(samples, st.floats(0, 1))
def test_scaling_covariance(x, k):
    assert absolute_mean(k * x) == pytest.approx(k * absolute_mean(x), abs=1e-12)
    assert energy(k * x) == pytest.approx(k * k * energy(x), abs=1e-12)


# no zeros, and nothing on a histogram bin edge, where binning is not mirror symmetric
off_edge = st.builds(lambda sign, b, f: sign * (b + f) / 8,
                     st.sampled_from([-1.0, 1.0]), st.integers(0, 7), st.floats(0.001, 0.999))


@given(arrays(np.float64, st.integers(2, 300), elements=off_edge))
def test_sign_invariance(x):
    assert zero_crossing_rate(-x) == zero_crossing_rate(x)
    assert absolute_mean(-x) == absolute_mean(x)
    assert energy(-x) == energy(x)
    assert entropy(-x) == pytest.approx(entropy(x))


def test_silence_all_zero():
    st_ = silence_stats(np.zeros(2400))
    assert st_.silence_fraction == 1.0 and st_.longest_silent_run == 10 and st_.longest_voiced_run == 0


def test_silence_constant():
    st_ = silence_stats(np.full(2400, 0.5))
    assert st_.silence_fraction == 0.0 and st_.longest_voiced_run == 10 and st_.longest_silent_run == 0


def test_silence_runs():
    x = np.concatenate([np.zeros(240 * 3), np.full(240 * 2, 0.5), np.zeros(240 * 4), np.full(240, 0.5)])
    st_ = silence_stats(MediaStream(1, x, [0]))
    assert st_.mask.tolist() == [1, 1, 1, 0, 0, 1, 1, 1, 1, 0]
    assert (st_.longest_silent_run, st_.longest_voiced_run) == (4, 2)
    assert st_.silence_fraction == pytest.approx(0.7)


def test_silence_too_short():
    with pytest.raises(ValueError, match="shorter than one frame"):
        silence_stats(np.zeros(100))


@pytest.mark.parametrize("seed", [1, 42])
def test_genuine_silence_fraction_in_constructed_band(seed):
    profile = CallProfile("genuine", seed)
    spec = FrameSpec()
    stats = silence_stats(synth_audio(profile), spec)
    n_frames = stats.frame_count
    voiced = np.zeros(int(profile.duration * SAMPLE_RATE), bool)
    for a, b in voiced_spans(profile):
        voiced[a:b] = True
    starts = np.arange(n_frames) * spec.hop
    fully_silent = sum(not voiced[s : s + spec.frame_length].any() for s in starts)
    touched_silence = sum(not voiced[s : s + spec.frame_length].all() for s in starts)
    silent = int(stats.mask.sum())
    assert fully_silent <= silent <= touched_silence
    assert 0.2 < stats.silence_fraction < 0.55
