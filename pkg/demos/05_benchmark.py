"""
How much cheaper is the signaling layer?
========================================

Time both layers over a 20 call corpus. Absolute numbers depend on the
machine; the point is the ordering.
"""
import tempfile

from spitgate.pipeline import benchmark
from spitgate.traffic_synth import CallProfile, synth_corpus

kinds = ["genuine"] * 10 + ["spam_continuous"] * 5 + ["spam_silent"] * 5
paths = synth_corpus([CallProfile(k, 100 + i) for i, k in enumerate(kinds)], tempfile.mkdtemp())

table = benchmark(paths, repetitions=5)
print(table.format())
print(f"layer 2 costs {table.layer2_mean / table.layer1_mean:.0f}x layer 1 per call")
