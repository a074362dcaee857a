"""
The two-layer firewall on a mixed capture
=========================================

Signaling spam is rejected before any RTP is decoded. Calls that pass are
judged on their audio. The report is the same one the CLI prints.
"""
import tempfile
from pathlib import Path

from spitgate.capture_io import write_capture
from spitgate.pipeline import analyze_capture
from spitgate.traffic_synth import CallProfile, capture_datagrams, synth_call

profiles = [CallProfile(k, s) for k in ("genuine", "spam_signaling", "spam_continuous", "spam_silent")
            for s in (1, 2)]
# a spaced display name with otherwise clean audio
profiles.append(CallProfile("genuine", 9, display="s u m m e r o f f e r"))

path = Path(tempfile.mkdtemp()) / "mixed.pcap"
write_capture(capture_datagrams(*[synth_call(p) for p in profiles]), path)

report = analyze_capture(path, jobs=2)
print(report.format())

for v in report.verdicts:
    print(f"{v.call_id:34s} {v.final:8s} decoded={v.decoded_packets}")
