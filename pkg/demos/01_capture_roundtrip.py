"""
Synthesizing a call and reading it back
=======================================

Build one genuine call, write it to a classic pcap file, read the file
back and regroup the datagrams into calls.
"""
import tempfile
from pathlib import Path

from spitgate.capture_io import group_calls, read_capture, write_capture
from spitgate.sip import parse_message
from spitgate.traffic_synth import CallProfile, capture_datagrams, synth_call

# a 10 second genuine call: INVITE/180/200/ACK, 500 RTP packets, BYE/200
call = synth_call(CallProfile("genuine", seed=42))
print(call.call_id, len(call.sip_messages), "SIP messages,", len(call.rtp_packets), "RTP packets")

for d in call.sip_messages:
    print("  ", parse_message(d.payload).start_line)

path = Path(tempfile.mkdtemp()) / "one_call.pcap"
write_capture(capture_datagrams(call), path)
print("wrote", path, path.stat().st_size, "bytes")

# grouping uses Call-ID for SIP and the SDP media ports for RTP
(again,) = group_calls(read_capture(path))
print("recovered", again.call_id, len(again.rtp_packets), "RTP packets")
