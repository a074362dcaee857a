"""
The signaling layer
===================

Only the first INVITE is inspected. Its From display name, user and host,
Call-ID and source address are normalized and looked up in a pattern file.
"""
from spitgate.classify_signaling import classify_signaling
from spitgate.pipeline import default_store
from spitgate.sip import SignalingRecord, SipUri
from spitgate.spam_db import normalize

store = default_store()
for p in store:
    print(p.line())

# spaced-out names are folded before matching
for text in ["S u m m e r  O f f e r", "t e s t c o m p a n y d o t c o m", "Alice Smith"]:
    print(repr(text), "->", repr(normalize(text)))

def record(display, user, host):
    return SignalingRecord(call_id="demo", from_display=display,
                           from_uri=SipUri("sip", user, host), source_ip="192.0.2.7")

for rec in [record("", "anonymous", "anonymous.net"),
            record("C o m i n g  S o o n", "promo", "example.com"),
            record("Alice", "alice", "example.org")]:
    v = classify_signaling(rec, store)
    print(f"{rec.from_uri.address:28s} {v.decision:5s} {v.reasons}  ({v.elapsed * 1e6:.0f} us)")
