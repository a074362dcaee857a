"""Layer 1: INVITE identity fields against the spam pattern store."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .sip import SignalingRecord
from .spam_db import FIELDS, PatternStore, lookup

SPAM = "spam"
PASS = "pass"


@dataclass
class LayerVerdict:
    decision: str
    reasons: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    def __post_init__(self):
        if self.decision not in (SPAM, PASS):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision == SPAM and not self.reasons:
            raise ValueError("spam verdict needs at least one reason")

    @property
    def is_spam(self) -> bool:
        return self.decision == SPAM


def record_fields(record: SignalingRecord) -> dict[str, str]:
    """Populated lookup fields of a record; empty or absent ones are left out."""
    values = {
        "from_user": record.from_uri.user,
        "from_host": record.from_uri.host,
        "from_display": record.from_display,
        "contact": record.contact_uri.address if record.contact_uri else None,
        "call_id": record.call_id,
        "subject": record.subject,
        "content_type": record.content_type,
        "source_ip": record.source_ip,
    }
    return {k: values[k] for k in FIELDS if values[k]}


def classify_signaling(record: SignalingRecord, store: PatternStore,
                       combination: str = "any") -> LayerVerdict:
    """Spam on any matching field ("any"), or, with "all", unless every field matches.

    The "all" mode is the literal AND-of-lookups rule: each populated field
    contributes 1 when found in the store and the call is spam when the AND is 0.
    """
    if combination not in ("any", "all"):
        raise ValueError(f"unknown combination {combination!r}")
    start = time.perf_counter()
    hits, misses = [], []
    for name, value in record_fields(record).items():
        p = lookup(store, name, value)
        if p is None:
            misses.append(name)
        else:
            hits.append(f"{name}: {p.pattern}")

    if combination == "any":
        decision = SPAM if hits else PASS
        reasons = hits
    else:
        decision = SPAM if misses else PASS
        reasons = [f"{name}: not in database" for name in misses] if misses else hits
    return LayerVerdict(decision, reasons, time.perf_counter() - start)
