"""Spam pattern store and the text normalization used for matching.

Store file format, one pattern per line::

    # comment
    from_user|exact|anonymous
    from_display|substring|testcompany
"""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

FIELDS = (
    "from_user",
    "from_host",
    "from_display",
    "contact",
    "call_id",
    "subject",
    "content_type",
    "source_ip",
)
KINDS = ("exact", "substring")

_DISALLOWED = re.compile(r"[^a-z0-9@.\- ]+")
_WS = re.compile(r"\s+")


class PatternFileError(ValueError):
    pass


def _fold_run(tokens: list[str]) -> str:
    # spelled-out "d o t" inside a spaced run becomes "." when it is neither
    # the first letters nor followed by fewer than two more letters
    out, i = [], 0
    while i < len(tokens):
        if (i > 0 and tokens[i : i + 3] == ["d", "o", "t"] and len(tokens) - (i + 3) >= 2):
            out.append(".")
            i += 3
        else:
            out.append(tokens[i])
            i += 1
    return "".join(out)


def normalize(text: str) -> str:
    text = _DISALLOWED.sub("", _WS.sub(" ", text.lower()))
    tokens = text.split()

    folded, run = [], []
    for tok in tokens + [""]:
        if len(tok) == 1:
            run.append(tok)
            continue
        if len(run) >= 3:
            folded.append(_fold_run(run))
        else:
            folded.extend(run)
        run = []
        if tok:
            folded.append(tok)

    out: list[str] = []
    i = 0
    while i < len(folded):
        tok = folded[i]
        if tok == "dot" and out and i + 1 < len(folded):
            out[-1] = f"{out[-1]}.{folded[i + 1]}"
            i += 2
            continue
        out.append(tok)
        i += 1
    return " ".join(out)


@dataclass(frozen=True)
class SpamPattern:
    field: str
    kind: str
    pattern: str

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ValueError(f"unknown field {self.field!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown match kind {self.kind!r}")
        if not self.pattern:
            raise ValueError("empty pattern")
        if "|" in self.pattern:
            raise ValueError("'|' is not allowed inside a pattern")
        if normalize(self.pattern) != self.pattern:
            raise ValueError(f"pattern {self.pattern!r} is not normalized")

    @classmethod
    def make(cls, field: str, kind: str, text: str) -> "SpamPattern":
        return cls(field, kind, normalize(text))

    def matches(self, normalized_value: str) -> bool:
        if self.kind == "exact":
            return normalized_value == self.pattern
        return self.pattern in normalized_value

    def line(self) -> str:
        return f"{self.field}|{self.kind}|{self.pattern}"


@dataclass(frozen=True)
class PatternStore:
    patterns: tuple[SpamPattern, ...] = ()
    path: Path | None = None
    duplicates_dropped: int = field(default=0, compare=False)

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)


def parse_patterns(text: str, source: str = "<string>") -> PatternStore:
    patterns: list[SpamPattern] = []
    seen = set()
    dropped = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise PatternFileError(f"{source}:{lineno}: malformed line {raw!r}")
        fld, kind, text_ = (p.strip() for p in parts)
        if fld not in FIELDS:
            raise PatternFileError(f"{source}:{lineno}: unknown field {fld!r}")
        if kind not in KINDS:
            raise PatternFileError(f"{source}:{lineno}: unknown kind {kind!r}")
        pattern = normalize(text_)
        if not pattern:
            raise PatternFileError(f"{source}:{lineno}: pattern is empty after normalization")
        p = SpamPattern(fld, kind, pattern)
        if p in seen:
            dropped += 1
            continue
        seen.add(p)
        patterns.append(p)
    return PatternStore(tuple(patterns), None, dropped)


def load(path) -> PatternStore:
    path = Path(path)
    store = parse_patterns(path.read_text(encoding="utf-8"), str(path))
    return PatternStore(store.patterns, path, store.duplicates_dropped)


def dumps(store: PatternStore) -> str:
    return "".join(p.line() + "\n" for p in store.patterns)


def save(store: PatternStore, path=None) -> PatternStore:
    path = Path(path or store.path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dumps(store))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return PatternStore(store.patterns, path, store.duplicates_dropped)


def add(store: PatternStore, pattern: SpamPattern, path=None) -> PatternStore:
    if pattern in store.patterns:
        raise ValueError(f"duplicate pattern: {pattern.line()}")
    return save(PatternStore(store.patterns + (pattern,), store.path), path)


def remove(store: PatternStore, pattern: SpamPattern, path=None) -> PatternStore:
    if pattern not in store.patterns:
        raise ValueError(f"pattern not in store: {pattern.line()}")
    kept = tuple(p for p in store.patterns if p != pattern)
    return save(PatternStore(kept, store.path), path)


def lookup(store: PatternStore, field: str, value: str) -> SpamPattern | None:
    norm = normalize(value)
    if not norm:
        return None
    for p in store.patterns:
        if p.field == field and p.matches(norm):
            return p
    return None
