"""SIP message parsing and INVITE identity extraction."""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field

from .capture_io import media_ports

COMPACT_NAMES = {
    "i": "call-id",
    "f": "from",
    "t": "to",
    "v": "via",
    "c": "content-type",
    "s": "subject",
    "m": "contact",
    "l": "content-length",
}

_REQUEST_LINE = re.compile(r"^([A-Za-z][A-Za-z0-9._!%*+`'~-]*) (\S+) SIP/2\.0$")
_STATUS_LINE = re.compile(r"^SIP/2\.0 (\d{3})(?: (.*))?$")


class SipParseError(ValueError):
    pass


def canonical_name(name: str) -> str:
    name = name.strip().lower()
    return COMPACT_NAMES.get(name, name)


@dataclass
class SipMessage:
    kind: str  # "request" | "response"
    method: str = ""
    request_uri: str = ""
    status: int = 0
    reason: str = ""
    headers: list[tuple[str, str]] = field(default_factory=list)
    body: bytes = b""

    def __post_init__(self):
        if self.kind == "request" and not self.method:
            raise ValueError("request without method")
        if self.kind == "response" and not 100 <= self.status <= 699:
            raise ValueError(f"status out of range: {self.status}")
        if self.kind not in ("request", "response"):
            raise ValueError(f"unknown kind {self.kind!r}")

    def header_values(self, name: str) -> list[str]:
        key = canonical_name(name)
        return [v for n, v in self.headers if canonical_name(n) == key]

    def header(self, name: str) -> str | None:
        values = self.header_values(name)
        return values[0] if values else None

    @property
    def start_line(self) -> str:
        if self.kind == "request":
            return f"{self.method} {self.request_uri} SIP/2.0"
        return f"SIP/2.0 {self.status} {self.reason}".rstrip()

    def render(self) -> bytes:
        lines = [self.start_line] + [f"{n}: {v}" for n, v in self.headers]
        return ("\r\n".join(lines) + "\r\n\r\n").encode("utf-8") + self.body


def _split_head(data: bytes) -> tuple[bytes, bytes]:
    cuts = [(i, len(sep)) for sep in (b"\r\n\r\n", b"\n\n") if (i := data.find(sep)) >= 0]
    if not cuts:
        return data, b""
    i, n = min(cuts)
    return data[:i], data[i + n:]


def parse_message(data: bytes) -> SipMessage:
    head, body = _split_head(bytes(data))
    try:
        text = head.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SipParseError("non-text start line") from exc
    lines = text.replace("\r\n", "\n").split("\n")
    start = lines[0].strip() if lines else ""
    if m := _REQUEST_LINE.match(start):
        msg = SipMessage("request", method=m.group(1), request_uri=m.group(2))
    elif m := _STATUS_LINE.match(start):
        status = int(m.group(1))
        if not 100 <= status <= 699:
            raise SipParseError(f"status out of range: {status}")
        msg = SipMessage("response", status=status, reason=m.group(2) or "")
    else:
        raise SipParseError(f"no start line: {start[:40]!r}")

    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        if line[0] in " \t" and msg.headers:
            name, value = msg.headers[-1]
            msg.headers[-1] = (name, f"{value} {line.strip()}")
            continue
        name, sep, value = line.partition(":")
        if not sep or not name.strip():
            raise SipParseError(f"malformed header on line {lineno}: {line[:40]!r}")
        msg.headers.append((name.strip(), value.strip()))
    msg.body = body
    return msg


@dataclass(frozen=True)
class SipUri:
    scheme: str
    user: str
    host: str
    port: int | None = None

    def __str__(self) -> str:
        hostport = self.host if self.port is None else f"{self.host}:{self.port}"
        return f"{self.scheme}:{self.user}@{hostport}" if self.user else f"{self.scheme}:{hostport}"

    @property
    def address(self) -> str:
        """user@host form, without scheme or port."""
        return f"{self.user}@{self.host}" if self.user else self.host


def parse_uri(text: str) -> SipUri:
    text = text.strip()
    if "<" in text:
        text = text[text.index("<") + 1:]
        text = text.split(">", 1)[0]
    scheme, sep, rest = text.partition(":")
    if not sep or not scheme or not scheme.isalpha():
        raise SipParseError(f"missing scheme in URI {text!r}")
    userinfo, at, hostpart = rest.rpartition("@")
    if not at:
        hostpart, userinfo = rest, ""
    hostpart = re.split(r"[;?]", hostpart, maxsplit=1)[0]
    user = userinfo.split(":", 1)[0]  # drop password
    host, colon, port = hostpart.partition(":")
    if not host:
        raise SipParseError(f"empty host in URI {text!r}")
    if colon and not port.isdigit():
        raise SipParseError(f"bad port in URI {text!r}")
    return SipUri(scheme.lower(), user, host, int(port) if colon else None)


def parse_name_addr(value: str) -> tuple[str, SipUri]:
    """Split ``"Display" <uri>;params`` into (display name, uri)."""
    value = value.strip()
    display = ""
    if "<" in value:
        display = value[: value.index("<")].strip()
        if len(display) >= 2 and display[0] == display[-1] == '"':
            display = display[1:-1]
    return display, parse_uri(value)


@dataclass
class SignalingRecord:
    call_id: str
    from_display: str
    from_uri: SipUri
    source_ip: str
    contact_uri: SipUri | None = None
    via: list[str] = field(default_factory=list)
    subject: str | None = None
    content_type: str | None = None
    media_port: int | None = None

    def __post_init__(self):
        if not self.call_id:
            raise ValueError("empty call id")
        ipaddress.IPv4Address(self.source_ip)


def extract_invite(message: SipMessage, source_ip: str) -> SignalingRecord:
    if message.kind != "request" or message.method.upper() != "INVITE":
        raise SipParseError("not an INVITE")
    from_value = message.header("From")
    if not from_value:
        raise SipParseError("INVITE without From")
    call_id = message.header("Call-ID")
    if not call_id:
        raise SipParseError("INVITE without Call-ID")
    display, from_uri = parse_name_addr(from_value)

    contact = None
    if (contact_value := message.header("Contact")) and contact_value.strip() != "*":
        try:
            _, contact = parse_name_addr(contact_value)
        except SipParseError:
            contact = None

    via = [hop.strip() for v in message.header_values("Via") for hop in v.split(",") if hop.strip()]
    ports = media_ports(message.body)
    return SignalingRecord(
        call_id=call_id,
        from_display=display,
        from_uri=from_uri,
        source_ip=source_ip,
        contact_uri=contact,
        via=via,
        subject=message.header("Subject"),
        content_type=message.header("Content-Type"),
        media_port=ports[0] if ports else None,
    )
