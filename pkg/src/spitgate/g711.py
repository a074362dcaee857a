"""G.711 mu-law and A-law companding on normalized float samples.

Decoding is table driven and bit-exact with the ITU reference expansion:
mu-law yields 14-bit magnitudes (max 8031), A-law 13-bit magnitudes (max 4032).
"""

import numpy as np

ULAW_SCALE = 8159
ALAW_SCALE = 4032

_ULAW_BIAS = 33
_ULAW_SEG_END = np.array([0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF, 0x1FFF])
_ALAW_SEG_END = np.array([0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF])


def _ulaw_to_linear(code: int) -> int:
    u = ~code & 0xFF
    exponent = (u >> 4) & 0x07
    mantissa = u & 0x0F
    magnitude = (((mantissa << 1) + _ULAW_BIAS) << exponent) - _ULAW_BIAS
    return -magnitude if u & 0x80 else magnitude


def _alaw_to_linear(code: int) -> int:
    a = code ^ 0x55
    t = (a & 0x0F) << 4
    seg = (a & 0x70) >> 4
    if seg == 0:
        t += 8
    else:
        t = (t + 0x108) << (seg - 1)
    t >>= 3  # 16-bit -> 13-bit
    return t if a & 0x80 else -t


ULAW_TABLE = np.array([_ulaw_to_linear(c) for c in range(256)], dtype=np.int32)
ALAW_TABLE = np.array([_alaw_to_linear(c) for c in range(256)], dtype=np.int32)


def ulaw_to_linear14(payload: bytes) -> np.ndarray:
    return ULAW_TABLE[np.frombuffer(payload, dtype=np.uint8)]


def decode_g711_ulaw(payload: bytes) -> np.ndarray:
    return ulaw_to_linear14(payload) / ULAW_SCALE


def decode_g711_alaw(payload: bytes) -> np.ndarray:
    return ALAW_TABLE[np.frombuffer(payload, dtype=np.uint8)] / ALAW_SCALE


def linear14_to_ulaw(values) -> bytes:
    x = np.asarray(values, dtype=np.int64)
    mask = np.where(x < 0, 0x7F, 0xFF)
    mag = np.minimum(np.abs(x), ULAW_SCALE) + _ULAW_BIAS
    seg = np.searchsorted(_ULAW_SEG_END, mag)
    code = np.where(
        seg >= 8,
        0x7F,
        (np.minimum(seg, 7) << 4) | ((mag >> (np.minimum(seg, 7) + 1)) & 0x0F),
    )
    return (code ^ mask).astype(np.uint8).tobytes()


def encode_g711_ulaw(samples) -> bytes:
    x = np.clip(np.asarray(samples, dtype=float), -1.0, 1.0)
    return linear14_to_ulaw(np.rint(x * ULAW_SCALE))


def encode_g711_alaw(samples) -> bytes:
    x = np.rint(np.clip(np.asarray(samples, dtype=float), -1.0, 1.0) * ALAW_SCALE).astype(np.int64)
    neg = x < 0
    mask = np.where(neg, 0x55, 0xD5)
    # A-law is defined on the 13-bit value offset by one for negatives
    pcm = np.where(neg, -x - 1, x)
    seg = np.searchsorted(_ALAW_SEG_END, pcm)
    s = np.minimum(seg, 7)
    mant = np.where(s < 2, pcm >> 1, pcm >> s) & 0x0F
    code = np.where(seg >= 8, 0x7F, (s << 4) | mant)
    return (code ^ mask).astype(np.uint8).tobytes()
