"""Independent validity oracle for the MINI container format.

MINI is the smallest format that still has the interesting parts: magic,
a tagged chunk sequence, a little-endian size field, and a checksum.

    "MINI"
    zero or more DATA chunks: 0x01, uint16le length in [1, 16],
        payload[length], check byte = sum(payload) mod 256
    one END chunk: 0xFF, and nothing after it

The checks below work on raw bytes only and share no code with the
template engine.
"""

from __future__ import annotations

MAGIC = b"MINI"
TAG_DATA = 0x01
TAG_END = 0xFF
MAX_PAYLOAD = 16


def verify_mini(data: bytes) -> tuple[bool, str | None]:
    """Verdict plus the first violation (None when the file is valid)."""
    if data[:4] != MAGIC:
        return False, "offset 0: missing MINI magic"
    pos = 4
    while True:
        if pos >= len(data):
            return False, f"offset {pos}: file ends without an END chunk"
        tag = data[pos]
        if tag == TAG_END:
            if pos + 1 != len(data):
                return False, f"offset {pos + 1}: {len(data) - pos - 1} byte(s) after END"
            return True, None
        if tag != TAG_DATA:
            return False, f"offset {pos}: unknown tag {tag:#04x}"
        if pos + 3 > len(data):
            return False, f"offset {pos}: DATA header is truncated"
        length = int.from_bytes(data[pos + 1:pos + 3], "little")
        if not 1 <= length <= MAX_PAYLOAD:
            return False, f"offset {pos + 1}: length {length} outside [1, {MAX_PAYLOAD}]"
        body_end = pos + 3 + length
        if body_end + 1 > len(data):
            return False, f"offset {pos + 3}: payload of {length} byte(s) is truncated"
        payload = data[pos + 3:body_end]
        check = data[body_end]
        if check != sum(payload) % 256:
            return False, (f"offset {body_end}: check byte {check:#04x} != "
                           f"{sum(payload) % 256:#04x}")
        pos = body_end + 1
