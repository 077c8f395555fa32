"""Execution-time state: file buffer, variable scope, and parse tree.

The same FileBuffer type backs both directions.  Generating writes into a
growable buffer capped by a byte budget; parsing reads from an immutable
byte string whose size doubles as the budget.  Reservations pin bytes that
a lookahead has already fixed, at single byte granularity.
"""

from __future__ import annotations

from .errors import (
    BudgetExceeded,
    EvalError,
    GenerationFailed,
    OutOfRange,
    ReservationConflict,
)

DEFAULT_BUDGET = 65536


class FileBuffer:
    """Byte buffer with position, budget, reservations, and gap tracking."""

    def __init__(self, budget: int = DEFAULT_BUDGET, data: bytes | None = None):
        self.parse_mode = data is not None
        if self.parse_mode:
            self.data = bytearray(data)
            self.budget = len(data)
        else:
            self.data = bytearray()
            self.budget = budget
        self.position = 0
        self.high_water = len(self.data) if self.parse_mode else 0
        self.reservations: dict[int, int] = {}
        self._gaps: set[int] = set()

    @property
    def size(self) -> int:
        return len(self.data)

    def tell(self) -> int:
        return self.position

    def seek(self, pos: int):
        if pos < 0 or pos > self.budget:
            raise OutOfRange(f"seek to {pos} outside [0, {self.budget}]")
        self.position = pos

    # -- generation side ------------------------------------------------

    def write(self, payload: bytes):
        pos = self.position
        end = pos + len(payload)
        if end > self.budget:
            raise BudgetExceeded(f"write of {len(payload)} bytes at {pos} exceeds budget {self.budget}")
        if pos > len(self.data):
            # forward seek left a hole; it must be filled before finalize
            self._gaps.update(range(len(self.data), pos))
            self.data.extend(b"\x00" * (pos - len(self.data)))
        for i, b in enumerate(payload):
            off = pos + i
            held = self.reservations.get(off)
            if held is not None and held != b:
                raise ReservationConflict(
                    f"byte {b:#04x} at offset {off} conflicts with reserved {held:#04x}")
        if end <= len(self.data):
            self.data[pos:end] = payload
        else:
            self.data[pos:] = payload[: len(self.data) - pos]
            self.data.extend(payload[len(self.data) - pos:])
        if self._gaps:
            self._gaps.difference_update(range(pos, end))
        self.position = end
        if end > self.high_water:
            self.high_water = end

    def reserve(self, pos: int, payload: bytes):
        """Pin bytes chosen by a lookahead before they are declared."""
        if pos < 0 or pos + len(payload) > self.budget:
            raise OutOfRange(f"reservation [{pos}, {pos + len(payload)}) outside budget")
        for i, b in enumerate(payload):
            off = pos + i
            held = self.reservations.get(off)
            if held is not None and held != b:
                raise ReservationConflict(
                    f"reservation {b:#04x} at offset {off} conflicts with reserved {held:#04x}")
            if not self.parse_mode and off < len(self.data) and off not in self._gaps:
                if self.data[off] != b:
                    raise ReservationConflict(
                        f"reservation {b:#04x} at offset {off} conflicts with written "
                        f"{self.data[off]:#04x}")
            self.reservations[off] = b

    def reserved_block(self, pos: int, length: int) -> bytes | None:
        """The reserved bytes covering [pos, pos+length), or None if any
        byte in the range is unreserved."""
        out = bytearray()
        for off in range(pos, pos + length):
            held = self.reservations.get(off)
            if held is None:
                return None
            out.append(held)
        return bytes(out)

    def finalize(self) -> bytes:
        if self._gaps:
            first = min(self._gaps)
            raise GenerationFailed(f"{len(self._gaps)} gap byte(s) never written, first at {first}")
        unwritten = [off for off in self.reservations if off >= self.high_water]
        if not self.parse_mode and unwritten:
            raise GenerationFailed(
                f"{len(unwritten)} reserved byte(s) never declared, first at {min(unwritten)}")
        return bytes(self.data)

    # -- parse side -------------------------------------------------------

    def read(self, n: int) -> bytes:
        if self.position + n > len(self.data):
            raise OutOfRange(f"read of {n} bytes at {self.position} past end ({len(self.data)})")
        out = bytes(self.data[self.position:self.position + n])
        self.position += n
        return out

    def peek(self, pos: int, n: int) -> bytes | None:
        """Bytes at [pos, pos+n) without moving, or None past the end."""
        if pos < 0:
            raise OutOfRange(f"peek at negative offset {pos}")
        if pos + n > len(self.data):
            return None
        return bytes(self.data[pos:pos + n])


class Scope:
    """Name binding frames with C-style activation boundaries.

    Reads fall through every frame so record bodies can consult enclosing
    locals.  A `local` declaration rebinds an existing binding within the
    current activation (so loop-carried state survives braces) but shadows
    bindings that live outside it (record and function bodies start new
    activations).
    """

    def __init__(self):
        self.frames: list[dict[str, object]] = [{}]
        self.activation_bases: list[int] = [0]

    def push_frame(self):
        self.frames.append({})

    def pop_frame(self):
        self.frames.pop()

    def push_activation(self):
        self.activation_bases.append(len(self.frames))
        self.frames.append({})

    def pop_activation(self):
        base = self.activation_bases.pop()
        del self.frames[base:]

    def read(self, name: str) -> object:
        for frame in reversed(self.frames):
            if name in frame:
                return frame[name]
        raise EvalError(f"undefined variable {name!r}")

    def try_read(self, name: str):
        for frame in reversed(self.frames):
            if name in frame:
                return frame[name]
        return None

    def assign(self, name: str, value: object):
        for frame in reversed(self.frames):
            if name in frame:
                frame[name] = value
                return
        raise EvalError(f"assignment to undefined variable {name!r}")

    def declare_local(self, name: str, value: object):
        base = self.activation_bases[-1]
        for idx in range(len(self.frames) - 1, base - 1, -1):
            if name in self.frames[idx]:
                self.frames[idx][name] = value
                return
        self.frames[-1][name] = value

    def bind(self, name: str, value: object):
        self.frames[-1][name] = value


class RecordVal:
    """Value of a record instance: ordered fields plus their tree nodes."""

    __slots__ = ("type_name", "fields", "field_nodes")

    def __init__(self, type_name: str):
        self.type_name = type_name
        self.fields: dict[str, object] = {}
        self.field_nodes: dict[str, ParseNode] = {}

    def get(self, name: str) -> object:
        try:
            return self.fields[name]
        except KeyError:
            raise KeyError(name) from None

    def __repr__(self) -> str:
        return f"RecordVal({self.type_name}, {list(self.fields)})"


class ParseNode:
    """One node of the parse tree shared by both directions.

    file span and seed span are half-open offset pairs.  optional marks
    nodes generated right after a lookahead call; rewritten marks nodes
    whose bytes were overwritten by a later fix-up declaration.
    """

    __slots__ = ("id", "name", "type_name", "file_start", "file_end",
                 "seed_start", "seed_end", "optional", "rewritten", "children")

    def __init__(self, node_id: int, name: str, type_name: str):
        self.id = node_id
        self.name = name
        self.type_name = type_name
        self.file_start = 0
        self.file_end = 0
        self.seed_start = 0
        self.seed_end = 0
        self.optional = False
        self.rewritten = False
        self.children: list[ParseNode] = []

    @property
    def file_span(self) -> tuple[int, int]:
        return (self.file_start, self.file_end)

    @property
    def seed_span(self) -> tuple[int, int]:
        return (self.seed_start, self.seed_end)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "type": self.type_name,
            "file": [self.file_start, self.file_end],
            "seed": [self.seed_start, self.seed_end],
            "optional": self.optional,
            "children": [child.to_json() for child in self.children],
        }

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def __repr__(self) -> str:
        return (f"ParseNode({self.id}, {self.name!r}, {self.type_name!r}, "
                f"file={self.file_span}, seed={self.seed_span})")


def trees_agree(a: ParseNode, b: ParseNode, compare_seed_spans: bool = True) -> bool:
    """Structural identity of two parse trees.

    Seed spans are encoding dependent: a tree generated from a hand-made
    seed can differ in span widths from the canonical parse of the same
    file, so callers comparing across encodings pass compare_seed_spans
    False.  The rewritten flag never participates (only the generator
    observes fix-ups).
    """
    if (a.name != b.name or a.type_name != b.type_name
            or a.file_span != b.file_span or a.optional != b.optional
            or len(a.children) != len(b.children)):
        return False
    if compare_seed_spans and a.seed_span != b.seed_span:
        return False
    return all(
        trees_agree(ca, cb, compare_seed_spans)
        for ca, cb in zip(a.children, b.children))
