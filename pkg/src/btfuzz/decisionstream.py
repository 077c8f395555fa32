"""Decision streams: the byte-level protocol between seeds and choices.

A decision seed is a flat byte string.  Generation consumes it through the
choice operations below; parsing runs the same operations in reverse and
emits the canonical byte encoding of every observed choice.  The two
directions are exact inverses: generating from a parse-emitted seed
reproduces the parsed file bit for bit.

Wire protocol, in consumption order:

  evil gate      one byte b0 when evil decisions are enabled, none when
                 disabled.  Evil if and only if b0 mod 128 == 127, so a
                 uniformly random byte turns evil with probability 1/128.
                 Parsing emits 127 for evil and 0 otherwise.
  index choice   choosing among k known options.  k == 1 with evil
                 disabled is forced and consumes nothing.  Otherwise one
                 byte b1 gives b1 mod k (two little-endian bytes when
                 k > 256).  Parsing emits the index itself.
  bounded value  minimal little-endian width covering max-min+1; the
                 value is min + raw mod span.
  unconstrained  a control byte c.  c mod 4 < 3 selects the SMALL class
                 (one payload byte, values 0..255); otherwise the FULL
                 class (width payload bytes, used verbatim as the field's
                 file bytes).  Parsing emits control 0 for 0..255 values
                 and control 3 plus the file bytes otherwise.
  token choice   for lookahead-driven chunk ordering; see choose_token.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum, auto

from .errors import SeedExhausted, SpliceMisaligned, UnrepresentableValue

EVIL_MODULUS = 128
EVIL_RESIDUE = 127
SMALL_CLASSES = 3  # control byte classes 0..2 are SMALL, 3 is FULL


class StreamMode(Enum):
    GEN_FROM_SEED = auto()
    GEN_RANDOM = auto()
    PARSE_RECORD = auto()


# Event kinds.
EVIL_GATE = "evil_gate"
INDEX_CHOICE = "index_choice"
RAW_BYTES = "raw_bytes"
LOOKAHEAD_CALL = "lookahead_call"
STREAM_SWITCH = "stream_switch"


@dataclass(slots=True)
class ChoiceEvent:
    kind: str
    start: int
    end: int
    node_id: int | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "span": [self.start, self.end], "node": self.node_id}


@dataclass
class ChoiceSpec:
    """Constraints gathered for one choice point."""

    width: int = 1
    candidates: list | None = None  # ints, or byte strings for whole arrays
    bounds: tuple[int, int] | None = None
    preferred: list[bytes] | None = None
    possible: list[bytes] | None = None
    pref_prob: float = 0.25


def bounded_width(span: int) -> int:
    """Minimal raw byte width whose range covers `span` values."""
    if span <= 1 << 8:
        return 1
    if span <= 1 << 16:
        return 2
    if span <= 1 << 32:
        return 4
    return 8


# --- byte sources for generation ------------------------------------------


class _SeedSource:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def draw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SeedExhausted(
                f"need {n} byte(s) at seed offset {self.pos}, have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


class _RandomSource:
    def __init__(self, rng: random.Random):
        self.rng = rng

    def draw(self, n: int) -> bytes:
        return self.rng.randbytes(n)


class _SpliceSource:
    """Prefix from a base seed, a spliced-in middle, then the base suffix.

    The middle starts when consumption reaches span start and ends when the
    engine reports that the node under construction there has completed.
    """

    PREFIX, ALT, SUFFIX = 0, 1, 2

    def __init__(self, base: bytes, span: tuple[int, int], alt, on_switch):
        self.base = base
        self.start, self.resume = span
        self.alt = alt  # _SeedSource (donor bytes) or _RandomSource
        self.on_switch = on_switch
        self.phase = self.PREFIX
        self.pos = 0  # position within base for prefix/suffix
        self.consumed = 0
        self.alt_consumed = 0

    def enter_alt_if_at_boundary(self) -> bool:
        if self.phase == self.PREFIX and self.consumed == self.start:
            self.phase = self.ALT
            self.on_switch()
            return True
        return False

    def end_alt(self):
        if self.phase != self.ALT:
            raise SpliceMisaligned("splice target completed outside the spliced region")
        if isinstance(self.alt, _SeedSource) and self.alt.pos != len(self.alt.data):
            left = len(self.alt.data) - self.alt.pos
            raise SpliceMisaligned(f"{left} donor decision byte(s) left unconsumed")
        self.phase = self.SUFFIX
        self.pos = self.resume
        self.on_switch()

    def draw(self, n: int) -> bytes:
        self.enter_alt_if_at_boundary()
        if self.phase == self.PREFIX:
            if self.pos + n > self.start:
                raise SpliceMisaligned(
                    f"draw of {n} byte(s) at {self.pos} crosses the splice boundary {self.start}")
            out = self.base[self.pos:self.pos + n]
            if len(out) < n:
                raise SeedExhausted("base seed exhausted before splice point")
            self.pos += n
        elif self.phase == self.ALT:
            try:
                out = self.alt.draw(n)
            except SeedExhausted as exc:
                raise SpliceMisaligned(f"donor decision bytes exhausted: {exc}") from exc
            self.alt_consumed += n
        else:
            if self.pos + n > len(self.base):
                raise SpliceMisaligned("base seed suffix exhausted after splice")
            out = self.base[self.pos:self.pos + n]
            self.pos += n
        self.consumed += n
        return out


# --- the stream ------------------------------------------------------------


class DecisionStream:
    """One direction of the seed protocol.

    Generation modes consume bytes (from a fixed seed or a seeded PRNG,
    recording everything so any run is replayable).  Parse mode emits the
    canonical encoding of observed values.  All modes share the choice
    event log; consecutive event spans tile the consumed or emitted bytes.
    """

    def __init__(self, mode: StreamMode, *, seed: bytes | None = None,
                 rng: random.Random | int | None = None,
                 evil_enabled: bool = True,
                 splice: tuple[tuple[int, int], object] | None = None):
        self.mode = mode
        self.evil_enabled = evil_enabled
        self.events: list[ChoiceEvent] = []
        self.node_id: int | None = None
        self._recorded = bytearray()
        self._lookahead_depth = 0
        self._lookahead_start = 0
        self._source = None
        if mode is StreamMode.GEN_FROM_SEED:
            if splice is not None:
                span, alt = splice
                if isinstance(alt, (bytes, bytearray)):
                    alt_source = _SeedSource(bytes(alt))
                else:
                    alt_source = _RandomSource(self._coerce_rng(alt))
                self._source = _SpliceSource(seed or b"", span, alt_source, self._log_switch)
            else:
                self._source = _SeedSource(seed or b"")
        elif mode is StreamMode.GEN_RANDOM:
            self._source = _RandomSource(self._coerce_rng(rng))
        elif mode is not StreamMode.PARSE_RECORD:
            raise ValueError(f"unsupported mode {mode}")

    @staticmethod
    def _coerce_rng(rng) -> random.Random:
        if isinstance(rng, random.Random):
            return rng
        return random.Random(rng)

    # -- bookkeeping ---------------------------------------------------

    @property
    def cursor(self) -> int:
        return len(self._recorded)

    @property
    def seed(self) -> bytes:
        """Bytes consumed (generation) or emitted (parse) so far."""
        return bytes(self._recorded)

    @property
    def splice_phase(self) -> int | None:
        if isinstance(self._source, _SpliceSource):
            return self._source.phase
        return None

    def _log(self, kind: str, start: int):
        if self._lookahead_depth == 0:
            self.events.append(ChoiceEvent(kind, start, len(self._recorded), self.node_id))

    def _log_switch(self):
        # phase transitions are zero-width markers, logged even inside
        # lookahead grouping so splice points stay visible
        self.events.append(ChoiceEvent(STREAM_SWITCH, self.cursor, self.cursor, self.node_id))

    def begin_lookahead(self):
        self._lookahead_depth += 1
        if self._lookahead_depth == 1:
            self._lookahead_start = self.cursor

    def end_lookahead(self):
        self._lookahead_depth -= 1
        if self._lookahead_depth == 0:
            self.events.append(
                ChoiceEvent(LOOKAHEAD_CALL, self._lookahead_start, self.cursor, self.node_id))

    def set_evil(self, enabled: bool) -> bool:
        previous = self.evil_enabled
        self.evil_enabled = bool(enabled)
        return previous

    # -- splice plumbing (driven by the engine) -------------------------

    def splice_node_started(self) -> bool:
        """True when the node starting now is the splice target."""
        if isinstance(self._source, _SpliceSource):
            self._source.enter_alt_if_at_boundary()
            return self._source.phase == _SpliceSource.ALT
        return False

    def splice_end_alt(self):
        if isinstance(self._source, _SpliceSource):
            self._source.end_alt()

    def splice_suffix_position(self) -> int:
        """Position within the base seed; only meaningful once the splice
        has moved to the suffix phase."""
        source = self._source
        return source.pos if isinstance(source, _SpliceSource) else 0

    def splice_alt_consumed(self) -> int | None:
        source = self._source
        return source.alt_consumed if isinstance(source, _SpliceSource) else None

    def splice_unfinished(self) -> bool:
        return (isinstance(self._source, _SpliceSource)
                and self._source.phase != _SpliceSource.SUFFIX)

    # -- generation primitives ------------------------------------------

    def _draw(self, n: int) -> bytes:
        out = self._source.draw(n)
        self._recorded.extend(out)
        return out

    def draw_raw(self, n: int, kind: str = RAW_BYTES) -> bytes:
        """Consume n verbatim bytes (codec payloads, length substitutes)."""
        start = self.cursor
        out = self._draw(n)
        self._log(kind, start)
        return out

    def evil_gate(self) -> bool:
        if not self.evil_enabled:
            return False
        start = self.cursor
        b0 = self._draw(1)[0]
        self._log(EVIL_GATE, start)
        return b0 % EVIL_MODULUS == EVIL_RESIDUE

    def choose_index(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"choose_index over {k} options")
        if k == 1 and not self.evil_enabled:
            return 0
        start = self.cursor
        if k <= 256:
            idx = self._draw(1)[0] % k
        elif k <= 65536:
            raw = self._draw(2)
            idx = int.from_bytes(raw, "little") % k
        else:
            raise ValueError(f"choose_index supports at most 65536 options, got {k}")
        self._log(INDEX_CHOICE, start)
        return idx

    def _choose_bounded(self, lo: int, hi: int) -> int:
        span = hi - lo + 1
        width = bounded_width(span)
        start = self.cursor
        raw = int.from_bytes(self._draw(width), "little")
        self._log(RAW_BYTES, start)
        return lo + raw % span

    def choose_bounded(self, lo: int, hi: int) -> int:
        """A value in [lo, hi], gate-free (codec payload lengths)."""
        return self._choose_bounded(lo, hi)

    def emit_bounded(self, value: int, lo: int, hi: int):
        """Canonical gate-free inverse of choose_bounded."""
        if not lo <= value <= hi:
            raise UnrepresentableValue(f"{value} outside bounded range [{lo}, {hi}]")
        width = bounded_width(hi - lo + 1)
        self.emit_raw((value - lo).to_bytes(width, "little"))

    def choose_value(self, spec: ChoiceSpec) -> tuple[str, object]:
        """One field value.  Returns ("value", v) for a decoded value or
        ("raw", bytes) when the seed supplies the field's file bytes
        verbatim (evil values and FULL-class unconstrained values)."""
        if self.evil_gate():
            return ("raw", self.draw_raw(spec.width))
        if spec.candidates:
            idx = self.choose_index(len(spec.candidates))
            return ("value", spec.candidates[idx])
        if spec.bounds is not None:
            lo, hi = spec.bounds
            return ("value", self._choose_bounded(lo, hi))
        start = self.cursor
        control = self._draw(1)[0]
        if control % 4 < SMALL_CLASSES:
            value = self._draw(1)[0]
            self._log(RAW_BYTES, start)
            return ("value", value)
        raw = self._draw(spec.width)
        self._log(RAW_BYTES, start)
        return ("raw", raw)

    def choose_token(self, spec: ChoiceSpec) -> bytes | None:
        """Token choice for lookahead-driven ordering.

        With both candidate arrays empty the answer is a deterministic
        None costing zero bytes.  Otherwise the evil gate may yield a
        random token of the full width.  Otherwise a branch byte below
        floor(pref_prob * 256) selects the preferred array (empty
        preferred means None: the stream declines to pick) and any other
        branch byte selects the possible array, falling back to preferred
        when possible is empty.
        """
        preferred = spec.preferred or []
        possible = spec.possible or []
        if not preferred and not possible:
            return None
        if self.evil_gate():
            return self.draw_raw(spec.width)
        threshold = int(spec.pref_prob * 256)
        start = self.cursor
        branch = self._draw(1)[0]
        self._log(RAW_BYTES, start)
        if branch < threshold:
            if not preferred:
                return None
            return preferred[self.choose_index(len(preferred))]
        pool = possible if possible else preferred
        return pool[self.choose_index(len(pool))]

    # -- parse-side inverses ----------------------------------------------

    def _emit(self, payload: bytes):
        self._recorded.extend(payload)

    def _emit_gate(self, evil: bool):
        if not self.evil_enabled:
            return
        start = self.cursor
        self._emit(bytes([EVIL_RESIDUE if evil else 0]))
        self._log(EVIL_GATE, start)

    def emit_index(self, k: int, idx: int):
        if k == 1 and not self.evil_enabled:
            return
        start = self.cursor
        if k <= 256:
            self._emit(bytes([idx]))
        else:
            self._emit(idx.to_bytes(2, "little"))
        self._log(INDEX_CHOICE, start)

    def emit_raw(self, payload: bytes, kind: str = RAW_BYTES):
        start = self.cursor
        self._emit(payload)
        self._log(kind, start)

    def emit_value(self, spec: ChoiceSpec, value: object, raw: bytes):
        """Emit the canonical encoding of an observed field value.

        `raw` is the field's file bytes, used for evil and FULL-class
        encodings.  Prefers the non-evil encoding whenever one exists.
        """
        if spec.candidates:
            if value in spec.candidates:
                self._emit_gate(False)
                self.emit_index(len(spec.candidates), spec.candidates.index(value))
                return
        elif spec.bounds is not None:
            lo, hi = spec.bounds
            if isinstance(value, int) and lo <= value <= hi:
                self._emit_gate(False)
                width = bounded_width(hi - lo + 1)
                self.emit_raw((value - lo).to_bytes(width, "little"))
                return
        else:
            self._emit_gate(False)
            if isinstance(value, int) and 0 <= value <= 255:
                self.emit_raw(bytes([0, value]))
            else:
                self.emit_raw(bytes([SMALL_CLASSES]) + raw)
            return
        if self.evil_enabled:
            self._emit_gate(True)
            self.emit_raw(raw)
            return
        raise UnrepresentableValue(
            f"value {value!r} has no encoding under the active constraints with evil disabled")

    def emit_token(self, spec: ChoiceSpec, observed: bytes | None) -> bytes | None:
        """Inverse of choose_token.  `observed` is the token found in the
        file, or None at end of input."""
        preferred = spec.preferred or []
        possible = spec.possible or []
        if not preferred and not possible:
            return None
        threshold = int(spec.pref_prob * 256)
        if observed is None:
            if preferred or threshold == 0:
                raise UnrepresentableValue(
                    "input ends where the template still requires a token")
            self._emit_gate(False)
            self.emit_raw(b"\x00")
            return None
        if threshold > 0 and observed in preferred:
            self._emit_gate(False)
            self.emit_raw(b"\x00")
            self.emit_index(len(preferred), preferred.index(observed))
            return observed
        pool = possible if possible else preferred
        if threshold < 256 and observed in pool:
            self._emit_gate(False)
            self.emit_raw(bytes([threshold]))
            self.emit_index(len(pool), pool.index(observed))
            return observed
        if self.evil_enabled:
            self._emit_gate(True)
            self.emit_raw(observed)
            return observed
        raise UnrepresentableValue(
            f"token {observed!r} is not among the allowed chunk tokens and evil is disabled")

    def events_json(self) -> list[dict]:
        return [event.to_json() for event in self.events]
