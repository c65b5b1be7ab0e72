"""Standard MIDI File (format 0/1) reader producing a monophonic Score."""

from __future__ import annotations

import bisect
import struct
import warnings
from dataclasses import dataclass, field

from ..errors import DanglingNoteError, MidiSyntaxError, UnsupportedFormatError
from ..score import NoteEvent, Score

DEFAULT_US_PER_QUARTER = 500000
LYRIC_WINDOW_TICKS = 1

MELISMA_MARKS = frozenset({"-", "+", "~"})


class LyricDiscardedWarning(UserWarning):
    """A lyric meta event had no note-on within the attachment window."""


@dataclass
class TempoMap:
    """Piecewise-constant tempo: ``changes`` is a list of (tick, us_per_quarter)."""

    ppq: int
    changes: list = field(default_factory=lambda: [(0, DEFAULT_US_PER_QUARTER)])

    def __post_init__(self):
        changes = sorted(self.changes)
        dedup: dict[int, int] = {}
        for tick, us in changes:
            dedup[tick] = us  # last change at a tick wins
        if 0 not in dedup:
            dedup[0] = DEFAULT_US_PER_QUARTER
        self.changes = sorted(dedup.items())
        self._ticks = [t for t, _ in self.changes]
        # seconds elapsed at each change point
        self._secs = [0.0]
        for (t0, us0), (t1, _) in zip(self.changes, self.changes[1:]):
            self._secs.append(self._secs[-1] + (t1 - t0) * us0 / (self.ppq * 1e6))

    def seconds(self, tick: int) -> float:
        i = bisect.bisect_right(self._ticks, tick) - 1
        t0, us = self.changes[i]
        return self._secs[i] + (tick - t0) * us / (self.ppq * 1e6)

    @property
    def initial_bpm(self) -> float:
        return 60e6 / self.changes[0][1]


def _read_varlen(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise MidiSyntaxError("truncated variable-length quantity")
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise MidiSyntaxError("variable-length quantity longer than 4 bytes")


def _chunks(data: bytes):
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise MidiSyntaxError("truncated chunk header")
        kind = data[pos:pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        start = pos + 8
        if start + length > len(data):
            raise MidiSyntaxError(f"chunk {kind!r} runs past end of file")
        yield kind, start, start + length
        pos = start + length


def _track_events(data: bytes, start: int, end: int):
    """Yield (tick, kind, payload) for one MTrk; kind is 'note_on', 'note_off' or a meta type int."""
    tick = 0
    pos = start
    status = None
    while pos < end:
        delta, pos = _read_varlen(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiSyntaxError("event truncated after delta time")
        b = data[pos]
        if b == 0xFF:
            if pos + 2 > end:
                raise MidiSyntaxError("truncated meta event")
            meta_type = data[pos + 1]
            length, pos = _read_varlen(data, pos + 2, end)
            if pos + length > end:
                raise MidiSyntaxError("meta event runs past track end")
            yield tick, meta_type, data[pos:pos + length]
            pos += length
            if meta_type == 0x2F:
                return
            continue
        if b in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos + 1, end)
            pos += length
            continue
        if b & 0x80:
            status = b
            pos += 1
        elif status is None:
            raise MidiSyntaxError(f"running status without a prior status byte at offset {pos}")
        hi = status & 0xF0
        nbytes = 1 if hi in (0xC0, 0xD0) else 2
        if pos + nbytes > end:
            raise MidiSyntaxError("channel message truncated")
        args = data[pos:pos + nbytes]
        pos += nbytes
        if hi == 0x90 and args[1] > 0:
            yield tick, "note_on", args[0]
        elif hi == 0x80 or (hi == 0x90 and args[1] == 0):
            yield tick, "note_off", args[0]
    raise MidiSyntaxError("track ended without End-of-Track")


def _decode_text(payload: bytes) -> str:
    try:
        return payload.decode("utf-8").strip()
    except UnicodeDecodeError:
        return payload.decode("latin-1").strip()


def parse_midi(document: bytes, language: str = "other") -> Score:
    """Parse a Standard MIDI File into a monophonic :class:`Score`.

    Notes come from the first track that contains any note-on. Lyric meta
    events (0x05) attach to the nearest note-on within one tick; when the file
    has no lyric events, text events (0x01) are used instead. Lyrics that
    cannot be attached are dropped with a :class:`LyricDiscardedWarning`.
    Overlapping notes are reduced to a monophonic line by cutting the earlier
    note at the later onset. Gaps are left as gaps (no REST events).
    """
    if document[:4] != b"MThd":
        raise MidiSyntaxError("missing MThd header")
    chunks = list(_chunks(document))
    kind, hs, he = chunks[0]
    if he - hs < 6:
        raise MidiSyntaxError("header chunk too short")
    fmt, ntracks, division = struct.unpack(">HHh", document[hs:hs + 6])
    if fmt == 2:
        raise UnsupportedFormatError("SMF format 2 is not supported")
    if fmt not in (0, 1):
        raise MidiSyntaxError(f"unknown SMF format {fmt}")
    if division <= 0:
        raise UnsupportedFormatError("SMPTE time division is not supported")

    tracks = [list(_track_events(document, s, e)) for k, s, e in chunks[1:] if k == b"MTrk"]

    tempo_changes = []
    lyrics, texts = [], []
    for tr in tracks:
        for tick, kind, payload in tr:
            if kind == 0x51:
                if len(payload) != 3:
                    raise MidiSyntaxError("tempo meta event must have 3 data bytes")
                us = int.from_bytes(payload, "big")
                if us == 0:
                    raise MidiSyntaxError("zero tempo")
                tempo_changes.append((tick, us))
            elif kind == 0x05:
                lyrics.append((tick, _decode_text(payload)))
            elif kind == 0x01:
                texts.append((tick, _decode_text(payload)))
    tmap = TempoMap(division, tempo_changes)

    note_track = next((tr for tr in tracks if any(k == "note_on" for _, k, _ in tr)), None)
    if note_track is None:
        return Score((), tmap.initial_bpm, language, "midi")

    open_notes: dict[int, list[int]] = {}
    spans = []  # (on_tick, off_tick, pitch)
    for tick, kind, payload in note_track:
        if kind == "note_on":
            open_notes.setdefault(payload, []).append(tick)
        elif kind == "note_off":
            pending = open_notes.get(payload)
            if pending:
                on = pending.pop(0)
                if tick > on:
                    spans.append((on, tick, payload))
    for pitch, pending in open_notes.items():
        if pending:
            raise DanglingNoteError(pitch, pending[0])
    spans.sort()

    mono = []
    for on, off, pitch in spans:
        if mono and mono[-1][0] == on:
            continue  # chord: keep the first note
        if mono and mono[-1][1] > on:
            mono[-1] = (mono[-1][0], on, mono[-1][2])
        mono.append((on, off, pitch))

    attach: dict[int, str] = {}
    onsets = [on for on, _, _ in mono]
    for tick, text in (lyrics if lyrics else texts):
        if not text:
            continue
        i = bisect.bisect_left(onsets, tick)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(onsets) and abs(onsets[j] - tick) <= LYRIC_WINDOW_TICKS:
                if best is None or abs(onsets[j] - tick) < abs(onsets[best] - tick):
                    best = j
        if best is None or best in attach:
            warnings.warn(
                f"lyric {text!r} at tick {tick} has no free note-on within "
                f"{LYRIC_WINDOW_TICKS} tick; discarded",
                LyricDiscardedWarning,
                stacklevel=2,
            )
            continue
        attach[best] = text

    events = []
    for idx, (on, off, pitch) in enumerate(mono):
        t0, t1 = tmap.seconds(on), tmap.seconds(off)
        text = attach.get(idx, "")
        if text in MELISMA_MARKS and events:
            events.append(NoteEvent("", pitch, t0, t1 - t0, True))
        else:
            events.append(NoteEvent(text, pitch, t0, t1 - t0))
    return Score(events, tmap.initial_bpm, language, "midi").validate()
