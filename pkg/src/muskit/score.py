"""Canonical score model: timed note events with lyric, pitch and duration.

Time is kept in float seconds throughout. Rests are explicit events whose
``midi_pitch`` is ``None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .errors import OverlapError, RangeError, ScoreInvariantError

REST = None
LANGUAGES = ("zh", "jp", "en", "kr", "other")
SOURCE_FORMATS = ("musicxml", "midi", "textgrid", "canonical")

# below this a gap/overlap is treated as quantization noise
SNAP_SEC = 1e-3
ORDER_EPS = 1e-6


@dataclass(frozen=True)
class NoteEvent:
    lyric: str
    midi_pitch: Optional[int]
    onset_sec: float
    duration_sec: float
    is_slur_continuation: bool = False

    def __post_init__(self):
        if self.midi_pitch is not None:
            if isinstance(self.midi_pitch, bool) or not isinstance(self.midi_pitch, int):
                raise ScoreInvariantError(f"midi pitch must be an int, got {self.midi_pitch!r}")
            if not 0 <= self.midi_pitch <= 127:
                raise RangeError(f"midi pitch {self.midi_pitch} outside 0-127")
        elif self.lyric or self.is_slur_continuation:
            raise ScoreInvariantError("a rest cannot carry a lyric or be a slur continuation")
        if self.is_slur_continuation and self.lyric:
            raise ScoreInvariantError("slur continuation notes carry no lyric")
        if not math.isfinite(self.onset_sec) or self.onset_sec < 0:
            raise ScoreInvariantError(f"onset must be finite and non-negative, got {self.onset_sec}")
        if not math.isfinite(self.duration_sec):
            raise ScoreInvariantError("duration must be finite")

    @property
    def is_rest(self) -> bool:
        return self.midi_pitch is None

    @property
    def end_sec(self) -> float:
        return self.onset_sec + self.duration_sec

    @property
    def bears_lyric(self) -> bool:
        """True for sounding notes that start a new syllable."""
        return not self.is_rest and not self.is_slur_continuation


def rest(onset: float, duration: float) -> NoteEvent:
    return NoteEvent("", REST, onset, duration)


@dataclass(frozen=True)
class Score:
    events: tuple = ()
    tempo_bpm: float = 120.0
    language: str = "other"
    source_format: str = "canonical"

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.language not in LANGUAGES:
            raise ScoreInvariantError(f"unknown language tag {self.language!r}")
        if self.source_format not in SOURCE_FORMATS:
            raise ScoreInvariantError(f"unknown source format {self.source_format!r}")
        if not (self.tempo_bpm > 0 and math.isfinite(self.tempo_bpm)):
            raise ScoreInvariantError("tempo must be positive")

    def __len__(self):
        return len(self.events)

    def with_events(self, events: Sequence[NoteEvent]) -> "Score":
        return replace(self, events=tuple(events))

    def validate(self) -> "Score":
        """Raise :class:`ScoreInvariantError` unless durations are positive and
        events are sorted and non-overlapping. Returns ``self``."""
        prev = None
        for i, ev in enumerate(self.events):
            if not ev.duration_sec > 0:
                raise ScoreInvariantError(f"event {i} has non-positive duration {ev.duration_sec}")
            if prev is not None and prev.end_sec > ev.onset_sec + ORDER_EPS:
                raise ScoreInvariantError(f"event {i} overlaps or precedes event {i - 1}")
            prev = ev
        return self


@dataclass(frozen=True)
class PhonemeAlignment:
    intervals: tuple = field(default=())

    def __post_init__(self):
        ivs = tuple((float(s), float(e), str(lab)) for s, e, lab in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        prev_end = -math.inf
        for i, (s, e, _) in enumerate(ivs):
            if not s < e:
                raise ScoreInvariantError(f"interval {i} has start >= end")
            if s < prev_end - ORDER_EPS:
                raise ScoreInvariantError(f"interval {i} overlaps or is out of order")
            prev_end = e

    def __len__(self):
        return len(self.intervals)


def midi_to_hz(midi_pitch: int) -> float:
    if not 0 <= midi_pitch <= 127:
        raise RangeError(f"midi pitch {midi_pitch} outside 0-127")
    return 440.0 * 2.0 ** ((midi_pitch - 69) / 12.0)


def score_duration(score: Score) -> float:
    if not score.events:
        return 0.0
    last = score.events[-1]
    return last.onset_sec + last.duration_sec


def _continues(prev: NoteEvent, ev: NoteEvent) -> bool:
    # a slur continuation at equal pitch that starts where prev ends is a tie
    return (
        ev.is_slur_continuation
        and not prev.is_rest
        and ev.midi_pitch == prev.midi_pitch
        and abs(ev.onset_sec - prev.end_sec) <= SNAP_SEC
    )


def normalize_score(raw: Score) -> Score:
    """Canonicalize a score so that outputs of different parsers compare equal.

    Ties (equal-pitch slur continuations starting where the previous note
    ends) are merged, adjacent rests are merged, gaps up to 1 ms are closed by
    stretching the earlier event and longer gaps (including a leading gap) are
    filled with rests. Overlaps up to 1 ms are trimmed; a longer overlap between
    two sounding notes raises :class:`OverlapError`.
    """
    for i, ev in enumerate(raw.events):
        if not ev.duration_sec > 0:
            raise ScoreInvariantError(f"event {i} has non-positive duration")

    out: list[NoteEvent] = []
    for ev in sorted(raw.events, key=lambda e: e.onset_sec):
        while out:
            prev = out[-1]
            gap = ev.onset_sec - prev.end_sec
            if gap >= -SNAP_SEC:
                break
            if not prev.is_rest and not ev.is_rest:
                raise OverlapError(
                    f"notes at {prev.onset_sec:.6f}s and {ev.onset_sec:.6f}s overlap by {-gap:.6f}s"
                )
            if ev.is_rest:
                ev = rest(prev.end_sec, ev.end_sec - prev.end_sec)
                break
            # sounding note cuts into a preceding rest
            if ev.onset_sec - prev.onset_sec > SNAP_SEC:
                out[-1] = replace(prev, duration_sec=ev.onset_sec - prev.onset_sec)
            else:
                out.pop()
        if ev.duration_sec <= 0:
            continue

        if not out:
            if ev.onset_sec > SNAP_SEC:
                out.append(rest(0.0, ev.onset_sec))
            else:
                ev = replace(ev, onset_sec=0.0, duration_sec=ev.end_sec)
        else:
            prev = out[-1]
            gap = ev.onset_sec - prev.end_sec
            if gap > SNAP_SEC:
                out.append(rest(prev.end_sec, gap))
            elif gap != 0.0:
                new_dur = ev.onset_sec - prev.onset_sec
                if new_dur <= 0:
                    raise OverlapError(f"events collide at {ev.onset_sec:.6f}s")
                out[-1] = replace(prev, duration_sec=new_dur)

        prev = out[-1] if out else None
        if prev is not None and (_continues(prev, ev) or (prev.is_rest and ev.is_rest)):
            out[-1] = replace(prev, duration_sec=ev.end_sec - prev.onset_sec)
        else:
            out.append(ev)
    return raw.with_events(out)
