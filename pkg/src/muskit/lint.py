"""Score annotation linting: misalignment detection and metadata auto-correction.

Detectors run in a fixed order:

* ``OverlapOrNegative`` - non-positive durations or events overlapping the next one
* ``RedundantNote`` - more lyric-bearing notes than syllables in the sung text
* ``MissingLyric`` - a sounding, non-continuation note without lyric
* ``DurationMismatch`` - score length disagrees with the audio length
* ``PitchAnomaly`` - lyric-bearing note outside MIDI 36-84 (warning only)
* ``UncoveredPhoneme`` - an aligned phoneme that no score event accounts for

Corrections (snap, melisma merge, rest insertion, rescale) are applied in that
order so that the global rescale sees the final note topology.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from .errors import UncorrectableError
from .score import (
    ORDER_EPS,
    SNAP_SEC,
    NoteEvent,
    PhonemeAlignment,
    Score,
    rest,
    score_duration,
)

ISSUE_KINDS = (
    "OverlapOrNegative",
    "RedundantNote",
    "MissingLyric",
    "DurationMismatch",
    "PitchAnomaly",
    "UncoveredPhoneme",
)
SILENCE_LABELS = frozenset({"", "sil", "sp", "pau", "sil0", "spn", "ap", "br", "<sil>"})
PITCH_RANGE = (36, 84)

_DEFAULT_SYLLABIFIER = {"zh": "char", "jp": "char", "kr": "char", "en": "whitespace"}


def is_silence(label: str) -> bool:
    return label.strip().lower() in SILENCE_LABELS


@dataclass(frozen=True)
class Issue:
    kind: str
    location: object  # event index (int) or (start_sec, end_sec)
    severity: str
    detail: str

    def sort_key(self):
        loc = self.location
        t = (float(loc), 0.0) if isinstance(loc, int) else tuple(map(float, loc))
        return (0 if isinstance(loc, int) else 1, t, ISSUE_KINDS.index(self.kind))

    def to_dict(self) -> dict:
        loc = self.location if isinstance(self.location, int) else list(self.location)
        return {"kind": self.kind, "severity": self.severity, "location": loc, "detail": self.detail}


@dataclass(frozen=True)
class LintPolicy:
    duration_tolerance_sec: float = 0.1
    rescale_on_mismatch: bool = True
    melisma_merge: bool = True
    language_syllabifier: Optional[str] = None  # None picks by language

    def __post_init__(self):
        if self.duration_tolerance_sec < 0:
            raise ValueError("duration_tolerance_sec must be non-negative")
        if self.language_syllabifier not in (None, "char", "whitespace", "none"):
            raise ValueError(f"unknown syllabifier {self.language_syllabifier!r}")

    def syllabifier_for(self, language: str) -> str:
        return self.language_syllabifier or _DEFAULT_SYLLABIFIER.get(language, "whitespace")


@dataclass
class CorrectionEntry:
    issue: Optional[Issue]
    action: str
    before: Optional[NoteEvent] = None
    after: Optional[NoteEvent] = None

    def to_dict(self) -> dict:
        return {
            "issue": self.issue.to_dict() if self.issue else None,
            "action": self.action,
            "before": asdict(self.before) if self.before else None,
            "after": asdict(self.after) if self.after else None,
        }


@dataclass
class CorrectionLog:
    entries: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "unresolved": [i.to_dict() for i in self.unresolved],
        }


# --- syllabification ---------------------------------------------------------

def _split_chars(text):
    return [c for c in text if not c.isspace()]


def _split_whitespace(text):
    return text.split()


def _split_none(text):
    return [text.strip()] if text.strip() else []


SYLLABIFIERS = {"char": _split_chars, "whitespace": _split_whitespace, "none": _split_none}


def syllabify(lyric: str, language: str, scheme: Optional[str] = None) -> list[str]:
    """Split lyric text into syllables.

    >>> syllabify("你好", "zh")
    ['你', '好']
    >>> syllabify("hello world", "en")
    ['hello', 'world']
    """
    if scheme is None:
        scheme = _DEFAULT_SYLLABIFIER.get(language, "whitespace")
    return SYLLABIFIERS[scheme](lyric)


# --- detection -----------------------------------------------------------------

def _is_repeat(prev: NoteEvent, ev: NoteEvent) -> bool:
    """ev re-sings prev's syllable on the same pitch without a break."""
    return (
        ev.bears_lyric
        and prev.bears_lyric
        and ev.lyric != ""
        and ev.lyric == prev.lyric
        and ev.midi_pitch == prev.midi_pitch
        and abs(ev.onset_sec - prev.end_sec) <= SNAP_SEC
    )


def _redundant_candidates(events) -> list[int]:
    out = []
    prev = None
    for i, ev in enumerate(events):
        if prev is not None and _is_repeat(prev, ev):
            out.append(i)
        if not ev.is_rest:
            prev = ev
        else:
            prev = None
    return out


def _sung_text(events, scheme) -> list[str]:
    # repeated syllables on tied-through equal pitches are held, not re-sung
    syl = []
    prev = None
    for ev in events:
        if ev.bears_lyric and ev.lyric and not (prev is not None and _is_repeat(prev, ev)):
            syl.extend(SYLLABIFIERS[scheme](ev.lyric))
        prev = None if ev.is_rest else ev
    return syl


def _covered(t: float, spans) -> bool:
    return any(s - ORDER_EPS <= t < e + ORDER_EPS for s, e in spans)


def detect_issues(
    score: Score,
    alignment: Optional[PhonemeAlignment] = None,
    audio_duration_sec: Optional[float] = None,
    policy: LintPolicy = LintPolicy(),
) -> list[Issue]:
    """Report annotation defects; never raises on content."""
    events = score.events
    issues: list[Issue] = []

    for i, ev in enumerate(events):
        if not ev.duration_sec > 0:
            issues.append(Issue("OverlapOrNegative", i, "error", f"non-positive duration {ev.duration_sec:.6f}s"))
        if i + 1 < len(events):
            nxt = events[i + 1]
            if ev.end_sec > nxt.onset_sec + ORDER_EPS:
                issues.append(Issue(
                    "OverlapOrNegative", i + 1, "error",
                    f"starts {ev.end_sec - nxt.onset_sec:.6f}s before event {i} ends",
                ))

    scheme = policy.syllabifier_for(score.language)
    # empty-lyric notes are MissingLyric's business, not counted here
    n_bearing = sum(1 for ev in events if ev.bears_lyric and ev.lyric)
    n_syl = len(_sung_text(events, scheme))
    if n_bearing > n_syl:
        excess = n_bearing - n_syl
        for i in _redundant_candidates(events)[:excess]:
            issues.append(Issue(
                "RedundantNote", i, "error",
                f"{n_bearing} lyric-bearing notes for {n_syl} syllables",
            ))

    for i, ev in enumerate(events):
        if ev.bears_lyric and not ev.lyric:
            issues.append(Issue("MissingLyric", i, "error", f"note {ev.midi_pitch} has no lyric"))

    if audio_duration_sec is not None:
        sd = score_duration(score)
        if abs(sd - audio_duration_sec) > policy.duration_tolerance_sec:
            issues.append(Issue(
                "DurationMismatch", (0.0, max(sd, audio_duration_sec)), "error",
                f"score {sd:.3f}s vs audio {audio_duration_sec:.3f}s",
            ))

    lo, hi = PITCH_RANGE
    for i, ev in enumerate(events):
        if ev.bears_lyric and not lo <= ev.midi_pitch <= hi:
            issues.append(Issue("PitchAnomaly", i, "warning", f"midi {ev.midi_pitch} outside {lo}-{hi}"))

    if alignment is not None:
        note_spans = [(ev.onset_sec, ev.end_sec) for ev in events if not ev.is_rest]
        all_spans = [(ev.onset_sec, ev.end_sec) for ev in events]
        for s, e, label in alignment.intervals:
            if not label.strip():
                continue
            mid = 0.5 * (s + e)
            if is_silence(label):
                if not _covered(mid, all_spans):
                    issues.append(Issue("UncoveredPhoneme", (s, e), "error",
                                        f"silence {label!r} falls in a score gap"))
            elif not _covered(mid, note_spans):
                issues.append(Issue("UncoveredPhoneme", (s, e), "error",
                                    f"phoneme {label!r} lies under no note"))

    issues.sort(key=Issue.sort_key)
    return issues


# --- correction ----------------------------------------------------------------

def _snap(events, log, issues):
    out = list(events)
    for iss in issues:
        if iss.kind != "OverlapOrNegative":
            continue
        i = iss.location
        ev = out[i]
        if not ev.duration_sec > 0:
            raise UncorrectableError(f"event {i} has non-positive duration {ev.duration_sec}")
        prev = out[i - 1]
        overlap = prev.end_sec - ev.onset_sec
        new_dur = ev.onset_sec - prev.onset_sec
        if overlap > SNAP_SEC or new_dur <= 0:
            raise UncorrectableError(
                f"event {i} overlaps event {i - 1} by {overlap:.6f}s (> {SNAP_SEC}s snap limit)"
            )
        fixed = replace(prev, duration_sec=new_dur)
        log.entries.append(CorrectionEntry(iss, "snap-end", prev, fixed))
        out[i - 1] = fixed
    return out


def _melisma(events, log, issues):
    targets = {iss.location: iss for iss in issues if iss.kind in ("RedundantNote", "MissingLyric")}
    out = list(events)
    for i in sorted(targets):
        ev = out[i]
        if not ev.bears_lyric:
            continue
        prev = out[i - 1] if i > 0 else None
        contiguous = prev is not None and not prev.is_rest and abs(ev.onset_sec - prev.end_sec) <= SNAP_SEC
        if not ev.lyric and contiguous:
            action = "melisma-merge"
            fixed = replace(ev, lyric="", is_slur_continuation=True)
        elif ev.lyric and contiguous and _is_repeat(prev, ev):
            action = "melisma-merge"
            fixed = replace(ev, lyric="", is_slur_continuation=True)
        elif not ev.lyric:
            # nothing to extend: an unsung note with no syllable becomes silence
            action = "rest-convert"
            fixed = rest(ev.onset_sec, ev.duration_sec)
        else:
            continue
        log.entries.append(CorrectionEntry(targets[i], action, ev, fixed))
        out[i] = fixed
    return out


def _fill_silence(events, log, issues, alignment):
    labels = {(s, e): lab for s, e, lab in alignment.intervals} if alignment else {}
    out = list(events)
    for iss in issues:
        if iss.kind != "UncoveredPhoneme":
            continue
        s, e = iss.location
        if not is_silence(labels.get((s, e), "x")):
            continue
        # the gap between neighbouring events that contains the phoneme midpoint
        mid = 0.5 * (s + e)
        gap_start, gap_end = 0.0, None
        for ev in out:
            if ev.end_sec <= mid + ORDER_EPS:
                gap_start = max(gap_start, ev.end_sec)
            elif ev.onset_sec > mid and gap_end is None:
                gap_end = ev.onset_sec
        if gap_end is None:
            gap_end = max(e, gap_start)
        if gap_end - gap_start <= ORDER_EPS:
            continue
        new = rest(gap_start, gap_end - gap_start)
        log.entries.append(CorrectionEntry(iss, "rest-insert", None, new))
        out.append(new)
        out.sort(key=lambda ev: ev.onset_sec)
    return out


def _rescale(events, ratio):
    return [replace(ev, onset_sec=ev.onset_sec * ratio, duration_sec=ev.duration_sec * ratio) for ev in events]


def auto_correct(
    score: Score,
    alignment: Optional[PhonemeAlignment] = None,
    audio_duration_sec: Optional[float] = None,
    policy: LintPolicy = LintPolicy(),
) -> tuple[Score, CorrectionLog]:
    """Repair what :func:`detect_issues` finds and log every change.

    Returns the corrected score and a :class:`CorrectionLog`; issues that no
    rule can repair are listed in ``log.unresolved``. Raises
    :class:`UncorrectableError` for overlaps longer than 1 ms.
    """
    log = CorrectionLog()
    issues = detect_issues(score, alignment, audio_duration_sec, policy)
    if not issues:
        return score, log

    events = _snap(score.events, log, issues)
    if policy.melisma_merge:
        issues = detect_issues(score.with_events(events), alignment, audio_duration_sec, policy)
        events = _melisma(events, log, issues)
    issues = detect_issues(score.with_events(events), alignment, audio_duration_sec, policy)
    events = _fill_silence(events, log, issues, alignment)

    if audio_duration_sec is not None and policy.rescale_on_mismatch:
        sd = score_duration(score.with_events(events))
        if sd > 0 and abs(sd - audio_duration_sec) > policy.duration_tolerance_sec:
            iss = next(i for i in detect_issues(score.with_events(events), None, audio_duration_sec, policy)
                       if i.kind == "DurationMismatch")
            ratio = audio_duration_sec / sd
            events = _rescale(events, ratio)
            log.entries.append(CorrectionEntry(iss, f"rescale x{ratio:.9f}"))

    fixed = score.with_events(events)
    log.unresolved = [
        i for i in detect_issues(fixed, alignment, audio_duration_sec, policy) if i.severity == "error"
    ]
    return fixed, log
