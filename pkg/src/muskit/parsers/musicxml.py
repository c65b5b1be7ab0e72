"""MusicXML (score-partwise) reader for monophonic vocal lines.

Only the first part and its first voice are read. Supported elements are
``divisions``, ``note``/``pitch``/``duration``/``rest``, ``lyric``, ``tie``,
``slur``, ``backup``/``forward`` and tempo from ``sound@tempo``.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from ..errors import MissingDivisionsError, UnsupportedScoreError, XmlSyntaxError
from ..score import NoteEvent, Score

_STEP = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
DEFAULT_TEMPO = 120.0


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _child(el, name):
    for c in el:
        if _local(c.tag) == name:
            return c
    return None


def _children(el, name):
    return [c for c in el if _local(c.tag) == name]


def _text(el, name, default=None):
    c = _child(el, name)
    if c is None or c.text is None:
        return default
    return c.text.strip()


def _pitch_to_midi(pitch_el) -> int:
    step = _text(pitch_el, "step")
    octave = _text(pitch_el, "octave")
    if step is None or octave is None or step.upper() not in _STEP:
        raise UnsupportedScoreError("pitch element lacks step/octave")
    alter = float(_text(pitch_el, "alter", "0"))
    return int(round(12 * (int(octave) + 1) + _STEP[step.upper()] + alter))


def _lyric(note_el) -> tuple[str, bool]:
    """Return (text, extend_only) from the first verse lyric."""
    lyrics = _children(note_el, "lyric")
    if not lyrics:
        return "", False
    first = lyrics[0]
    for ly in lyrics:
        if ly.get("number", "1") == "1":
            first = ly
            break
    texts = [t.text or "" for t in first.iter() if _local(t.tag) == "text"]
    text = "".join(texts).strip()
    return text, (not text and _child(first, "extend") is not None)


def _tempo_of(el):
    for sub in el.iter():
        if _local(sub.tag) == "sound" and sub.get("tempo"):
            return float(sub.get("tempo"))
    return None


def parse_musicxml(document, language: str = "other") -> Score:
    """Parse a score-partwise MusicXML document into a :class:`Score`.

    Durations convert as ``duration / divisions * 60 / tempo`` seconds. Tied
    notes of equal pitch are merged into one event; notes inside a slur (or
    carrying only a lyric extender) without their own lyric become slur
    continuations.
    """
    if isinstance(document, str):
        document = document.encode("utf-8")
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise XmlSyntaxError(str(exc)) from exc
    if _local(root.tag) != "score-partwise":
        raise UnsupportedScoreError(f"root element <{_local(root.tag)}> is not score-partwise")
    parts = _children(root, "part")
    if not parts:
        raise UnsupportedScoreError("score has no <part>")
    part = parts[0]

    divisions = None
    tempo = None
    first_tempo = None
    voice = None
    in_slur = False
    tie_open = False
    events: list[NoteEvent] = []
    measure_start = 0.0

    def sec(div_count):
        if divisions is None:
            raise MissingDivisionsError("duration encountered before <divisions>")
        return div_count / divisions * 60.0 / (tempo or DEFAULT_TEMPO)

    for measure in _children(part, "measure"):
        pos = 0.0
        measure_len = 0.0
        for el in measure:
            tag = _local(el.tag)
            if tag == "attributes":
                d = _text(el, "divisions")
                if d is not None:
                    divisions = float(d)
                    if divisions <= 0:
                        raise MissingDivisionsError("divisions must be positive")
            elif tag in ("direction", "sound"):
                t = float(el.get("tempo")) if tag == "sound" and el.get("tempo") else _tempo_of(el)
                if t:
                    tempo = t
                    if first_tempo is None:
                        first_tempo = t
            elif tag == "backup":
                pos -= sec(float(_text(el, "duration", "0")))
            elif tag == "forward":
                pos += sec(float(_text(el, "duration", "0")))
                measure_len = max(measure_len, pos)
            elif tag == "note":
                if _child(el, "grace") is not None or _child(el, "cue") is not None:
                    continue
                if _child(el, "chord") is not None:
                    continue
                el_voice = _text(el, "voice", "1")
                if voice is None:
                    voice = el_voice
                dur_text = _text(el, "duration")
                if dur_text is None:
                    continue
                dur = sec(float(dur_text))
                onset = measure_start + pos
                pos += dur
                measure_len = max(measure_len, pos)
                if el_voice != voice or dur <= 0:
                    continue

                ties = {t.get("type") for t in _children(el, "tie")}
                for n in el.iter():
                    if _local(n.tag) == "tied":
                        ties.add(n.get("type"))
                slurs = [n.get("type") for n in el.iter() if _local(n.tag) == "slur"]

                if _child(el, "rest") is not None:
                    events.append(NoteEvent("", None, onset, dur))
                    in_slur = tie_open = False
                    continue
                pitch_el = _child(el, "pitch")
                if pitch_el is None:
                    continue
                midi = _pitch_to_midi(pitch_el)
                text, extend_only = _lyric(el)

                prev = events[-1] if events else None
                if (
                    "stop" in ties
                    and tie_open
                    and prev is not None
                    and prev.midi_pitch == midi
                    and not text
                ):
                    events[-1] = NoteEvent(
                        prev.lyric, midi, prev.onset_sec, onset + dur - prev.onset_sec,
                        prev.is_slur_continuation,
                    )
                else:
                    slur_cont = not text and prev is not None and not prev.is_rest and (
                        in_slur or extend_only
                    )
                    events.append(NoteEvent(text, midi, onset, dur, slur_cont))
                tie_open = "start" in ties
                if "start" in slurs:
                    in_slur = True
                if "stop" in slurs and "start" not in slurs:
                    in_slur = False
        measure_start += measure_len

    events.sort(key=lambda e: e.onset_sec)
    score = Score(events, first_tempo or DEFAULT_TEMPO, language, "musicxml")
    return score.validate()
