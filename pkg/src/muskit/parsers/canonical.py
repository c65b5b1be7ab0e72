"""Canonical score JSON, the interchange format between every stage."""

from __future__ import annotations

import json
import math

from ..errors import JsonSyntaxError, MuskitError, SchemaError
from ..score import LANGUAGES, NoteEvent, Score


def score_to_dict(score: Score) -> dict:
    return {
        "tempo_bpm": score.tempo_bpm,
        "language": score.language,
        "events": [
            {
                "lyric": ev.lyric,
                "midi": ev.midi_pitch,
                "onset": ev.onset_sec,
                "duration": ev.duration_sec,
                "slur": ev.is_slur_continuation,
            }
            for ev in score.events
        ],
    }


def serialize_score(score: Score) -> str:
    # repr-precision floats make the round trip exact
    return json.dumps(score_to_dict(score), ensure_ascii=False, indent=1) + "\n"


def _number(obj, key, where):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{where}: field {key!r} must be a finite number")
    return float(v)


def score_from_dict(doc) -> Score:
    if not isinstance(doc, dict):
        raise SchemaError("score document must be a JSON object")
    tempo = _number(doc, "tempo_bpm", "score")
    if tempo <= 0:
        raise SchemaError("score: tempo_bpm must be positive")
    lang = doc.get("language")
    if lang not in LANGUAGES:
        raise SchemaError(f"score: language must be one of {LANGUAGES}")
    raw_events = doc.get("events")
    if not isinstance(raw_events, list):
        raise SchemaError("score: 'events' must be a list")

    events = []
    for i, e in enumerate(raw_events):
        where = f"events[{i}]"
        if not isinstance(e, dict):
            raise SchemaError(f"{where}: must be an object")
        for key in ("lyric", "midi", "onset", "duration", "slur"):
            if key not in e:
                raise SchemaError(f"{where}: missing field {key!r}")
        if not isinstance(e["lyric"], str):
            raise SchemaError(f"{where}: lyric must be a string")
        midi = e["midi"]
        if midi is not None and (isinstance(midi, bool) or not isinstance(midi, int)):
            raise SchemaError(f"{where}: midi must be an integer or null")
        if not isinstance(e["slur"], bool):
            raise SchemaError(f"{where}: slur must be a boolean")
        onset = _number(e, "onset", where)
        duration = _number(e, "duration", where)
        if onset < 0:
            raise SchemaError(f"{where}: negative onset")
        if duration <= 0:
            raise SchemaError(f"{where}: duration must be positive")
        try:
            events.append(NoteEvent(e["lyric"], midi, onset, duration, e["slur"]))
        except MuskitError as exc:
            raise SchemaError(f"{where}: {exc}") from exc

    try:
        return Score(events, tempo, lang, "canonical").validate()
    except MuskitError as exc:
        raise SchemaError(str(exc)) from exc


def parse_canonical(document) -> Score:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise JsonSyntaxError(str(exc)) from exc
    return score_from_dict(doc)
