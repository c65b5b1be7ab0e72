import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muskit.errors import OverlapError, RangeError, ScoreInvariantError
from muskit.score import (
    NoteEvent,
    PhonemeAlignment,
    Score,
    midi_to_hz,
    normalize_score,
    rest,
    score_duration,
)

from conftest import note, scores


def lyrics(score):
    return "".join(ev.lyric for ev in score.events if ev.lyric)


def test_rest_carries_no_lyric():
    with pytest.raises(ScoreInvariantError):
        NoteEvent("la", None, 0.0, 1.0)
    with pytest.raises(ScoreInvariantError):
        NoteEvent("", None, 0.0, 1.0, True)
    assert rest(0.0, 1.0).is_rest


def test_event_field_checks():
    with pytest.raises(RangeError):
        NoteEvent("a", 128, 0.0, 1.0)
    with pytest.raises(ScoreInvariantError):
        NoteEvent("a", 60, -0.5, 1.0)
    with pytest.raises(ScoreInvariantError):
        NoteEvent("a", 60, 0.0, math.nan)
    with pytest.raises(ScoreInvariantError):
        Score((), language="de")


def test_validate_rejects_overlap():
    s = Score([note("a", 60, 0, 1), note("b", 62, 0.5, 1)])
    with pytest.raises(ScoreInvariantError):
        s.validate()


def test_midi_to_hz_reference_points():
    assert midi_to_hz(69) == 440.0
    assert midi_to_hz(57) == 220.0
    assert midi_to_hz(60) == pytest.approx(261.6256, abs=1e-3)
    with pytest.raises(RangeError):
        midi_to_hz(-1)


def test_midi_octave_doubling():
    for m in range(0, 116):
        assert midi_to_hz(m + 12) == pytest.approx(2 * midi_to_hz(m), rel=1e-12)


def test_score_duration():
    assert score_duration(Score()) == 0.0
    assert score_duration(Score([note("a", 60, 0, 2.5)])) == 2.5
    assert score_duration(Score([note("a", 60, 0, 1), rest(1, 0.5)])) == 1.5


def test_normalize_empty():
    assert normalize_score(Score()).events == ()


def test_normalize_merges_tie():
    s = Score([note("do", 60, 0.0, 0.5), note("", 60, 0.5, 0.5, slur=True)])
    out = normalize_score(s)
    assert out.events == (note("do", 60, 0.0, 1.0),)


def test_normalize_keeps_melisma_at_new_pitch():
    s = Score([note("do", 60, 0.0, 0.5), note("", 62, 0.5, 0.5, slur=True)])
    assert normalize_score(s).events == s.events


def test_normalize_fills_gap_with_rest():
    s = Score([note("a", 60, 0.0, 0.5), note("b", 62, 0.8, 0.2)])
    out = normalize_score(s).events
    assert len(out) == 3
    assert out[1].is_rest
    assert out[1].onset_sec == 0.5
    assert out[1].duration_sec == pytest.approx(0.3, abs=1e-12)


def test_normalize_leading_gap_and_snap():
    s = Score([note("a", 60, 0.25, 0.5), note("b", 62, 0.7505, 0.25)])
    out = normalize_score(s).events
    assert out[0] == rest(0.0, 0.25)
    # a 0.5 ms gap is quantization noise: the earlier note is stretched
    assert out[1].end_sec == pytest.approx(0.7505)
    assert len(out) == 3


def test_normalize_merges_adjacent_rests():
    s = Score([rest(0, 0.5), rest(0.5, 0.5), note("a", 60, 1.0, 1.0)])
    out = normalize_score(s).events
    assert out[0] == rest(0.0, 1.0)


def test_normalize_overlap_raises():
    s = Score([note("a", 60, 0.0, 1.0), note("b", 62, 0.5, 1.0)])
    with pytest.raises(OverlapError):
        normalize_score(s)


def test_normalize_small_overlap_is_trimmed():
    s = Score([note("a", 60, 0.0, 1.0005), note("b", 62, 1.0, 1.0)])
    out = normalize_score(s).events
    assert out[0].end_sec == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(scores())
def test_normalize_idempotent_and_lyric_preserving(s):
    once = normalize_score(s)
    assert normalize_score(once) == once
    assert lyrics(once) == lyrics(s)
    once.validate()


@settings(max_examples=100, deadline=None)
@given(scores(), st.floats(0.002, 0.5))
def test_normalize_output_is_gapless(s, shift):
    # push every event later to open gaps; normalization must close them again
    moved = s.with_events(
        [NoteEvent(e.lyric, e.midi_pitch, e.onset_sec + shift * (i + 1), e.duration_sec, e.is_slur_continuation)
         for i, e in enumerate(s.events)]
    )
    out = normalize_score(moved).events
    assert not out or out[0].onset_sec == 0.0
    for a, b in zip(out, out[1:]):
        assert b.onset_sec == pytest.approx(a.end_sec, abs=1e-9)


def test_alignment_invariants():
    PhonemeAlignment([(0, 0.5, "a"), (0.5, 1.0, "")])
    with pytest.raises(ScoreInvariantError):
        PhonemeAlignment([(0.5, 1.0, "a"), (0, 0.5, "b")])
    with pytest.raises(ScoreInvariantError):
        PhonemeAlignment([(0.5, 0.5, "a")])
