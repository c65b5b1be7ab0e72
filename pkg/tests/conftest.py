import numpy as np
import pytest
from hypothesis import strategies as st

from muskit.audio import AudioBuffer
from muskit.score import LANGUAGES, NoteEvent, Score

SR = 24000


def sine(freq, seconds=1.0, sr=SR, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t + phase), sr)


@st.composite
def scores(draw, max_events=12):
    """Valid, contiguous scores with exactly representable times (multiples of 1/64 s)."""
    n = draw(st.integers(0, max_events))
    t = 0
    events = []
    prev_sounding = False
    for _ in range(n):
        d = draw(st.integers(1, 64))
        kind = draw(st.sampled_from(["note", "note", "rest", "slur"]))
        onset, dur = t / 64, d / 64
        if kind == "rest":
            events.append(NoteEvent("", None, onset, dur))
            prev_sounding = False
        elif kind == "slur" and prev_sounding:
            events.append(NoteEvent("", draw(st.integers(0, 127)), onset, dur, True))
        else:
            lyric = draw(st.text(alphabet="abcdeé你好ら", min_size=1, max_size=4))
            events.append(NoteEvent(lyric, draw(st.integers(0, 127)), onset, dur))
            prev_sounding = True
        t += d
    tempo = draw(st.floats(20, 300, allow_nan=False))
    return Score(events, tempo, draw(st.sampled_from(LANGUAGES)), "canonical")


def note(lyric, pitch, onset, dur, slur=False):
    return NoteEvent(lyric, pitch, onset, dur, slur)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
