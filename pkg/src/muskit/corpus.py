"""Synthetic singing corpus: scores, rendered audio, alignments and manifests.

The renderer is a harmonic oscillator following the score's pitch line, with
a per-syllable harmonic recipe so that different lyrics produce different
spectra. It exists to give tests and demos ground truth, not to sound good.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .audio import AudioBuffer, write_wav
from .parsers.canonical import serialize_score
from .parsers.textgrid import write_textgrid
from .score import NoteEvent, PhonemeAlignment, Score, midi_to_hz, rest, score_duration

SYLLABLES = {
    "zh": list("你好我的天空月亮星光明心"),
    "jp": list("さくらはなゆめそらうたこ"),
    "kr": list("사랑하늘별꿈노래바다"),
    "en": ["la", "do", "re", "mi", "so", "ti", "moon", "light", "star", "sky", "night", "blue"],
    "other": ["a", "e", "i", "o", "u"],
}
DURATIONS = (0.25, 0.375, 0.5, 0.75)
PHRASE_REST = 0.5
RAMP_SEC = 0.01


def random_score(rng: np.random.Generator, language: str = "zh", n_phrases: int = 2,
                 notes_per_phrase: int = 5, tempo_bpm: float = 120.0) -> Score:
    """Phrases of lyric-bearing notes separated by rests, with an occasional melisma.

    No two adjacent notes repeat the same syllable on the same pitch, and all
    pitches stay inside MIDI 55-74.
    """
    pool = SYLLABLES[language]
    events = []
    t = 0.0
    pitch = int(rng.integers(60, 68))
    for p in range(n_phrases):
        if p:
            events.append(rest(t, PHRASE_REST))
            t += PHRASE_REST
        prev = None
        for n in range(notes_per_phrase):
            dur = float(rng.choice(DURATIONS))
            pitch = int(np.clip(pitch + rng.integers(-3, 4), 55, 74))
            if prev is not None and n > 0 and rng.random() < 0.15 and pitch != prev.midi_pitch:
                ev = NoteEvent("", pitch, t, dur, True)
            else:
                syl = str(rng.choice(pool))
                while prev is not None and syl == prev.lyric:
                    syl = str(rng.choice(pool))
                ev = NoteEvent(syl, pitch, t, dur)
            events.append(ev)
            prev = ev if ev.lyric else prev
            t += dur
    return Score(events, tempo_bpm, language, "canonical")


def _recipe(lyric: str) -> np.ndarray:
    h = zlib.crc32(lyric.encode("utf-8"))
    rng = np.random.default_rng(h)
    w = rng.uniform(0.2, 1.0, 6)
    w[0] = 1.0
    return w / w.sum()


def render(score: Score, sample_rate: int = 24000, semitone_shift: float = 0.0,
           amplitude: float = 0.5, duration_sec: float | None = None) -> AudioBuffer:
    """Render a score as a harmonic tone; rests are digital silence."""
    total = score_duration(score) if duration_sec is None else duration_sec
    n = int(round(total * sample_rate))
    freq = np.zeros(n)
    amp = np.zeros(n)
    weights = np.zeros((n, 6))
    syllable = None
    for ev in score.events:
        s = int(round(ev.onset_sec * sample_rate))
        e = min(n, int(round(ev.end_sec * sample_rate)))
        if e <= s or ev.is_rest:
            syllable = None if ev.is_rest else syllable
            continue
        if ev.lyric:
            syllable = ev.lyric
        freq[s:e] = midi_to_hz(ev.midi_pitch) * 2.0 ** (semitone_shift / 12.0)
        amp[s:e] = 1.0
        weights[s:e] = _recipe(syllable or "")
    # short fades wherever sound starts or stops
    ramp = max(1, int(RAMP_SEC * sample_rate))
    kernel = np.hanning(2 * ramp + 1)
    kernel /= kernel.sum()
    env = np.convolve(amp, kernel, mode="same") * amp
    phase = 2 * np.pi * np.cumsum(freq) / sample_rate
    k = np.arange(1, 7)
    nyq_ok = (freq[:, None] * k[None, :]) < 0.45 * sample_rate
    y = np.sum(weights * nyq_ok * np.sin(phase[:, None] * k[None, :]), axis=1)
    return AudioBuffer(np.clip(amplitude * env * y, -1, 1), sample_rate)


def alignment_for(score: Score) -> PhonemeAlignment:
    """Two phones per lyric note (onset consonant + vowel), one per continuation, 'sil' for rests."""
    out = []
    for ev in score.events:
        if ev.is_rest:
            out.append((ev.onset_sec, ev.end_sec, "sil"))
        elif ev.lyric:
            split = ev.onset_sec + 0.3 * ev.duration_sec
            out.append((ev.onset_sec, split, f"{ev.lyric}_c"))
            out.append((split, ev.end_sec, f"{ev.lyric}_v"))
        else:
            out.append((ev.onset_sec, ev.end_sec, "v"))
    return PhonemeAlignment(out)


# --- fixture writers ------------------------------------------------------------------

_NAMES = ["C", "C", "D", "D", "E", "F", "F", "G", "G", "A", "A", "B"]
_ALTER = [0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0]


def score_to_musicxml(score: Score, divisions: int = 24) -> bytes:
    """Write a single-part, single-measure MusicXML file.

    Equal-pitch slur continuations are written as ties; other continuations
    sit under a slur.
    """
    q = score.tempo_bpm / 60.0 * divisions  # divisions per second
    notes = []
    evs = score.events
    for i, ev in enumerate(evs):
        dur = int(round(ev.duration_sec * q))
        if ev.is_rest:
            notes.append(f"<note><rest/><duration>{dur}</duration><voice>1</voice></note>")
            continue
        m = ev.midi_pitch
        nxt = evs[i + 1] if i + 1 < len(evs) else None
        tie_stop = ev.is_slur_continuation and i > 0 and evs[i - 1].midi_pitch == m
        tie_start = nxt is not None and nxt.is_slur_continuation and nxt.midi_pitch == m
        slur_start = nxt is not None and nxt.is_slur_continuation and nxt.midi_pitch != m and not ev.is_slur_continuation
        slur_stop = ev.is_slur_continuation and not (nxt is not None and nxt.is_slur_continuation)
        alter = f"<alter>{_ALTER[m % 12]}</alter>" if _ALTER[m % 12] else ""
        parts = [f"<note><pitch><step>{_NAMES[m % 12]}</step>{alter}<octave>{m // 12 - 1}</octave></pitch>",
                 f"<duration>{dur}</duration>"]
        if tie_stop:
            parts.append('<tie type="stop"/>')
        if tie_start:
            parts.append('<tie type="start"/>')
        parts.append("<voice>1</voice>")
        nots = []
        if tie_stop:
            nots.append('<tied type="stop"/>')
        if tie_start:
            nots.append('<tied type="start"/>')
        if slur_start:
            nots.append('<slur type="start" number="1"/>')
        if slur_stop:
            nots.append('<slur type="stop" number="1"/>')
        if nots:
            parts.append("<notations>" + "".join(nots) + "</notations>")
        if ev.lyric:
            parts.append(f'<lyric number="1"><syllabic>single</syllabic><text>{escape(ev.lyric)}</text></lyric>')
        parts.append("</note>")
        notes.append("".join(parts))
    body = "\n".join(notes)
    doc = f"""<?xml version="1.0" encoding="UTF-8"?>
<score-partwise version="3.1">
<part-list><score-part id="P1"><part-name>Voice</part-name></score-part></part-list>
<part id="P1">
<measure number="1">
<attributes><divisions>{divisions}</divisions></attributes>
<direction placement="above"><sound tempo="{score.tempo_bpm:g}"/></direction>
{body}
</measure>
</part>
</score-partwise>
"""
    return doc.encode("utf-8")


def _varlen(v: int) -> bytes:
    out = [v & 0x7F]
    v >>= 7
    while v:
        out.append(0x80 | (v & 0x7F))
        v >>= 7
    return bytes(reversed(out))


def score_to_midi(score: Score, ppq: int = 480) -> bytes:
    """Write a format-1 SMF: tempo track plus one note track with lyric meta events.

    Slur continuations carry the lyric ``-``.
    """
    us = int(round(60e6 / score.tempo_bpm))
    per_sec = ppq * 1e6 / us

    def tick(t):
        return int(round(t * per_sec))

    tempo = b"\x00\xff\x51\x03" + us.to_bytes(3, "big") + b"\x00\xff\x2f\x00"
    raw = []
    for ev in score.events:
        if ev.is_rest:
            continue
        on, off = tick(ev.onset_sec), tick(ev.end_sec)
        if ev.lyric or ev.is_slur_continuation:
            text = (ev.lyric or "-").encode("utf-8")
            raw.append((on, 1, b"\xff\x05" + _varlen(len(text)) + text))
        raw.append((on, 2, bytes([0x90, ev.midi_pitch, 100])))
        raw.append((off, 0, bytes([0x80, ev.midi_pitch, 0])))
    raw.sort(key=lambda r: (r[0], r[1]))
    trk = bytearray()
    last = 0
    for t, _, data in raw:
        trk += _varlen(t - last) + data
        last = t
    trk += b"\x00\xff\x2f\x00"
    head = b"MThd" + struct.pack(">IHHH", 6, 1, 2, ppq)
    return (head + b"MTrk" + struct.pack(">I", len(tempo)) + tempo
            + b"MTrk" + struct.pack(">I", len(trk)) + bytes(trk))


# --- corpus -------------------------------------------------------------------------------

def make_corpus(root, n_utts: int = 10, seed: int = 0, sample_rate: int = 24000,
                formats=("canonical", "musicxml", "midi"), languages=("zh", "en", "jp"),
                notes_per_phrase: int = 3) -> Path:
    """Write a mini-corpus (WAV + score + TextGrid per utterance) and ``manifest.jsonl``.

    Score formats and languages rotate across utterances. Returns the
    manifest path.
    """
    root = Path(root)
    (root / "wav").mkdir(parents=True, exist_ok=True)
    (root / "score").mkdir(exist_ok=True)
    (root / "align").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n_utts):
        utt = f"utt{i:03d}"
        lang = languages[i % len(languages)]
        fmt = formats[i % len(formats)]
        score = random_score(rng, lang, notes_per_phrase=notes_per_phrase)
        audio = render(score, sample_rate)
        (root / "wav" / f"{utt}.wav").write_bytes(write_wav(audio))
        if fmt == "musicxml":
            name, data = f"{utt}.musicxml", score_to_musicxml(score)
        elif fmt == "midi":
            name, data = f"{utt}.mid", score_to_midi(score)
        else:
            name, data = f"{utt}.json", serialize_score(score).encode("utf-8")
        (root / "score" / name).write_bytes(data)
        (root / "align" / f"{utt}.TextGrid").write_text(write_textgrid(alignment_for(score)), encoding="utf-8")
        lines.append({
            "utt_id": utt, "audio": f"wav/{utt}.wav", "score": f"score/{name}",
            "score_format": fmt, "alignment": f"align/{utt}.TextGrid",
            "singer": f"synth{i % 2}", "language": lang,
        })
    manifest = root / "manifest.jsonl"
    manifest.write_text("".join(json.dumps(x, ensure_ascii=False) + "\n" for x in lines), encoding="utf-8")
    return manifest


def make_eval_dirs(root, n_utts: int = 4, seed: int = 0, semitone_shift: float = 1.0,
                   sample_rate: int = 24000):
    """Reference tones and pitch-shifted copies, as two WAV dirs.

    Each utterance is one sustained note (random pitch, syllable and length)
    between short rests, so every mutually voiced frame carries the shift
    exactly; melodies would add note-transition frames where a frame-level
    pitch tracker may pick the neighbouring note.
    """
    root = Path(root)
    ref, hyp = root / "ref", root / "hyp"
    ref.mkdir(parents=True, exist_ok=True)
    hyp.mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_utts):
        dur = float(rng.choice((1.0, 1.5, 2.0)))
        lyric = str(rng.choice(SYLLABLES["en"]))
        score = Score([rest(0.0, 0.25), NoteEvent(lyric, int(rng.integers(55, 73)), 0.25, dur),
                       rest(0.25 + dur, 0.25)], language="en")
        (ref / f"e{i:03d}.wav").write_bytes(write_wav(render(score, sample_rate)))
        (hyp / f"e{i:03d}.wav").write_bytes(write_wav(render(score, sample_rate, semitone_shift)))
    return ref, hyp
