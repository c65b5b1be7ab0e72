import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muskit.audio import (
    AudioBuffer,
    SegmentPolicy,
    concat_duration,
    read_wav,
    resample,
    segment,
    segment_name,
    wav_duration,
    write_wav,
)
from muskit.errors import PreconditionError, RateError, UnsplittableError, UnsupportedEncodingError, WavSyntaxError
from muskit.score import Score, rest, score_duration

from conftest import note, sine


def snr_db(ref, est):
    return 10 * np.log10(np.sum(ref ** 2) / np.sum((ref - est) ** 2))


def pcm16_wav(values, rate=16000, channels=1):
    data = struct.pack(f"<{len(values)}h", *values)
    fmt = struct.pack("<HHIIHH", 1, channels, rate, rate * 2 * channels, 2 * channels, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_buffer_invariants():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([1.5]), 16000)
    with pytest.raises(ValueError):
        AudioBuffer(np.array([np.nan]), 16000)
    b = AudioBuffer(np.zeros(16000), 16000)
    assert b.duration_sec == 1.0
    with pytest.raises(ValueError):
        b.samples[0] = 1.0


def test_pcm16_scaling():
    b = read_wav(pcm16_wav([16384, -32768, 0]))
    assert b.samples.tolist() == [0.5, -1.0, 0.0]
    assert b.sample_rate_hz == 16000


def test_stereo_is_averaged():
    b = read_wav(pcm16_wav([16384, 0, -16384, -16384], channels=2))
    assert b.samples.tolist() == [0.25, -0.5]


def test_float32_roundtrip_bit_identical(rng):
    x = rng.uniform(-1, 1, 1001).astype(np.float32).astype(np.float64)
    b = AudioBuffer(x, 22050)
    back = read_wav(write_wav(b))
    assert back.sample_rate_hz == 22050
    assert np.array_equal(back.samples, x)


@pytest.mark.parametrize("bits,step", [(16, 2 ** -15), (24, 2 ** -23)])
def test_pcm_roundtrip(rng, bits, step):
    x = rng.uniform(-0.99, 0.99, 999)
    back = read_wav(write_wav(AudioBuffer(x, 8000), bit_depth=bits))
    assert np.max(np.abs(back.samples - x)) <= step / 2 + 1e-12


def test_extensible_format():
    data = struct.pack("<3h", 100, -100, 0)
    fmt = struct.pack("<HHIIHH", 0xFFFE, 1, 8000, 16000, 2, 16)
    fmt += struct.pack("<HHI", 22, 16, 4) + struct.pack("<H", 1) + b"\x00" * 14
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", 6) + data
    b = read_wav(b"RIFF" + struct.pack("<I", len(body)) + body)
    assert b.samples[0] == 100 / 32768


def test_wav_errors():
    good = pcm16_wav([1, 2, 3])
    with pytest.raises(WavSyntaxError):
        read_wav(b"RIFX" + good[4:])
    with pytest.raises(WavSyntaxError):
        read_wav(good[:12])
    bad = bytearray(good)
    bad[20:22] = struct.pack("<H", 2)  # ADPCM
    with pytest.raises(UnsupportedEncodingError):
        read_wav(bytes(bad))
    assert wav_duration(good) == 3 / 16000


def test_resample_identity():
    b = sine(440, 0.1)
    assert resample(b, 24000) is b


def test_resample_length():
    b = sine(440, 1.0, sr=44100)
    assert len(resample(b, 24000)) == 24000
    assert len(resample(AudioBuffer(np.zeros(7), 16000), 48000)) == 21


def test_resample_rate_bounds():
    with pytest.raises(RateError):
        resample(sine(440, 0.1), 4000)


def test_resample_sine_snr():
    y = resample(sine(1000, 1.0, sr=48000, amp=1.0), 24000)
    ideal = sine(1000, 1.0, sr=24000, amp=1.0).samples
    mid = slice(2400, 21600)
    assert snr_db(ideal[mid], y.samples[mid]) >= 60


def test_resample_roundtrip_snr(rng):
    # band-limited (< 10 kHz) multi-tone signal, 48k -> 24k -> 48k
    t = np.arange(48000) / 48000
    x = sum(0.15 * np.sin(2 * np.pi * f * t + p) for f, p in zip([300, 2100, 5500, 9000], rng.uniform(0, 6, 4)))
    back = resample(resample(AudioBuffer(x, 48000), 24000), 48000)
    mid = slice(4800, 43200)
    assert snr_db(x[mid], back.samples[mid]) >= 55


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1))
def test_resample_linear(a):
    x = sine(700, 0.05, sr=32000, amp=0.9)
    lhs = resample(AudioBuffer(a * x.samples, 32000), 24000).samples
    rhs = a * resample(x, 24000).samples
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


def test_resample_44k1_to_24k_tone():
    y = resample(sine(440, 1.0, sr=44100, amp=0.8), 24000)
    ideal = sine(440, 1.0, sr=24000, amp=0.8).samples
    assert snr_db(ideal[2400:21600], y.samples[2400:21600]) >= 60


# --- segmentation ------------------------------------------------------------------------

def buffer_for(score, sr=8000):
    return AudioBuffer(np.zeros(int(round(score_duration(score) * sr))), sr)


def test_segment_without_rests():
    s = Score([note("a", 60, 0, 2.5), note("b", 62, 2.5, 2.5)])
    b = buffer_for(s)
    (seg_s, seg_b), = segment(s, b)
    assert seg_s == s and len(seg_b) == len(b)


def test_segment_two_phrases():
    s = Score([note("a", 60, 0, 2), rest(2, 0.5), note("b", 62, 2.5, 1.5)])
    pieces = segment(s, buffer_for(s), SegmentPolicy(min_rest_split_sec=0.3))
    assert len(pieces) == 2
    sung = [sum(e.duration_sec for e in p.events if not e.is_rest) for p, _ in pieces]
    assert sung == [2.0, 1.5]
    # each side keeps half of the rest
    assert [score_duration(p) for p, _ in pieces] == [2.25, 1.75]
    assert pieces[1][0].events[0] == rest(0.0, 0.25)


def test_segment_short_rest_is_kept():
    s = Score([note("a", 60, 0, 2), rest(2, 0.2), note("b", 62, 2.2, 1.5)])
    assert len(segment(s, buffer_for(s))) == 1


def test_segment_merges_short_pieces():
    s = Score([note("a", 60, 0, 0.2), rest(0.2, 0.4), note("b", 62, 0.6, 2), rest(2.6, 0.4), note("c", 64, 3.0, 0.2)])
    pieces = segment(s, buffer_for(s), SegmentPolicy(min_segment_sec=0.5))
    assert len(pieces) == 1


def test_segment_splits_long_piece():
    s = Score([note("a", 60, 0, 20), rest(20, 0.4), note("b", 62, 20.4, 19.6)])
    pieces = segment(s, buffer_for(s), SegmentPolicy(min_rest_split_sec=0.5))
    durs = [score_duration(p) for p, _ in pieces]
    assert len(pieces) == 2
    assert durs == pytest.approx([20.2, 19.8])


def test_segment_unsplittable():
    s = Score([note("a", 60, 0, 31)])
    with pytest.raises(UnsplittableError):
        segment(s, buffer_for(s))


def test_segment_precondition():
    s = Score([note("a", 60, 0, 2)])
    with pytest.raises(PreconditionError):
        segment(s, AudioBuffer(np.zeros(8000 * 3), 8000))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 40), st.booleans()), min_size=1, max_size=20), st.integers(-40, 40))
def test_segment_partition(spec, jitter):
    events, t = [], 0.0
    for i, (d, is_rest) in enumerate(spec):
        dur = d / 16
        events.append(rest(t, dur) if is_rest and events and not events[-1].is_rest else note(f"s{i}", 60, t, dur))
        t += dur
    s = Score(events)
    sr = 8000
    b = AudioBuffer(np.zeros(int(round(t * sr)) + jitter), sr)
    pieces = segment(s, b)
    assert sum(len(pb) for _, pb in pieces) == len(b)
    assert concat_duration(pieces) == pytest.approx(score_duration(s), abs=1e-6)
    for ps, _ in pieces:
        assert ps.events[0].onset_sec == 0.0


def test_segment_name():
    assert segment_name("utt", 3) == "utt_0003"
