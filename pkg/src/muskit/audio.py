"""WAV I/O, sample-rate conversion and score-aligned segmentation."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.signal import upfirdn

from .errors import (
    PreconditionError,
    RateError,
    UnsplittableError,
    UnsupportedEncodingError,
    WavSyntaxError,
)
from .score import NoteEvent, Score, rest, score_duration

KAISER_BETA = 12.0
ZERO_CROSSINGS = 64
MIN_RATE, MAX_RATE = 8000, 96000

_PCM, _FLOAT, _EXTENSIBLE = 0x0001, 0x0003, 0xFFFE


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("AudioBuffer holds mono audio only")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio samples must be finite")
        if x.size and np.max(np.abs(x)) > 1.0 + 1e-6:
            raise ValueError("audio samples must lie in [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample rate must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_sec(self) -> float:
        return self.samples.size / self.sample_rate_hz


# --- WAV -------------------------------------------------------------------------

def read_wav(document: bytes) -> AudioBuffer:
    """Decode RIFF/WAVE PCM16, PCM24 or float32 (mono or stereo) into an AudioBuffer.

    Integer PCM is scaled by ``1 / 2**(bits - 1)``; stereo is averaged to mono.
    """
    if len(document) < 12 or document[:4] != b"RIFF" or document[8:12] != b"WAVE":
        raise WavSyntaxError("not a RIFF/WAVE document")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(document):
        cid = document[pos:pos + 4]
        (size,) = struct.unpack("<I", document[pos + 4:pos + 8])
        body = document[pos + 8:pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise WavSyntaxError(f"chunk {cid!r} truncated")
        if cid == b"fmt ":
            if size < 16:
                raise WavSyntaxError("fmt chunk too short")
            tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", body[:16])
            if tag == _EXTENSIBLE:
                if size < 40:
                    raise WavSyntaxError("extensible fmt chunk too short")
                (tag,) = struct.unpack("<H", body[24:26])
            fmt = (tag, channels, rate, block_align, bits)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise WavSyntaxError("missing fmt chunk")
    if data is None:
        raise WavSyntaxError("missing data chunk")

    tag, channels, rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{channels} channels; only mono and stereo are supported")
    if tag == _PCM and bits == 16:
        x = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _PCM and bits == 24:
        raw = np.frombuffer(data[: len(data) // 3 * 3], dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        v = np.where(v & 0x800000, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    elif tag == _FLOAT and bits == 32:
        x = np.frombuffer(data[: len(data) // 4 * 4], dtype="<f4").astype(np.float64)
        x = np.clip(x, -1.0, 1.0)
    else:
        raise UnsupportedEncodingError(f"format tag {tag:#06x} with {bits} bits is not supported")
    if channels == 2:
        x = x[: x.size // 2 * 2].reshape(-1, 2).mean(axis=1)
    return AudioBuffer(x, rate)


def write_wav(buffer: AudioBuffer, bit_depth: int = 32) -> bytes:
    """Encode as float32 (default) or 16/24-bit PCM mono WAV."""
    x = buffer.samples
    if bit_depth == 32:
        payload = x.astype("<f4").tobytes()
        tag = _FLOAT
    elif bit_depth == 16:
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        tag = _PCM
    elif bit_depth == 24:
        v = np.clip(np.round(x * float(1 << 23)), -(1 << 23), (1 << 23) - 1).astype(np.int32)
        b = v.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3]
        payload = b.tobytes()
        tag = _PCM
    else:
        raise UnsupportedEncodingError(f"cannot write {bit_depth}-bit WAV")
    nbytes = bit_depth // 8
    fmt = struct.pack("<HHIIHH", tag, 1, buffer.sample_rate_hz,
                      buffer.sample_rate_hz * nbytes, nbytes, bit_depth)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def wav_duration(document: bytes) -> float:
    return read_wav(document).duration_sec


# --- resampling ----------------------------------------------------------------------

def design_lowpass(up: int, down: int) -> np.ndarray:
    """Kaiser-windowed sinc prototype for rational rate change ``up/down``.

    The cutoff sits at the lower of the two Nyquist rates and the filter spans
    64 zero-crossings of that sinc on each side, at the upsampled rate.
    """
    step = max(up, down)
    half = ZERO_CROSSINGS * step
    n = np.arange(-half, half + 1, dtype=np.float64)
    h = np.sinc(n / step) / step
    h *= np.kaiser(2 * half + 1, KAISER_BETA)
    return h * up


def resample(buffer: AudioBuffer, target_rate_hz: int) -> AudioBuffer:
    """Polyphase windowed-sinc conversion to ``target_rate_hz``.

    Output length is ``round(len * target / source)``. Equal rates return the
    input unchanged.
    """
    src = buffer.sample_rate_hz
    for r in (src, target_rate_hz):
        if not MIN_RATE <= r <= MAX_RATE:
            raise RateError(f"rate {r} Hz outside [{MIN_RATE}, {MAX_RATE}]")
    if src == target_rate_hz:
        return buffer
    ratio = Fraction(target_rate_hz, src)
    up, down = ratio.numerator, ratio.denominator
    n_out = int(round(len(buffer) * target_rate_hz / src))
    if len(buffer) == 0:
        return AudioBuffer(np.zeros(0), target_rate_hz)

    h = design_lowpass(up, down)
    delay = (h.size - 1) // 2
    # output m is the filtered upsampled signal at index m*down + delay; prepend
    # zeros to the filter so that index falls on upfirdn's decimation grid
    lead = (-delay) % down
    h = np.concatenate([np.zeros(lead), h])
    offset = (delay + lead) // down
    x = np.concatenate([buffer.samples, np.zeros(h.size // up + 2)])
    y = upfirdn(h, x, up=up, down=down)[offset: offset + n_out]
    return AudioBuffer(np.clip(y[:n_out], -1.0, 1.0), target_rate_hz)


# --- segmentation -------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentPolicy:
    min_rest_split_sec: float = 0.3
    max_segment_sec: float = 30.0
    min_segment_sec: float = 0.5

    def __post_init__(self):
        if not 0 < self.min_segment_sec < self.max_segment_sec:
            raise ValueError("need 0 < min_segment_sec < max_segment_sec")


def segment_name(utt_id: str, index: int) -> str:
    return f"{utt_id}_{index:04d}"


def _cut_points(events, start, end):
    """Midpoints of rests strictly inside (start, end) with their durations."""
    out = []
    for ev in events:
        if ev.is_rest and ev.onset_sec > start and ev.end_sec < end:
            out.append((ev.onset_sec + 0.5 * ev.duration_sec, ev.duration_sec))
    return out


def _slice_events(events, t0, t1):
    out = []
    for ev in events:
        s, e = max(ev.onset_sec, t0), min(ev.end_sec, t1)
        if e - s <= 1e-9:
            continue
        if ev.is_rest:
            out.append(rest(s - t0, e - s))
        else:
            out.append(NoteEvent(ev.lyric, ev.midi_pitch, s - t0, e - s, ev.is_slur_continuation))
    return out


def segment(score: Score, buffer: AudioBuffer, policy: SegmentPolicy = SegmentPolicy()):
    """Split an utterance into ``(Score, AudioBuffer)`` pieces at long rests.

    Cuts fall at the midpoint of every rest lasting at least
    ``min_rest_split_sec``, so each side keeps half of the silence. Pieces
    shorter than ``min_segment_sec`` are merged into their successor (the last
    one into its predecessor); pieces longer than ``max_segment_sec`` are split
    again at their longest interior rest. The last piece runs to the end of the
    audio so that the sample ranges partition the buffer.
    """
    total = score_duration(score)
    if abs(total - buffer.duration_sec) > 0.1:
        raise PreconditionError(
            f"score lasts {total:.3f}s but audio {buffer.duration_sec:.3f}s; lint the score first"
        )
    events = score.events
    if not events:
        return [(score, buffer)]

    bounds = [0.0] + [t for t, d in _cut_points(events, 0.0, total) if d >= policy.min_rest_split_sec] + [total]

    # merge short pieces forward
    merged = [bounds[0]]
    for i in range(1, len(bounds) - 1):
        if bounds[i] - merged[-1] >= policy.min_segment_sec:
            merged.append(bounds[i])
    if len(merged) > 1 and total - merged[-1] < policy.min_segment_sec:
        merged.pop()
    merged.append(total)

    # split long pieces at their longest rest
    final = [merged[0]]
    stack = list(zip(merged[:-1], merged[1:]))[::-1]
    while stack:
        a, b = stack.pop()
        if b - a > policy.max_segment_sec:
            cands = _cut_points(events, a, b)
            if not cands:
                raise UnsplittableError(f"segment [{a:.3f}, {b:.3f}) exceeds {policy.max_segment_sec}s with no rest")
            t, _ = max(cands, key=lambda c: (c[1], -c[0]))
            stack.append((t, b))
            stack.append((a, t))
            continue
        final.append(b)

    sr = buffer.sample_rate_hz
    n = len(buffer)
    cuts = [min(n, int(round(t * sr))) for t in final]
    cuts[0], cuts[-1] = 0, n
    out = []
    for (t0, t1), (s0, s1) in zip(zip(final[:-1], final[1:]), zip(cuts[:-1], cuts[1:])):
        seg_score = replace(score, events=tuple(_slice_events(events, t0, t1)))
        out.append((seg_score, AudioBuffer(buffer.samples[s0:s1], sr)))
    return out


def concat_duration(pieces) -> float:
    return math.fsum(score_duration(s) for s, _ in pieces)
