"""Continuous frame features: STFT magnitude, log-mel, mel cepstrum and YIN F0.

All extractors share one framing convention: frames are centred on
``t * hop`` after reflect padding, so every extractor yields
``1 + len // hop`` frames for the same buffer.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass

import numpy as np
from scipy.fft import dct, idct
from scipy.signal import get_window

from .audio import AudioBuffer
from .errors import FrameFileError, ParamError

LOG_FLOOR = 1e-10
FRAME_KINDS = ("magnitude", "logmel", "mcep", "external")
_FRAME_MAGIC = b"MKFR"


@dataclass(frozen=True)
class FrameParams:
    n_fft: int = 1024
    win_length: int = 1024
    hop_length: int = 256
    n_mels: int = 80
    fmin_hz: float = 0.0
    fmax_hz: float = 12000.0
    sample_rate_hz: int = 24000

    def __post_init__(self):
        if not 0 < self.hop_length <= self.win_length <= self.n_fft:
            raise ParamError("need 0 < hop_length <= win_length <= n_fft")
        if not 0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate_hz / 2:
            raise ParamError("need 0 <= fmin < fmax <= sample_rate / 2")
        if self.n_mels < 1:
            raise ParamError("n_mels must be positive")

    @property
    def frame_rate_hz(self) -> float:
        return self.sample_rate_hz / self.hop_length

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    frames: np.ndarray
    frame_rate_hz: float
    kind: str

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2:
            raise ParamError("frames must be a T x D matrix")
        if not np.all(np.isfinite(f)):
            raise ParamError("frame values must be finite")
        if self.kind not in FRAME_KINDS:
            raise ParamError(f"unknown frame kind {self.kind!r}")
        if not self.frame_rate_hz > 0:
            raise ParamError("frame rate must be positive")
        f.setflags(write=False)
        object.__setattr__(self, "frames", f)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True, eq=False)
class F0Track:
    f0_hz: np.ndarray
    voiced: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        f0 = np.asarray(self.f0_hz, dtype=np.float64)
        v = np.asarray(self.voiced, dtype=bool)
        if f0.shape != v.shape or f0.ndim != 1:
            raise ParamError("f0 and voicing must be equal-length vectors")
        if np.any(v != (f0 > 0)):
            raise ParamError("voiced flags must match f0 > 0")
        f0.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "f0_hz", f0)
        object.__setattr__(self, "voiced", v)

    def __len__(self):
        return self.f0_hz.size

    @classmethod
    def from_hz(cls, f0_hz, frame_rate_hz: float = 93.75) -> "F0Track":
        f0 = np.asarray(f0_hz, dtype=np.float64)
        return cls(f0, f0 > 0, frame_rate_hz)


# --- framing / STFT ------------------------------------------------------------------

def _check(buffer: AudioBuffer, params: FrameParams):
    if buffer.sample_rate_hz != params.sample_rate_hz:
        raise ParamError(
            f"buffer is {buffer.sample_rate_hz} Hz but params expect {params.sample_rate_hz} Hz"
        )


def n_frames_for(n_samples: int, hop_length: int) -> int:
    return 1 + n_samples // hop_length


def frame_signal(samples: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    """Centre-padded (reflect) frames of ``frame_length`` samples, shape (T, frame_length)."""
    x = np.asarray(samples, dtype=np.float64)
    pad = frame_length // 2
    mode = "reflect" if x.size > pad else "constant"
    xp = np.pad(x, (pad, pad), mode=mode)
    T = n_frames_for(x.size, hop_length)
    need = (T - 1) * hop_length + frame_length
    if xp.size < need:
        xp = np.pad(xp, (0, need - xp.size))
    idx = np.arange(frame_length)[None, :] + hop_length * np.arange(T)[:, None]
    return xp[idx]


def hann_window(win_length: int, n_fft: int) -> np.ndarray:
    """Periodic Hann window zero-padded (centred) to ``n_fft``."""
    w = get_window("hann", win_length, fftbins=True)
    left = (n_fft - win_length) // 2
    return np.pad(w, (left, n_fft - win_length - left))


def windowed_frames(buffer: AudioBuffer, params: FrameParams) -> np.ndarray:
    _check(buffer, params)
    frames = frame_signal(buffer.samples, params.n_fft, params.hop_length)
    return frames * hann_window(params.win_length, params.n_fft)


def stft(buffer: AudioBuffer, params: FrameParams) -> np.ndarray:
    """Complex one-sided spectrum, shape (T, n_fft // 2 + 1)."""
    return np.fft.rfft(windowed_frames(buffer, params), n=params.n_fft, axis=1)


def stft_magnitude(buffer: AudioBuffer, params: FrameParams = FrameParams()) -> FrameMatrix:
    return FrameMatrix(np.abs(stft(buffer, params)), params.frame_rate_hz, "magnitude")


# --- mel -----------------------------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(params: FrameParams) -> np.ndarray:
    """Triangular HTK-mel filterbank, shape (n_mels, n_fft // 2 + 1), unnormalized."""
    edges = mel_to_hz(np.linspace(hz_to_mel(params.fmin_hz), hz_to_mel(params.fmax_hz), params.n_mels + 2))
    freqs = np.arange(params.n_fft // 2 + 1) * params.sample_rate_hz / params.n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_spectrogram(buffer: AudioBuffer, params: FrameParams = FrameParams()) -> FrameMatrix:
    mag = np.abs(stft(buffer, params))
    mel = mag @ mel_filterbank(params).T
    return FrameMatrix(np.log(np.maximum(mel, LOG_FLOOR)), params.frame_rate_hz, "logmel")


def mel_cepstrum(buffer: AudioBuffer, params: FrameParams = FrameParams(), n_coeffs: int = 25) -> FrameMatrix:
    """Orthonormal DCT-II of each log-mel frame, truncated to ``n_coeffs``."""
    if not 2 <= n_coeffs <= params.n_mels:
        raise ParamError(f"n_coeffs must lie in [2, {params.n_mels}]")
    logmel = mel_spectrogram(buffer, params).frames
    return logmel_to_mcep(logmel, n_coeffs, params.frame_rate_hz)


def logmel_to_mcep(logmel: np.ndarray, n_coeffs: int, frame_rate_hz: float) -> FrameMatrix:
    c = dct(np.asarray(logmel, dtype=np.float64), type=2, norm="ortho", axis=-1)[..., :n_coeffs]
    return FrameMatrix(c, frame_rate_hz, "mcep")


def mcep_to_logmel(mcep: np.ndarray, n_mels: int) -> np.ndarray:
    """Inverse of :func:`logmel_to_mcep` with dropped coefficients set to zero."""
    c = np.asarray(mcep, dtype=np.float64)
    full = np.zeros(c.shape[:-1] + (n_mels,))
    full[..., : c.shape[-1]] = c
    return idct(full, type=2, norm="ortho", axis=-1)


# --- F0 (YIN) ------------------------------------------------------------------------

def yin_difference(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """Squared-difference function d(tau) for tau = 0..max_lag, per frame.

    The integration window is ``frame_length - max_lag`` samples, so every lag
    compares equally many sample pairs.
    """
    T, L = frames.shape
    W = L - max_lag
    if W <= 0:
        raise ParamError("frame too short for the requested lag range")
    x = frames
    nfft = 1 << int(np.ceil(np.log2(L + W)))
    head = np.fft.rfft(x[:, :W], n=nfft, axis=1)
    full = np.fft.rfft(x, n=nfft, axis=1)
    # r[tau] = sum_j x[j] x[j + tau], j < W
    r = np.fft.irfft(np.conj(head) * full, n=nfft, axis=1)[:, : max_lag + 1]
    sq = np.concatenate([np.zeros((T, 1)), np.cumsum(x * x, axis=1)], axis=1)
    e0 = sq[:, W][:, None]
    taus = np.arange(max_lag + 1)
    e_tau = sq[:, taus + W] - sq[:, taus]
    d = e0 + e_tau - 2.0 * r
    return np.maximum(d, 0.0)


def cmndf(d: np.ndarray) -> np.ndarray:
    """Cumulative-mean-normalized difference; d'(0) = 1, and 1 where undefined."""
    T, n = d.shape
    out = np.ones_like(d)
    csum = np.cumsum(d[:, 1:], axis=1)
    taus = np.arange(1, n)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        val = d[:, 1:] * taus / csum
    out[:, 1:] = np.where(csum > 0, val, 1.0)
    return out


def extract_f0(
    buffer: AudioBuffer,
    params: FrameParams = FrameParams(),
    f_min_search: float = 80.0,
    f_max_search: float = 1000.0,
    yin_threshold: float = 0.15,
) -> F0Track:
    """Estimate F0 per frame with YIN.

    A frame is voiced when the CMNDF dips below ``yin_threshold`` inside the
    lag range ``[sr / f_max_search, sr / f_min_search]``; the first such dip is
    followed to its local minimum and refined by parabolic interpolation.
    """
    _check(buffer, params)
    sr = params.sample_rate_hz
    if sr < 4 * f_max_search:
        raise ParamError("sample rate must be at least 4 * f_max_search")
    if not 0 < f_min_search < f_max_search:
        raise ParamError("need 0 < f_min_search < f_max_search")
    tau_min = max(2, int(np.floor(sr / f_max_search)))
    tau_max = int(np.ceil(sr / f_min_search))
    L = params.win_length
    if L - tau_max < tau_max:
        raise ParamError("win_length too short for f_min_search")

    frames = frame_signal(buffer.samples, L, params.hop_length)
    T = frames.shape[0]
    f0 = np.zeros(T)
    if T == 0:
        return F0Track(f0, f0 > 0, params.frame_rate_hz)
    d = yin_difference(frames, tau_max + 1)
    nd = cmndf(d)
    energy = np.mean(frames ** 2, axis=1)

    for t in range(T):
        if energy[t] < 1e-10:
            continue
        row = nd[t]
        below = np.nonzero(row[tau_min: tau_max + 1] < yin_threshold)[0]
        if below.size == 0:
            continue
        tau = tau_min + int(below[0])
        while tau + 1 <= tau_max and row[tau + 1] < row[tau]:
            tau += 1
        a, b, c = row[tau - 1], row[tau], row[tau + 1]
        denom = a - 2.0 * b + c
        shift = 0.5 * (a - c) / denom if denom > 0 else 0.0
        shift = min(max(shift, -1.0), 1.0)
        hz = sr / (tau + shift)
        if f_min_search <= hz <= f_max_search:
            f0[t] = hz
    return F0Track(f0, f0 > 0, params.frame_rate_hz)


# --- frame files ---------------------------------------------------------------------

def write_frames(fm: FrameMatrix) -> bytes:
    """Little-endian MKFR: magic, u32 version, u32 T, u32 D, f32 rate, u8 kind, f32 data."""
    T, D = fm.frames.shape
    head = _FRAME_MAGIC + struct.pack("<IIIfB", 1, T, D, fm.frame_rate_hz, FRAME_KINDS.index(fm.kind))
    return head + np.ascontiguousarray(fm.frames, dtype="<f4").tobytes()


def read_frames(document: bytes) -> FrameMatrix:
    if document[:4] != _FRAME_MAGIC:
        raise FrameFileError("not an MKFR frame file")
    head = 4 + struct.calcsize("<IIIfB")
    if len(document) < head:
        raise FrameFileError("truncated MKFR header")
    version, T, D, rate, kind = struct.unpack("<IIIfB", document[4:head])
    if version != 1:
        raise FrameFileError(f"unsupported MKFR version {version}")
    if kind >= len(FRAME_KINDS):
        raise FrameFileError(f"unknown frame kind code {kind}")
    body = document[head:]
    if len(body) != 4 * T * D:
        raise FrameFileError(f"expected {T}x{D} floats, found {len(body) // 4}")
    data = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(T, D)
    return FrameMatrix(data, float(rate), FRAME_KINDS[kind])


def f0_to_frames(track: F0Track) -> FrameMatrix:
    """Pack an F0 track as a one-column external FrameMatrix (0 = unvoiced)."""
    return FrameMatrix(track.f0_hz[:, None], track.frame_rate_hz, "external")


def frames_to_f0(fm: FrameMatrix) -> F0Track:
    if fm.dim != 1:
        raise FrameFileError("an F0 frame file has exactly one column")
    return F0Track.from_hz(fm.frames[:, 0], fm.frame_rate_hz)
