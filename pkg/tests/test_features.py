import numpy as np
import pytest

from muskit.audio import AudioBuffer
from muskit.errors import FrameFileError, ParamError
from muskit.features import (
    F0Track,
    FrameMatrix,
    FrameParams,
    extract_f0,
    f0_to_frames,
    frames_to_f0,
    hann_window,
    hz_to_mel,
    logmel_to_mcep,
    mcep_to_logmel,
    mel_cepstrum,
    mel_filterbank,
    mel_spectrogram,
    read_frames,
    stft,
    stft_magnitude,
    windowed_frames,
    write_frames,
)

from conftest import SR, sine

P = FrameParams()


def direct_dft(frame):
    n = frame.size
    k = np.arange(n // 2 + 1)[:, None]
    return (frame[None, :] * np.exp(-2j * np.pi * k * np.arange(n)[None, :] / n)).sum(axis=1)


def test_params_validation():
    with pytest.raises(ParamError):
        FrameParams(hop_length=2048)
    with pytest.raises(ParamError):
        FrameParams(fmax_hz=13000)
    assert P.frame_rate_hz == 93.75


def test_zero_input_magnitude():
    m = stft_magnitude(AudioBuffer(np.zeros(SR), SR))
    assert m.frames.shape == (94, 513)
    assert not m.frames.any()


def test_stft_matches_direct_dft(rng):
    b = AudioBuffer(rng.uniform(-0.5, 0.5, 3000), SR)
    frames = windowed_frames(b, P)
    spec = stft(b, P)
    for t in (0, 5, frames.shape[0] - 1):
        assert np.allclose(spec[t], direct_dft(frames[t]), atol=1e-9)


def test_impulse_gives_flat_spectrum():
    x = np.zeros(SR)
    x[256 * 10] = 1.0
    mag = stft_magnitude(AudioBuffer(x, SR)).frames[10]
    # the periodic Hann window is exactly 1 at the frame centre
    assert np.allclose(mag, 1.0, atol=1e-12)


def test_bin_aligned_sine_concentrates():
    mag = stft_magnitude(sine(1125.0)).frames
    for row in mag[4:-4]:
        assert row[48] >= 100 * np.max(np.concatenate([row[:45], row[53:]]))


def test_parseval(rng):
    b = AudioBuffer(rng.uniform(-1, 1, 5000), SR)
    frames = windowed_frames(b, P)
    spec = stft(b, P)
    full = np.concatenate([spec, np.conj(spec[:, -2:0:-1])], axis=1)
    lhs = np.sum(frames ** 2, axis=1)
    rhs = np.sum(np.abs(full) ** 2, axis=1) / P.n_fft
    assert np.max(np.abs(lhs - rhs) / lhs) <= 1e-6


def test_hann_window_periodic_and_padded():
    w = hann_window(8, 12)
    assert w.size == 12
    assert w[:2].tolist() == [0, 0] and w[-2:].tolist() == [0, 0]
    assert w[2 + 4] == pytest.approx(1.0)


def test_mel_scale_point():
    assert hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)


def test_filterbank_shape_and_peaks():
    fb = mel_filterbank(P)
    assert fb.shape == (80, 513)
    assert np.all(fb.sum(axis=1) > 0)
    # peaks from the construction: edges evenly spaced in mel
    m = np.linspace(hz_to_mel(0), hz_to_mel(12000), 82)
    centers = 700 * (10 ** (m[1:-1] / 2595) - 1)
    assert np.all(np.diff(centers) > 0)
    freqs = np.arange(513) * SR / 1024
    peak = freqs[np.argmax(fb, axis=1)]
    assert np.all(np.diff(peak) >= 0)
    assert np.all(np.abs(peak - centers) <= SR / 1024)


def test_logmel_of_silence():
    lm = mel_spectrogram(AudioBuffer(np.zeros(SR // 2), SR))
    assert lm.kind == "logmel"
    assert np.all(lm.frames == np.log(1e-10))


def test_mcep_of_silence():
    c = mel_cepstrum(AudioBuffer(np.zeros(SR // 2), SR)).frames
    assert c.shape[1] == 25
    assert np.allclose(c[:, 0], np.sqrt(80) * np.log(1e-10), rtol=1e-12)
    assert np.allclose(c[:, 1:], 0, atol=1e-9)


def test_mcep_deterministic():
    b = sine(330, 0.5)
    assert np.array_equal(mel_cepstrum(b).frames, mel_cepstrum(b).frames)


def test_mcep_truncation_is_least_squares(rng):
    frame = mel_spectrogram(sine(330, 0.3)).frames[10]
    c = logmel_to_mcep(frame[None, :], 25, 1.0).frames[0]
    smooth = mcep_to_logmel(c, 80)
    best = np.linalg.norm(frame - smooth)
    for _ in range(200):
        other = c + rng.normal(0, 0.5, 25)
        assert best <= np.linalg.norm(frame - mcep_to_logmel(other, 80))
    # full-length coefficients reconstruct exactly
    full = logmel_to_mcep(frame[None, :], 80, 1.0).frames[0]
    assert np.allclose(mcep_to_logmel(full, 80), frame, atol=1e-9)


def interior(track, margin=4):
    return track.f0_hz[margin:-margin], track.voiced[margin:-margin]


def test_f0_220():
    f0, v = interior(extract_f0(sine(220)))
    assert np.all(v)
    assert np.mean(np.abs(f0 - 220) <= 1.0) >= 0.95


@pytest.mark.parametrize("freq", [110, 220, 440, 880])
def test_f0_octave_consistency(freq):
    f0, v = interior(extract_f0(sine(freq)))
    assert np.all(v)
    assert np.all(np.abs(f0 - freq) <= 0.03 * freq)


def test_f0_silence():
    tr = extract_f0(AudioBuffer(np.zeros(SR), SR))
    assert not tr.voiced.any() and not tr.f0_hz.any()


def test_f0_noise_mostly_unvoiced():
    x = np.random.default_rng(0).uniform(-0.1, 0.1, SR)
    tr = extract_f0(AudioBuffer(x, SR))
    assert np.mean(~tr.voiced) >= 0.9


def test_frame_count_contract(rng):
    for n in (0, 1, 255, 256, 257, 5000):
        b = AudioBuffer(rng.uniform(-0.3, 0.3, n), SR)
        T = 1 + n // 256
        assert mel_spectrogram(b).n_frames == T
        assert mel_cepstrum(b).n_frames == T
        assert len(extract_f0(b)) == T


def test_extractors_reject_rate_mismatch():
    with pytest.raises(ParamError):
        mel_spectrogram(sine(220, 0.1, sr=16000))


def test_frame_file_roundtrip(rng):
    fm = FrameMatrix(rng.normal(size=(7, 3)).astype(np.float32), 93.75, "mcep")
    back = read_frames(write_frames(fm))
    assert back.kind == "mcep" and back.frame_rate_hz == 93.75
    assert np.array_equal(back.frames, fm.frames)


def test_frame_file_errors():
    doc = write_frames(FrameMatrix(np.zeros((2, 2)), 10.0, "logmel"))
    with pytest.raises(FrameFileError):
        read_frames(b"XXXX" + doc[4:])
    with pytest.raises(FrameFileError):
        read_frames(doc[:-4])


def test_f0_frames_roundtrip():
    tr = F0Track.from_hz([0.0, 220.5, 0.0, 441.0])
    back = frames_to_f0(read_frames(write_frames(f0_to_frames(tr))))
    assert np.array_equal(back.f0_hz, tr.f0_hz)
    assert np.array_equal(back.voiced, tr.voiced)
