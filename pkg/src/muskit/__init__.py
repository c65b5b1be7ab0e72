"""Singing-voice data toolkit: score parsing and linting, audio I/O, features,
discrete tokens, objective metrics and a MOS client."""

from .audio import AudioBuffer, SegmentPolicy, read_wav, resample, segment, write_wav
from .features import F0Track, FrameMatrix, FrameParams, extract_f0, mel_cepstrum, mel_spectrogram, stft_magnitude
from .lint import Issue, LintPolicy, auto_correct, detect_issues
from .metrics import MetricReport, dtw_align, evaluate_pair, f0_rmse, mcd, semitone_accuracy, vuv_error
from .parsers import parse_canonical, parse_midi, parse_musicxml, parse_textgrid, serialize_score
from .perception import PerceptionScore, batch_mos, request_mos
from .score import NoteEvent, PhonemeAlignment, Score, normalize_score
from .tokens import Codebook, RVQCodebook, TokenSequence, kmeans_fit, rvq_decode, rvq_encode, rvq_fit, tokenize

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "SegmentPolicy", "read_wav", "write_wav", "resample", "segment",
    "FrameParams", "FrameMatrix", "F0Track", "stft_magnitude", "mel_spectrogram", "mel_cepstrum", "extract_f0",
    "Issue", "LintPolicy", "detect_issues", "auto_correct",
    "MetricReport", "dtw_align", "mcd", "f0_rmse", "semitone_accuracy", "vuv_error", "evaluate_pair",
    "parse_canonical", "parse_midi", "parse_musicxml", "parse_textgrid", "serialize_score",
    "PerceptionScore", "request_mos", "batch_mos",
    "NoteEvent", "Score", "PhonemeAlignment", "normalize_score",
    "Codebook", "RVQCodebook", "TokenSequence", "kmeans_fit", "tokenize", "rvq_fit", "rvq_encode", "rvq_decode",
]
