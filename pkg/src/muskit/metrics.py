"""Objective metrics between reference and generated singing.

Conventions:

* MCD uses the DCT-of-log-mel cepstrum, drops coefficient 0 and aligns the two
  sequences with DTW before averaging ``10/ln10 * sqrt(2 * sum(diff**2))``.
* F0 metrics compare frame-by-frame after trimming to the shorter track;
  F0 RMSE is measured in natural-log Hz over frames voiced in both tracks.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .audio import AudioBuffer, resample
from .errors import DimensionError, EmptyInputError, NoVoicedOverlapError
from .features import F0Track, FrameMatrix, FrameParams, extract_f0, mel_cepstrum

MCD_CONST = 10.0 / math.log(10.0) * math.sqrt(2.0)

# backtracking preference on equal cost: diagonal, then advance ref, then advance hyp
_STEPS = ((1, 1), (1, 0), (0, 1))


@dataclass(frozen=True)
class DtwPath:
    pairs: tuple
    cost: float = 0.0

    def __len__(self):
        return len(self.pairs)


def _frames(m) -> tuple[np.ndarray, str]:
    if isinstance(m, FrameMatrix):
        return m.frames, m.kind
    return np.asarray(m, dtype=np.float64), "external"


def pair_distances(ref, hyp) -> np.ndarray:
    """Euclidean distance between every ref/hyp frame pair.

    Coefficient 0 is left out for ``mcep`` inputs.
    """
    a, kind_a = _frames(ref)
    b, kind_b = _frames(hyp)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptyInputError("DTW needs at least one frame on each side")
    if "mcep" in (kind_a, kind_b):
        a, b = a[:, 1:], b[:, 1:]
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))


def dtw_from_distances(dist: np.ndarray) -> DtwPath:
    n, m = dist.shape
    d = dist.tolist()
    rows = [[math.inf] * m for _ in range(n)]
    for i in range(n):
        row, di = rows[i], d[i]
        up = rows[i - 1] if i else None
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = math.inf
                if i and j:
                    best = up[j - 1]
                if i and up[j] < best:
                    best = up[j]
                if j and row[j - 1] < best:
                    best = row[j - 1]
            row[j] = di[j] + best

    pairs = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while i or j:
        best, move = math.inf, None
        for di_, dj in _STEPS:
            pi, pj = i - di_, j - dj
            if pi >= 0 and pj >= 0 and rows[pi][pj] < best:
                best, move = rows[pi][pj], (pi, pj)
        i, j = move
        pairs.append(move)
    pairs.reverse()
    return DtwPath(tuple(pairs), rows[-1][-1])


def dtw_align(ref, hyp) -> DtwPath:
    """Minimum-cost monotone alignment with steps (1,1), (1,0), (0,1)."""
    return dtw_from_distances(pair_distances(ref, hyp))


def path_cost(dist: np.ndarray, pairs) -> float:
    return math.fsum(dist[i, j] for i, j in pairs)


def mcd(ref_mcep, hyp_mcep) -> float:
    """Mel cepstral distortion in dB over the DTW path (coefficient 0 excluded)."""
    dist = pair_distances(ref_mcep, hyp_mcep)
    path = dtw_from_distances(dist)
    return MCD_CONST * path_cost(dist, path.pairs) / len(path)


def _trim(ref: F0Track, hyp: F0Track):
    n = min(len(ref), len(hyp))
    return ref.f0_hz[:n], ref.voiced[:n], hyp.f0_hz[:n], hyp.voiced[:n]


def _mutual(ref: F0Track, hyp: F0Track):
    fr, vr, fh, vh = _trim(ref, hyp)
    both = vr & vh
    if not np.any(both):
        raise NoVoicedOverlapError("no frame is voiced in both tracks")
    return fr[both], fh[both]


def f0_rmse(ref: F0Track, hyp: F0Track) -> float:
    fr, fh = _mutual(ref, hyp)
    return float(np.sqrt(np.mean((np.log(fh) - np.log(fr)) ** 2)))


def semitone_accuracy(ref: F0Track, hyp: F0Track) -> float:
    """Share of mutually voiced frames within half a semitone of the reference."""
    fr, fh = _mutual(ref, hyp)
    return float(np.mean(np.abs(12.0 * np.log2(fh / fr)) < 0.5))


def vuv_error(ref: F0Track, hyp: F0Track) -> float:
    _, vr, _, vh = _trim(ref, hyp)
    if vr.size == 0:
        raise EmptyInputError("no frames to compare")
    return float(np.mean(vr != vh))


@dataclass
class MetricReport:
    mcd_db: Optional[float]
    f0_rmse_log: Optional[float]
    semitone_accuracy: Optional[float]
    vuv_error: Optional[float]
    n_frames_ref: int
    n_frames_hyp: int
    n_mutually_voiced: int
    mos: Optional[float] = None
    resampled: bool = False
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_FIELDS = ("mcd_db", "f0_rmse_log", "semitone_accuracy", "vuv_error", "mos")


def evaluate_pair(ref_audio: AudioBuffer, hyp_audio: AudioBuffer, params: FrameParams = FrameParams(),
                  n_coeffs: int = 25) -> MetricReport:
    """Compute MCD, F0 RMSE, semitone accuracy and V/UV error for one pair.

    Audio at another rate is resampled to ``params.sample_rate_hz`` and the
    report's ``resampled`` flag is set. Metric failures that concern only one
    metric (no mutually voiced frame) are recorded in ``errors`` with the
    metric left as ``None``.
    """
    flagged = False
    sr = params.sample_rate_hz
    if ref_audio.sample_rate_hz != sr:
        ref_audio, flagged = resample(ref_audio, sr), True
    if hyp_audio.sample_rate_hz != sr:
        hyp_audio, flagged = resample(hyp_audio, sr), True

    ref_c = mel_cepstrum(ref_audio, params, n_coeffs)
    hyp_c = mel_cepstrum(hyp_audio, params, n_coeffs)
    ref_f0 = extract_f0(ref_audio, params)
    hyp_f0 = extract_f0(hyp_audio, params)

    errors = []
    m = mcd(ref_c, hyp_c)
    rmse = sa = None
    try:
        rmse = f0_rmse(ref_f0, hyp_f0)
        sa = semitone_accuracy(ref_f0, hyp_f0)
    except NoVoicedOverlapError as exc:
        errors.append(f"NoVoicedOverlapError: {exc}")
    vuv = vuv_error(ref_f0, hyp_f0)
    _, vr, _, vh = _trim(ref_f0, hyp_f0)
    return MetricReport(
        mcd_db=m,
        f0_rmse_log=rmse,
        semitone_accuracy=sa,
        vuv_error=vuv,
        n_frames_ref=ref_c.n_frames,
        n_frames_hyp=hyp_c.n_frames,
        n_mutually_voiced=int(np.sum(vr & vh)),
        resampled=flagged,
        errors=errors,
    )


def corpus_means(per_utt: dict) -> dict:
    """Mean of each metric over utterances where it is defined, in sorted-id order."""
    out = {}
    for key in REPORT_FIELDS:
        vals = [per_utt[u][key] for u in sorted(per_utt) if per_utt[u].get(key) is not None]
        out[key] = math.fsum(vals) / len(vals) if vals else None
    out["n_utts"] = len(per_utt)
    return out


def report_csv(per_utt: dict) -> str:
    buf = io.StringIO()
    cols = ["utt_id", *REPORT_FIELDS, "n_frames_ref", "n_frames_hyp", "n_mutually_voiced"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for u in sorted(per_utt):
        r = per_utt[u]
        w.writerow([u] + ["" if r.get(c) is None else r.get(c) for c in cols[1:]])
    return buf.getvalue()


__all__ = [
    "DtwPath", "MetricReport", "dtw_align", "dtw_from_distances", "pair_distances",
    "path_cost", "mcd", "f0_rmse", "semitone_accuracy", "vuv_error", "evaluate_pair",
    "corpus_means", "report_csv", "MCD_CONST",
]
