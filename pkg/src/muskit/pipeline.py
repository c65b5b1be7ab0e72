"""Corpus-level workflow: prepare, lint, train-tokenizer, tokenize, evaluate.

Every command takes a :class:`PipelineConfig`, works per utterance with a
bounded thread pool, isolates per-utterance failures and writes files
atomically. Outputs depend only on inputs and config, so reruns are
byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import features as feat
from .audio import AudioBuffer, SegmentPolicy, read_wav, resample, segment, segment_name, write_wav
from .errors import InsufficientDataError, MuskitError, OverlapError
from .lint import LintPolicy, auto_correct, detect_issues
from .metrics import corpus_means, evaluate_pair, report_csv
from .parsers import parse_canonical, parse_midi, parse_musicxml, parse_textgrid, serialize_score
from .perception import batch_mos
from .score import LANGUAGES, normalize_score
from .tokens import (
    Codebook,
    RVQCodebook,
    format_token_line,
    kmeans_fit,
    read_codebook,
    rvq_encode,
    rvq_fit,
    tokenize,
    write_codebook,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_LINT, EXIT_PARTIAL = 0, 2, 3, 4
SCORE_FORMATS = ("musicxml", "midi", "canonical")


@dataclass
class TokenizerConfig:
    mode: str = "semantic"
    k: int = 128
    n_stages: int = 4
    k_per_stage: int = 32
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-6
    feature: str = "logmel"


@dataclass
class PipelineConfig:
    sample_rate: int = 24000
    frame: dict = field(default_factory=dict)
    segment: dict = field(default_factory=dict)
    lint: dict = field(default_factory=dict)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    n_mcep: int = 25
    output_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.tokenizer, dict):
            self.tokenizer = TokenizerConfig(**self.tokenizer)
        # build once to validate every component invariant
        self.frame_params
        self.segment_policy
        self.lint_policy

    @property
    def frame_params(self) -> feat.FrameParams:
        return feat.FrameParams(**{**self.frame, "sample_rate_hz": self.sample_rate})

    @property
    def segment_policy(self) -> SegmentPolicy:
        return SegmentPolicy(**self.segment)

    @property
    def lint_policy(self) -> LintPolicy:
        return LintPolicy(**self.lint)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frame"] = asdict(self.frame_params)
        d["segment"] = asdict(self.segment_policy)
        d["lint"] = asdict(self.lint_policy)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "frame" in d:
            d["frame"] = {k: v for k, v in d["frame"].items() if k != "sample_rate_hz"}
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- helpers ------------------------------------------------------------------------------

def atomic_write(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=1, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    audio: Path
    score: Path
    score_format: str
    alignment: Optional[Path]
    singer: str
    language: str


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a JSON-lines manifest; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    entries, seen = [], set()
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{n}: {exc}") from exc
        for key in ("utt_id", "audio", "score", "score_format"):
            if key not in d:
                raise ValueError(f"{path}:{n}: missing {key!r}")
        if d["utt_id"] in seen:
            raise ValueError(f"{path}:{n}: duplicate utt_id {d['utt_id']!r}")
        if d["score_format"] not in SCORE_FORMATS:
            raise ValueError(f"{path}:{n}: score_format must be one of {SCORE_FORMATS}")
        lang = d.get("language", "other")
        if lang not in LANGUAGES:
            raise ValueError(f"{path}:{n}: unknown language {lang!r}")
        seen.add(d["utt_id"])
        entries.append(ManifestEntry(
            d["utt_id"], base / d["audio"], base / d["score"], d["score_format"],
            base / d["alignment"] if d.get("alignment") else None,
            d.get("singer", ""), lang,
        ))
    return entries


def load_score(entry: ManifestEntry):
    """Parse the entry's score and canonicalize it when that is possible.

    Scores with real overlaps cannot be normalized; they are returned raw so
    that lint can report them.
    """
    data = entry.score.read_bytes()
    if entry.score_format == "musicxml":
        score = parse_musicxml(data, entry.language)
    elif entry.score_format == "midi":
        score = parse_midi(data, entry.language)
    else:
        score = replace(parse_canonical(data), language=entry.language)
    try:
        return normalize_score(score)
    except OverlapError:
        return score


def _error_record(utt_id, exc) -> dict:
    return {"utt_id": utt_id, "error": type(exc).__name__, "detail": str(exc)}


def _pool_map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- prepare --------------------------------------------------------------------------------

def _prepare_one(entry: ManifestEntry, config: PipelineConfig, out: Path):
    params = config.frame_params
    audio = read_wav(entry.audio.read_bytes())
    audio = resample(audio, config.sample_rate)
    score = load_score(entry)
    alignment = parse_textgrid(entry.alignment.read_bytes()) if entry.alignment else None
    fixed, corrections = auto_correct(score, alignment, audio.duration_sec, config.lint_policy)
    if corrections.unresolved:
        kinds = sorted({i.kind for i in corrections.unresolved})
        raise MuskitError(f"unresolved lint errors after correction: {', '.join(kinds)}")
    fixed = normalize_score(fixed)

    records = []
    for idx, (seg_score, seg_audio) in enumerate(segment(fixed, audio, config.segment_policy)):
        sid = segment_name(entry.utt_id, idx)
        rel = Path("segments") / sid
        logmel = feat.mel_spectrogram(seg_audio, params)
        mcep = feat.logmel_to_mcep(logmel.frames, config.n_mcep, params.frame_rate_hz)
        f0 = feat.extract_f0(seg_audio, params)
        atomic_write(out / f"{rel}.json", serialize_score(seg_score))
        atomic_write(out / f"{rel}.wav", write_wav(seg_audio))
        atomic_write(out / f"{rel}.logmel.mkfr", feat.write_frames(logmel))
        atomic_write(out / f"{rel}.mcep.mkfr", feat.write_frames(mcep))
        atomic_write(out / f"{rel}.f0.mkfr", feat.write_frames(feat.f0_to_frames(f0)))
        lint_doc = {
            "utt_id": entry.utt_id,
            "segment": sid,
            "corrections": corrections.to_dict(),
            "issues": [i.to_dict() for i in detect_issues(seg_score, policy=config.lint_policy)],
        }
        atomic_write(out / f"{rel}.lint.json", dump_json(lint_doc))
        records.append({
            "id": sid,
            "utt_id": entry.utt_id,
            "singer": entry.singer,
            "language": entry.language,
            "duration_sec": seg_audio.duration_sec,
            "n_frames": logmel.n_frames,
            "audio": f"{rel}.wav",
            "score": f"{rel}.json",
            "logmel": f"{rel}.logmel.mkfr",
            "mcep": f"{rel}.mcep.mkfr",
            "f0": f"{rel}.f0.mkfr",
            "lint": f"{rel}.lint.json",
        })
    return records


def cmd_prepare(manifest, config: PipelineConfig, out_dir, jobs: int = 1) -> int:
    """Parse, lint-correct, resample, segment and featurize every utterance.

    Writes ``index.json`` (segments plus config echo) and ``errors.jsonl``.
    Returns 0 when every utterance succeeded, else 4.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = read_manifest(manifest)

    def run(entry):
        try:
            return entry.utt_id, _prepare_one(entry, config, out), None
        except (MuskitError, OSError, ValueError) as exc:
            log.warning("prepare %s failed: %s", entry.utt_id, exc)
            return entry.utt_id, [], _error_record(entry.utt_id, exc)

    results = sorted(_pool_map(run, entries, jobs), key=lambda r: r[0])
    segments = [rec for _, recs, _ in results for rec in recs]
    errors = [err for _, _, err in results if err]
    index = {
        "config": config.to_dict(),
        "utterances": [u for u, _, err in results if not err],
        "segments": segments,
    }
    atomic_write(out / "index.json", dump_json(index))
    atomic_write(out / "errors.jsonl", "".join(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n" for e in errors))
    return EXIT_OK if not errors else EXIT_PARTIAL


# --- lint --------------------------------------------------------------------------------------

def fixed_path(score_path: Path) -> Path:
    return score_path.with_name(score_path.name.split(".")[0] + ".fixed.json")


def cmd_lint(manifest, config: PipelineConfig, fix: bool = False, jobs: int = 1,
             stdout=None, stderr=None) -> int:
    """Stream issues as JSON lines; with ``fix`` write ``<score>.fixed.json`` files.

    Exit 0 when no error-severity issue is found, 3 when some are, 4 when an
    utterance could not be read at all.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    policy = config.lint_policy
    entries = read_manifest(manifest)

    def run(entry):
        try:
            score = load_score(entry)
            alignment = parse_textgrid(entry.alignment.read_bytes()) if entry.alignment else None
            dur = read_wav(entry.audio.read_bytes()).duration_sec
            issues = detect_issues(score, alignment, dur, policy)
            if fix:
                fixed, _ = auto_correct(score, alignment, dur, policy)
                atomic_write(fixed_path(entry.score), serialize_score(fixed))
            return entry.utt_id, issues, None
        except (MuskitError, OSError, ValueError) as exc:
            return entry.utt_id, [], _error_record(entry.utt_id, exc)

    n_errors = n_failed = 0
    for utt, issues, err in _pool_map(run, entries, jobs):
        if err:
            n_failed += 1
            stderr.write(json.dumps(err, ensure_ascii=False) + "\n")
            continue
        for iss in issues:
            rec = {"utt_id": utt, **iss.to_dict()}
            stdout.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n_errors += iss.severity == "error"
    if n_failed:
        return EXIT_PARTIAL
    return EXIT_LINT if n_errors else EXIT_OK


# --- tokenizer -----------------------------------------------------------------------------------

def _load_index(dataset_dir) -> dict:
    return json.loads((Path(dataset_dir) / "index.json").read_text(encoding="utf-8"))


def _segment_frames(dataset_dir, index, feature):
    root = Path(dataset_dir)
    for seg in index["segments"]:
        yield seg["id"], feat.read_frames((root / seg[feature]).read_bytes())


def cmd_train_tokenizer(dataset_dir, config: PipelineConfig, mode: Optional[str] = None) -> Path:
    """Fit a semantic (k-means) or acoustic (RVQ) codebook on the dataset's frames.

    Writes ``tokenizer/<mode>.mkcb`` and returns its path.
    """
    tc = config.tokenizer
    mode = mode or tc.mode
    if mode not in ("semantic", "rvq"):
        raise ValueError(f"unknown tokenizer mode {mode!r}")
    index = _load_index(dataset_dir)
    mats = [fm.frames for _, fm in _segment_frames(dataset_dir, index, tc.feature)]
    data = np.concatenate(mats) if mats else np.zeros((0, 1))
    need = tc.k if mode == "semantic" else tc.k_per_stage
    if data.shape[0] < need:
        raise InsufficientDataError(
            f"{data.shape[0]} frames available but {need} clusters requested; "
            "add utterances or lower tokenizer.k / tokenizer.k_per_stage in the config"
        )
    fm = feat.FrameMatrix(data, config.frame_params.frame_rate_hz, "external" if tc.feature == "f0" else tc.feature)
    if mode == "semantic":
        cb = kmeans_fit(fm, tc.k, tc.seed, tc.max_iters, tc.tol)
    else:
        cb = rvq_fit(fm, tc.n_stages, tc.k_per_stage, tc.seed, tc.max_iters, tc.tol)
    path = Path(dataset_dir) / "tokenizer" / f"{mode}.mkcb"
    atomic_write(path, write_codebook(cb))
    atomic_write(path.with_suffix(".json"), dump_json({"mode": mode, "config": config.to_dict()}))
    return path


def cmd_tokenize(dataset_dir, codebook_path, config: Optional[PipelineConfig] = None) -> Path:
    """Write ``tokens/<codebook stem>.txt``: one ``seg_id s0:... s1:...`` line per segment."""
    cb = read_codebook(Path(codebook_path).read_bytes())
    feature = (config or PipelineConfig()).tokenizer.feature
    index = _load_index(dataset_dir)
    lines = []
    for sid, fm in _segment_frames(dataset_dir, index, feature):
        toks = rvq_encode(fm, cb) if isinstance(cb, RVQCodebook) else tokenize(fm, cb)
        lines.append(format_token_line(sid, toks))
    path = Path(dataset_dir) / "tokens" / f"{Path(codebook_path).stem}.txt"
    atomic_write(path, "".join(line + "\n" for line in lines))
    return path


# --- evaluate ------------------------------------------------------------------------------------

def cmd_evaluate(ref_dir, hyp_dir, config: PipelineConfig, out_dir, mos_endpoint: Optional[str] = None,
                 jobs: int = 1) -> tuple[int, dict]:
    """Score every hyp WAV against the ref WAV with the same stem.

    Writes ``report.json`` and ``report.csv`` to ``out_dir``. Exit 0 when at
    least one pair was evaluated, else 4.
    """
    ref = {p.stem: p for p in sorted(Path(ref_dir).glob("*.wav"))}
    hyp = {p.stem: p for p in sorted(Path(hyp_dir).glob("*.wav"))}
    common = sorted(set(ref) & set(hyp))
    unmatched = {"ref_only": sorted(set(ref) - set(hyp)), "hyp_only": sorted(set(hyp) - set(ref))}
    params = config.frame_params

    def run(utt):
        try:
            r = read_wav(ref[utt].read_bytes())
            h = read_wav(hyp[utt].read_bytes())
            return utt, evaluate_pair(r, h, params, config.n_mcep).to_dict(), h, None
        except (MuskitError, OSError, ValueError) as exc:
            return utt, None, None, _error_record(utt, exc)

    per_utt, errors, hyp_audio = {}, [], []
    for utt, rep, h, err in _pool_map(run, common, jobs):
        if err:
            errors.append(err)
        else:
            per_utt[utt] = rep
            hyp_audio.append((utt, h))

    if mos_endpoint and hyp_audio:
        scores = batch_mos(mos_endpoint, hyp_audio, concurrency_limit=max(1, jobs))
        for utt, res in scores.items():
            if isinstance(res, dict):
                per_utt[utt]["errors"].append(f"{res['error']}: {res['detail']}")
            else:
                per_utt[utt]["mos"] = res.mos
                per_utt[utt]["mos_model_id"] = res.model_id

    report = {
        "per_utt": per_utt,
        "mean": corpus_means(per_utt),
        "config": config.to_dict(),
        "unmatched": unmatched,
        "errors": errors,
    }
    out = Path(out_dir)
    atomic_write(out / "report.json", dump_json(report))
    atomic_write(out / "report.csv", report_csv(per_utt))
    return (EXIT_OK if per_utt else EXIT_PARTIAL), report


__all__ = [
    "PipelineConfig", "TokenizerConfig", "ManifestEntry", "read_manifest", "cmd_prepare", "cmd_lint",
    "cmd_train_tokenizer", "cmd_tokenize", "cmd_evaluate", "Codebook", "AudioBuffer",
]
