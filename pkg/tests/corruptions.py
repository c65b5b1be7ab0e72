"""Synthetic lint cases: a clean score plus one injected annotation defect.

Each case is ``(kind, score, alignment, audio_duration_sec, expected_kind)``.
Alignments are in audio time and come from the clean score, except for the
stretch case, where the audio no longer matches any annotation and no
alignment is supplied.
"""

from dataclasses import replace

import numpy as np

from muskit.corpus import alignment_for, random_score
from muskit.score import normalize_score, score_duration

KINDS = ("duplicate", "drop_lyric", "stretch", "overlap", "orphan_phoneme")
EXPECTED = {
    "duplicate": "RedundantNote",
    "drop_lyric": "MissingLyric",
    "stretch": "DurationMismatch",
    "overlap": "OverlapOrNegative",
    "orphan_phoneme": "UncoveredPhoneme",
}


def clean_case(rng, language):
    score = normalize_score(random_score(rng, language, n_phrases=3, notes_per_phrase=4))
    return score, alignment_for(score), score_duration(score)


def _sounding_after_sounding(events):
    return [i for i in range(1, len(events))
            if not events[i].is_rest and not events[i - 1].is_rest]


def inject(kind, rng, score, alignment, duration):
    ev = list(score.events)
    if kind == "duplicate":
        # split a syllable-starting note in two halves that both sing the syllable
        i = int(rng.choice([j for j, e in enumerate(ev) if e.bears_lyric]))
        half = ev[i].duration_sec / 2
        first = replace(ev[i], duration_sec=half)
        second = replace(ev[i], onset_sec=ev[i].onset_sec + half, duration_sec=ev[i].duration_sec - half)
        ev[i:i + 1] = [first, second]
        return score.with_events(ev), alignment, duration
    if kind == "drop_lyric":
        i = int(rng.choice([j for j in _sounding_after_sounding(ev) if ev[j].bears_lyric]))
        ev[i] = replace(ev[i], lyric="")
        return score.with_events(ev), alignment, duration
    if kind == "stretch":
        return score, None, duration * 1.05
    if kind == "overlap":
        i = int(rng.choice(_sounding_after_sounding(ev)))
        delta = float(rng.uniform(1e-4, 9e-4))
        ev[i] = replace(ev[i], onset_sec=ev[i].onset_sec - delta, duration_sec=ev[i].duration_sec + delta)
        return score.with_events(ev), alignment, duration
    if kind == "orphan_phoneme":
        i = int(rng.choice([j for j, e in enumerate(ev) if e.is_rest]))
        del ev[i]
        return score.with_events(ev), alignment, duration
    raise ValueError(kind)


def suite(n_cases=50, seed=2024):
    rng = np.random.default_rng(seed)
    languages = ("zh", "en", "jp", "kr")
    cases = []
    for n in range(n_cases):
        kind = KINDS[n % len(KINDS)]
        clean = clean_case(rng, languages[n % len(languages)])
        cases.append((kind, clean, inject(kind, rng, *clean)))
    return cases
