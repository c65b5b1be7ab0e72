"""Scores, parsing and lint: from a hand-written score with mistakes to a clean one."""

# %% [markdown]
# A score is a gapless list of note events. Each one has a lyric syllable, a
# MIDI pitch (None for rests), an onset and a duration in seconds. A note
# flagged as a slur continuation carries on the previous syllable (a melisma).

# %%
from muskit import NoteEvent, PhonemeAlignment, Score, auto_correct, detect_issues
from muskit.parsers import parse_canonical, serialize_score

score = Score([
    NoteEvent("twin", 60, 0.0, 0.5),
    NoteEvent("kle", 60, 0.5, 0.5),
    NoteEvent("kle", 60, 1.0, 0.5),   # the same syllable split in two by mistake
    NoteEvent("", 67, 1.5, 0.5),      # a note with its lyric lost
    NoteEvent("lit", 69, 2.0, 1.0),
], tempo_bpm=120, language="en")

# %% [markdown]
# The canonical JSON form round-trips exactly.

# %%
text = serialize_score(score)
assert parse_canonical(text) == score
print(text[:120], "...")

# %% [markdown]
# Lint checks the score against its own sung text, its audio length and
# (optionally) a phoneme alignment. A repeated syllable on the same pitch is
# held, not re-sung, so the sung text is "twin kle lit" and the split note is
# one note too many. The empty-lyric note is reported separately.

# %%
alignment = PhonemeAlignment([(0.0, 1.0, "t"), (1.0, 2.0, "k"), (2.0, 3.0, "l")])
issues = detect_issues(score, alignment, audio_duration_sec=3.0)
for issue in issues:
    print(issue.severity, issue.kind, issue.location, issue.detail)

# %% [markdown]
# auto_correct turns both into slur continuations of "kle" and logs each change.
# Running it again changes nothing.

# %%
fixed, log = auto_correct(score, alignment, audio_duration_sec=3.0)
for entry in log.entries:
    print(entry.to_dict())
print([(e.lyric, e.midi_pitch, e.is_slur_continuation) for e in fixed.events])
again, log2 = auto_correct(fixed, alignment, audio_duration_sec=3.0)
assert again == fixed and len(log2) == 0
