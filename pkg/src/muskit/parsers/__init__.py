from .canonical import parse_canonical, score_from_dict, score_to_dict, serialize_score
from .midi import LyricDiscardedWarning, TempoMap, parse_midi
from .musicxml import parse_musicxml
from .textgrid import parse_textgrid, write_textgrid

__all__ = [
    "parse_canonical",
    "serialize_score",
    "score_from_dict",
    "score_to_dict",
    "parse_midi",
    "TempoMap",
    "LyricDiscardedWarning",
    "parse_musicxml",
    "parse_textgrid",
    "write_textgrid",
]
