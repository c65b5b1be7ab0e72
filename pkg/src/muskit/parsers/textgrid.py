"""Praat TextGrid reader (long text format, interval tiers only)."""

from __future__ import annotations

import re

from ..errors import NoIntervalTierError, ScoreInvariantError, TextGridSyntaxError
from ..score import PhonemeAlignment

_KEY = re.compile(r'^\s*([A-Za-z][\w ]*?)\s*=\s*(.*?)\s*$')
_HEADER = re.compile(r'^\s*(item|intervals|points)\s*\[(\d*)\]\s*:?\s*$')


def _unquote(raw: str, lineno: int) -> str:
    if len(raw) < 2 or raw[0] != '"' or raw[-1] != '"':
        raise TextGridSyntaxError(f"line {lineno}: expected a quoted string, got {raw!r}")
    return raw[1:-1].replace('""', '"')


def _number(raw: str, lineno: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise TextGridSyntaxError(f"line {lineno}: expected a number, got {raw!r}") from None


def _logical_lines(text: str):
    """Yield (lineno, line), joining quoted strings that span physical lines."""
    buf, start = None, 0
    for n, line in enumerate(text.splitlines(), 1):
        if buf is not None:
            buf += "\n" + line
            if line.count('"') % 2 == 1:
                yield start, buf
                buf = None
            continue
        if line.count('"') % 2 == 1:
            buf, start = line, n
            continue
        yield n, line
    if buf is not None:
        raise TextGridSyntaxError(f"line {start}: unterminated string")


def parse_textgrid(document) -> PhonemeAlignment:
    """Return the intervals of the first IntervalTier.

    Empty labels are kept since they mark silence. Intervals must appear in
    time order; anything else is reported, not repaired.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8-sig")
    text = document.lstrip("﻿")
    lines = list(_logical_lines(text))
    if not any('ooTextFile' in ln for _, ln in lines[:3]):
        raise TextGridSyntaxError("line 1: missing 'File type = \"ooTextFile\"' header")
    if not any(_KEY.match(ln) and _KEY.match(ln).group(1) == "xmin" for _, ln in lines):
        raise TextGridSyntaxError("only the long TextGrid text format is supported")

    tiers = []
    current = None
    interval = None
    for lineno, line in lines:
        if not line.strip():
            continue
        h = _HEADER.match(line)
        if h:
            kind = h.group(1)
            if kind == "item" and h.group(2):
                current = {"class": None, "intervals": [], "line": lineno}
                tiers.append(current)
                interval = None
            elif kind == "intervals" and h.group(2):
                if current is None:
                    raise TextGridSyntaxError(f"line {lineno}: interval outside a tier")
                interval = {"line": lineno}
                current["intervals"].append(interval)
            continue
        m = _KEY.match(line)
        if not m or current is None:
            continue
        key, value = m.group(1), m.group(2)
        if key == "class":
            current["class"] = _unquote(value, lineno)
        elif interval is not None and key in ("xmin", "xmax"):
            interval[key] = _number(value, lineno)
        elif interval is not None and key == "text":
            interval["text"] = _unquote(value, lineno)
        elif key == "intervals: size" or key == "points: size":
            interval = None

    tier = next((t for t in tiers if t["class"] == "IntervalTier"), None)
    if tier is None:
        raise NoIntervalTierError("TextGrid has no IntervalTier")

    out = []
    prev_end = None
    for iv in tier["intervals"]:
        for key in ("xmin", "xmax", "text"):
            if key not in iv:
                raise TextGridSyntaxError(f"line {iv['line']}: interval missing field {key!r}")
        if prev_end is not None and iv["xmin"] < prev_end - 1e-9:
            raise TextGridSyntaxError(f"line {iv['line']}: interval out of order")
        if not iv["xmin"] < iv["xmax"]:
            raise TextGridSyntaxError(f"line {iv['line']}: interval has xmin >= xmax")
        prev_end = iv["xmax"]
        out.append((iv["xmin"], iv["xmax"], iv["text"]))
    try:
        return PhonemeAlignment(out)
    except ScoreInvariantError as exc:
        raise TextGridSyntaxError(str(exc)) from exc


def write_textgrid(alignment: PhonemeAlignment, tier_name: str = "phones") -> str:
    """Serialize an alignment as a single-tier long-format TextGrid."""
    ivs = alignment.intervals
    xmax = ivs[-1][1] if ivs else 0.0

    def q(s):
        return '"' + s.replace('"', '""') + '"'

    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0",
        f"xmax = {xmax!r}",
        "tiers? <exists>",
        "size = 1",
        "item []:",
        "    item [1]:",
        '        class = "IntervalTier"',
        f"        name = {q(tier_name)}",
        "        xmin = 0",
        f"        xmax = {xmax!r}",
        f"        intervals: size = {len(ivs)}",
    ]
    for i, (s, e, lab) in enumerate(ivs, 1):
        out += [
            f"        intervals [{i}]:",
            f"            xmin = {s!r}",
            f"            xmax = {e!r}",
            f"            text = {q(lab)}",
        ]
    return "\n".join(out) + "\n"
