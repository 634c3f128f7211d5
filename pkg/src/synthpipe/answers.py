"""Final-answer extraction, normalization, equivalence, and majority voting.

All pure functions. Numeric equivalence is exact rational arithmetic so
verification never depends on floating-point rounding.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .config import AnswerFormat


@dataclass(frozen=True)
class ExtractedAnswer:
    raw: str
    normalized: str
    format: AnswerFormat


class FormatMismatchError(ValueError):
    pass


_ANSWER_OPEN = "<answer>"
_ANSWER_CLOSE = "</answer>"


def _extract_tagged(text):
    # Last opening tag, then the nearest close: the innermost final span.
    start = text.rfind(_ANSWER_OPEN)
    if start == -1:
        return None
    start += len(_ANSWER_OPEN)
    end = text.find(_ANSWER_CLOSE, start)
    if end == -1:
        return None
    return text[start:end]


def _extract_boxed(text):
    markers = ("\\boxed{", "boxed{")
    best = -1
    marker_len = 0
    for marker in markers:
        pos = text.rfind(marker)
        # Avoid matching "boxed{" inside "\boxed{" twice.
        if pos > 0 and marker == "boxed{" and text[pos - 1] == "\\":
            pos -= 1
            marker = "\\boxed{"
        if pos > best:
            best = pos
            marker_len = len(marker)
    if best == -1:
        return None
    i = best + marker_len
    depth = 1
    start = i
    while i < len(text) and depth > 0:
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
        i += 1
    if depth != 0:
        return None
    return text[start:i - 1]


def _extract_hash_marks(text):
    pos = text.rfind("####")
    if pos == -1:
        return None
    rest = text[pos + 4:]
    return rest.split("\n", 1)[0]


def extract_answer(completion, fmt):
    """Pull the final answer out of a completion; None when no marker."""
    fmt = AnswerFormat(fmt)
    if fmt is AnswerFormat.TAGGED_ANSWER:
        raw = _extract_tagged(completion)
    elif fmt is AnswerFormat.BOXED:
        raw = _extract_boxed(completion)
    else:
        raw = _extract_hash_marks(completion)
    if raw is None:
        return None
    return ExtractedAnswer(raw=raw, normalized=normalize(raw, fmt),
                           format=fmt)


_FRAC_RE = re.compile(r"^\\d?frac\{([^{}]+)\}\{([^{}]+)\}$")
_THOUSANDS_RE = re.compile(r"(?<=\d),(?=\d{3}\b)")


def parse_rational(text):
    """Parse a numeric answer into an exact Fraction, or None."""
    s = text.strip()
    for junk in ("$", "\\!", "\\,", "\\ "):
        s = s.replace(junk, "")
    s = s.strip()
    if not s:
        return None
    m = _FRAC_RE.match(s)
    if m:
        num, den = m.group(1), m.group(2)
        top = parse_rational(num)
        bottom = parse_rational(den)
        if top is None or bottom is None or bottom == 0:
            return None
        return top / bottom
    s = _THOUSANDS_RE.sub("", s)
    s = s.replace(" ", "")
    if "/" in s:
        parts = s.split("/")
        if len(parts) != 2:
            return None
        top = parse_rational(parts[0])
        bottom = parse_rational(parts[1])
        if top is None or bottom is None or bottom == 0:
            return None
        return top / bottom
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        return None


def format_rational(value):
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def normalize(raw, fmt):
    """Canonical text form: trimmed; option letters uppercased; numbers
    rendered as reduced exact rationals."""
    s = raw.strip()
    rational = parse_rational(s)
    if rational is not None:
        return format_rational(rational)
    if len(s) == 1 and s.isalpha():
        return s.upper()
    return s


def answers_equal(a, b):
    """True iff two extracted answers are equivalent under their format."""
    if a.format != b.format:
        raise FormatMismatchError(
            f"cannot compare {a.format.value} with {b.format.value}")
    if a.normalized == b.normalized:
        return True
    ra = parse_rational(a.normalized)
    rb = parse_rational(b.normalized)
    return ra is not None and rb is not None and ra == rb


def majority_vote(answers, min_votes):
    """Pick the most frequent answer class; None entries never win.

    Returns (winner, count) or None when the best class falls short of
    min_votes. Ties break to the lexicographically smallest normalized
    form, so the result is order-independent.
    """
    counts = Counter(a.normalized for a in answers if a is not None)
    if not counts:
        return None
    fmt = next(a.format for a in answers if a is not None)
    best_norm = min(counts, key=lambda n: (-counts[n], n))
    best_count = counts[best_norm]
    if best_count < min_votes:
        return None
    winner = ExtractedAnswer(raw=best_norm, normalized=best_norm, format=fmt)
    return winner, best_count
