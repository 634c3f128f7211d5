from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from synthpipe.answers import (ExtractedAnswer, FormatMismatchError,
                               answers_equal, extract_answer, majority_vote,
                               normalize, parse_rational)
from synthpipe.config import AnswerFormat


def ans(text, fmt=AnswerFormat.TAGGED_ANSWER):
    return ExtractedAnswer(raw=text, normalized=normalize(text, fmt),
                           format=fmt)


# --- extraction -----------------------------------------------------------

def test_tagged_extraction():
    out = extract_answer("<think>…</think><answer>B</answer>",
                         AnswerFormat.TAGGED_ANSWER)
    assert out.normalized == "B"


def test_tagged_last_and_innermost():
    text = "<answer>A</answer> later <answer> b </answer>"
    assert extract_answer(text, AnswerFormat.TAGGED_ANSWER).normalized == "B"
    nested = "<answer>outer <answer>C</answer></answer>"
    assert extract_answer(nested,
                          AnswerFormat.TAGGED_ANSWER).normalized == "C"


def test_boxed_extraction():
    out = extract_answer("… Answer: \\boxed{4}", AnswerFormat.BOXED)
    assert out.normalized == "4"


def test_boxed_balanced_braces():
    out = extract_answer("\\boxed{\\frac{2}{3}}", AnswerFormat.BOXED)
    assert out.raw == "\\frac{2}{3}"
    assert out.normalized == "2/3"


def test_boxed_last_occurrence():
    out = extract_answer("\\boxed{1} then \\boxed{2}", AnswerFormat.BOXED)
    assert out.normalized == "2"


def test_hash_marks_extraction():
    out = extract_answer("steps …\n#### 72", AnswerFormat.HASH_MARKS)
    assert out.normalized == "72"


def test_hash_marks_last_line_only():
    out = extract_answer("#### 5\nmore text\n#### 72\ntrailing",
                         AnswerFormat.HASH_MARKS)
    assert out.normalized == "72"


def test_absence_is_none():
    assert extract_answer("no marker here", AnswerFormat.TAGGED_ANSWER) \
        is None
    assert extract_answer("no marker", AnswerFormat.BOXED) is None
    assert extract_answer("no marker", AnswerFormat.HASH_MARKS) is None


@pytest.mark.parametrize("fmt,wrap", [
    (AnswerFormat.TAGGED_ANSWER, "<answer>{}</answer>"),
    (AnswerFormat.BOXED, "\\boxed{{{}}}"),
    (AnswerFormat.HASH_MARKS, "text #### {}"),
])
def test_extract_of_wrap_is_identity(fmt, wrap):
    for value in ("B", "42", "hello world"):
        completion = "prefix " + wrap.format(value)
        assert extract_answer(completion, fmt).raw.strip() == value


# --- normalization --------------------------------------------------------

def test_basic_normalization():
    fmt = AnswerFormat.TAGGED_ANSWER
    assert normalize(" b ", fmt) == "B"
    assert normalize("1,000", fmt) == "1000"
    assert normalize("4.0", fmt) == "4"
    assert normalize("+3", fmt) == "3"
    assert normalize("2/3", fmt) == "2/3"
    assert normalize("\\frac{2}{3}", fmt) == "2/3"


# 50 numeric forms checked against an independent Fraction-based oracle.
RATIONAL_FIXTURE = [
    "0", "1", "-1", "+7", "42", "007", "1000000",
    "1,000", "12,345,678", "-2,500",
    "0.5", "-0.25", "3.14", "2.0", "-0.0", ".5", "10.10",
    "1/2", "2/4", "-3/6", "10/5", "7/3", "-1/2", "100/400",
    "\\frac{1}{2}", "\\frac{2}{4}", "\\frac{10}{5}", "\\frac{-3}{4}",
    "\\dfrac{3}{9}", "\\frac{0}{5}",
    "$5", "$1,250", " 6 ", "8 ", "\t9\n",
    "0.125", "-12.5", "2.50", "1000.0", "0.0001",
    "5/10", "9/12", "-8/2", "22/7", "360/360",
    "\\frac{6}{8}", "\\frac{100}{25}", "-0.75", "16/64", "1.5",
]


def oracle_fraction(text):
    s = text.strip().lstrip("$").strip()
    if s.startswith("\\frac{") or s.startswith("\\dfrac{"):
        inner = s[s.index("{") + 1:-1]
        num, den = inner.split("}{")
        return Fraction(int(num), int(den))
    s = s.replace(",", "").replace(" ", "")
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    return Fraction(s)


@pytest.mark.parametrize("text", RATIONAL_FIXTURE)
def test_rational_fixture_matches_oracle(text):
    expected = oracle_fraction(text)
    parsed = parse_rational(text)
    assert parsed == expected
    normalized = normalize(text, AnswerFormat.BOXED)
    if expected.denominator == 1:
        assert normalized == str(expected.numerator)
    else:
        assert normalized == f"{expected.numerator}/{expected.denominator}"


def test_non_numeric_passthrough():
    assert parse_rational("banana") is None
    assert normalize("entailment", AnswerFormat.TAGGED_ANSWER) == \
        "entailment"


# --- equality -------------------------------------------------------------

def test_rational_equality():
    fmt = AnswerFormat.BOXED
    assert answers_equal(ans("0.5", fmt), ans("1/2", fmt))
    assert answers_equal(ans("B", fmt), ans("b", fmt))
    assert not answers_equal(ans("4", fmt), ans("5", fmt))


def test_format_mismatch_raises():
    with pytest.raises(FormatMismatchError):
        answers_equal(ans("4", AnswerFormat.BOXED),
                      ans("4", AnswerFormat.HASH_MARKS))


EQUIV_CORPUS = ["0.5", "1/2", "2/4", "4", "4.0", "B", "b", "yes", "Yes",
                "2/3", "\\frac{2}{3}", "-1", "-1.0"]


def test_equality_is_equivalence_relation():
    fmt = AnswerFormat.BOXED
    answers = [ans(t, fmt) for t in EQUIV_CORPUS]
    for a in answers:
        assert answers_equal(a, a)
        for b in answers:
            assert answers_equal(a, b) == answers_equal(b, a)
            for c in answers:
                if answers_equal(a, b) and answers_equal(b, c):
                    assert answers_equal(a, c)


# --- majority vote --------------------------------------------------------

def vote_list(texts, fmt=AnswerFormat.HASH_MARKS):
    return [None if t is None else ans(t, fmt) for t in texts]


def test_plurality():
    winner, count = majority_vote(vote_list(["4", "4", "5"]), min_votes=2)
    assert winner.normalized == "4"
    assert count == 2


def test_lexicographic_tie_break():
    winner, count = majority_vote(vote_list(["5", "4"]), min_votes=1)
    assert winner.normalized == "4"
    assert count == 1


def test_min_votes_threshold():
    votes = vote_list(["A"] * 7 + ["B"] * 6 + [None] * 3)
    assert majority_vote(votes, min_votes=8) is None
    winner, count = majority_vote(votes, min_votes=7)
    assert (winner.normalized, count) == ("A", 7)


def test_absents_never_win():
    assert majority_vote(vote_list([None, None]), min_votes=1) is None
    winner, _ = majority_vote(vote_list([None, None, "X"]), min_votes=1)
    assert winner.normalized == "X"


def brute_force_vote(texts, min_votes):
    counts = Counter(t for t in texts if t is not None)
    if not counts:
        return None
    best = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    if best[1] < min_votes:
        return None
    return best


@given(st.lists(st.sampled_from(["1", "2", "3", "10", None]), min_size=1,
                max_size=20),
       st.integers(min_value=1, max_value=10),
       st.randoms())
def test_vote_matches_brute_force_and_permutation_invariant(texts, min_votes,
                                                            rnd):
    votes = vote_list(texts)
    expected = brute_force_vote([v.normalized if v else None for v in votes],
                                min_votes)
    got = majority_vote(votes, min_votes)
    if expected is None:
        assert got is None
    else:
        assert (got[0].normalized, got[1]) == expected
    shuffled = list(votes)
    rnd.shuffle(shuffled)
    again = majority_vote(shuffled, min_votes)
    assert (got is None) == (again is None)
    if got is not None:
        assert (got[0].normalized, got[1]) == \
            (again[0].normalized, again[1])
