"""Initial sample generation: pattern summarization, retrieval-grounded
generation, majority-vote verification, and exact-match dedup."""

from __future__ import annotations

import ast
import json
import logging
import math
import re
from dataclasses import dataclass, field

from . import gateway, retrieval
from .answers import extract_answer, majority_vote
from .prompts import render_prompt, format_demos, build_solve_prompt
from .samples import Sample, VerificationRecord, normalized_input

log = logging.getLogger(__name__)


@dataclass
class Pattern:
    text: str


@dataclass
class Rejection:
    reason: str  # no_majority | consensus_mismatch | unextractable
    detail: str = ""


@dataclass
class SynthesisStats:
    raw_generated: int = 0
    parse_failures: int = 0
    duplicates: int = 0
    rejections: dict[str, int] = field(default_factory=dict)
    accepted: int = 0

    def note_rejection(self, reason):
        self.rejections[reason] = self.rejections.get(reason, 0) + 1

    def to_dict(self):
        return {
            "raw_generated": self.raw_generated,
            "parse_failures": self.parse_failures,
            "duplicates": self.duplicates,
            "rejections": dict(sorted(self.rejections.items())),
            "accepted": self.accepted,
        }


class ReplyParseError(ValueError):
    pass


class BudgetExhaustedError(RuntimeError):
    """Generation budget ran out before n_initial samples were accepted."""

    def __init__(self, samples, stats):
        super().__init__(
            f"budget exhausted: {stats.accepted} accepted after "
            f"{stats.raw_generated} raw generations")
        self.samples = samples
        self.stats = stats


_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\n?(.*?)```", re.DOTALL)


def parse_example_reply(text):
    """Parse an instructor reply into an (input, output) pair.

    Accepts plain JSON, python-dict literals, code-fenced blocks, and
    replies with prose around the record.
    """
    candidates = [m.strip() for m in _FENCE_RE.findall(text)] or [text]
    for chunk in candidates:
        start = chunk.find("{")
        if start == -1:
            continue
        record = None
        try:
            record, _ = json.JSONDecoder().raw_decode(chunk[start:])
        except ValueError:
            end = chunk.rfind("}")
            while end > start:
                try:
                    record = ast.literal_eval(chunk[start:end + 1])
                    break
                except (ValueError, SyntaxError):
                    end = chunk.rfind("}", start, end)
        if not isinstance(record, dict):
            continue
        if "input" in record and "output" in record:
            inp, out = record["input"], record["output"]
            if isinstance(inp, str) and isinstance(out, str) \
                    and inp.strip() and out.strip():
                return inp.strip(), out.strip()
    raise ReplyParseError(
        f"reply has no usable input/output record: {text[:120]!r}")


def summarize_pattern(demos, task, instructor, temperature, max_tokens=None):
    """Ask the instructor for a prose abstraction of the demo examples."""
    if not demos:
        raise ValueError("summarize_pattern requires at least one demo")
    prompt = render_prompt("pattern", {
        "description": task.description_instruction,
        "demos": format_demos(demos),
    })
    result = gateway.complete(
        gateway.CompletionRequest(request_index=0, prompt=prompt,
                                  temperature=temperature,
                                  max_tokens=max_tokens),
        instructor)
    reply = result.completions[0].strip()
    if not reply:
        raise ReplyParseError("instructor returned an empty pattern")
    return Pattern(text=reply)


def generate_raw(passages, pattern, demos, task, instructor, temperature,
                 max_tokens=None):
    """One generation call; returns a candidate (input, output) pair."""
    if (pattern is None) != (not demos):
        raise ValueError("pattern must be present exactly when demos are")
    context = {
        "description": task.description_instruction,
        "input_format": task.input_format_instruction,
        "output_format": task.output_format_instruction,
    }
    if demos:
        context["pattern"] = pattern.text
        context["demos"] = format_demos(demos)
    if passages:
        context["passages"] = "\n\n".join(p.text for p in passages)
    prompt = render_prompt("generate", context)
    result = gateway.complete(
        gateway.CompletionRequest(request_index=0, prompt=prompt,
                                  temperature=temperature,
                                  max_tokens=max_tokens),
        instructor)
    return parse_example_reply(result.completions[0])


def verify(candidate, task, instructor, vote_count, min_votes, temperature,
           max_tokens=None):
    """Majority-vote verification of a candidate pair.

    The voters see only the task input, never the candidate output, so
    consensus is independent evidence. Accepts iff the winning answer
    reaches min_votes and matches the candidate's own final answer.
    """
    if vote_count < 1:
        raise ValueError("vote_count must be >= 1")
    cand_input, cand_output = candidate
    own = extract_answer(cand_output, task.answer_format)
    if own is None:
        return Rejection("unextractable",
                         "candidate output has no final-answer marker")
    prompt = build_solve_prompt(task, cand_input)
    result = gateway.complete(
        gateway.CompletionRequest(request_index=0, prompt=prompt,
                                  temperature=temperature,
                                  n_samples=vote_count,
                                  max_tokens=max_tokens),
        instructor)
    votes = [extract_answer(c, task.answer_format)
             for c in result.completions]
    voted = majority_vote(votes, min_votes)
    if voted is None:
        return Rejection("no_majority",
                         f"no answer reached {min_votes} of {vote_count}")
    winner, count = voted
    if winner.normalized != own.normalized:
        return Rejection(
            "consensus_mismatch",
            f"consensus {winner.normalized!r} != candidate "
            f"{own.normalized!r}")
    return Sample(
        id="",  # assigned by the caller on acceptance
        input=cand_input,
        output=cand_output,
        provenance="initial",
        parent_id=None,
        source_passage_ids=[],
        verification=VerificationRecord(
            votes_cast=vote_count,
            winning_count=count,
            agreement_ratio=count / vote_count,
        ),
    )


def is_duplicate(candidate_input, accepted):
    norm = normalized_input(candidate_input)
    return any(normalized_input(s.input) == norm for s in accepted)


def _passage_window(pool, call_index):
    """Successive calls consume the retrieved list from a rotating start
    offset, cycling, so grounding spreads across the whole pool."""
    if not pool:
        return []
    start = call_index % len(pool)
    return [pool[(start + j) % len(pool)] for j in range(len(pool))]


def synthesize_initial(task, config, index, keywords=None):
    """Generate, dedup, and verify until n_initial samples are accepted.

    Returns (samples, stats). Raises BudgetExhaustedError (carrying the
    partial set) when budget_multiplier * n_initial raw generations are
    consumed first.
    """
    instructor = config.instructor_backend
    temperature = config.gen_temperature
    max_tokens = config.trainer_profile.max_response_length
    min_votes = config.effective_min_votes()

    pattern = None
    if task.demos:
        pattern = summarize_pattern(task.demos, task, instructor,
                                    temperature, max_tokens)

    pool = []
    if index is not None:
        if keywords is None:
            keywords = retrieval.extract_keywords(
                task, instructor, temperature, max_tokens)
        pool = retrieval.retrieve(keywords, index, config.retrieval_top_k)

    budget = math.ceil(config.generation_budget_multiplier * config.n_initial)
    stats = SynthesisStats()
    accepted = []
    while stats.accepted < config.n_initial and stats.raw_generated < budget:
        passages = _passage_window(pool, stats.raw_generated)
        stats.raw_generated += 1
        try:
            candidate = generate_raw(passages, pattern, task.demos, task,
                                     instructor, temperature, max_tokens)
        except ReplyParseError as exc:
            stats.parse_failures += 1
            log.debug("generation reply unparseable: %s", exc)
            continue
        if is_duplicate(candidate[0], accepted):
            stats.duplicates += 1
            continue
        outcome = verify(candidate, task, instructor, config.vote_count,
                         min_votes, temperature, max_tokens)
        if isinstance(outcome, Rejection):
            stats.note_rejection(outcome.reason)
            continue
        outcome.id = f"init-{len(accepted) + 1:04d}"
        outcome.source_passage_ids = [p.id for p in passages]
        accepted.append(outcome)
        stats.accepted += 1

    if stats.accepted < config.n_initial:
        raise BudgetExhaustedError(accepted, stats)
    return accepted, stats
