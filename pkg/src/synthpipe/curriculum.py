"""Difficulty adaptation: solvability partition, harder/easier rewrites,
and assembly of the combined sample set."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import gateway
from .answers import extract_answer, answers_equal
from .prompts import render_prompt, build_solve_prompt, format_sample_record
from .samples import normalized_input
from .synthesis import Rejection, ReplyParseError, parse_example_reply, verify

log = logging.getLogger(__name__)


@dataclass
class SolvabilityPartition:
    solved: list = field(default_factory=list)
    unsolved: list = field(default_factory=list)


def classify(samples, base, task, config):
    """Split samples by whether the base model's greedy answer matches the
    label. Unextractable greedy output counts as unsolved."""
    reqs = [
        gateway.CompletionRequest(
            request_index=i,
            prompt=build_solve_prompt(task, s.input),
            temperature=config.solve_temperature,
            max_tokens=config.trainer_profile.max_response_length,
        )
        for i, s in enumerate(samples)
    ]
    batch = gateway.complete_many(reqs, base)
    if batch.errors:
        idx, exc = batch.errors[0]
        raise gateway.GatewayError(
            f"classification failed for sample {samples[idx].id}: {exc}")
    partition = SolvabilityPartition()
    by_index = {r.request_index: r for r in batch.results}
    for i, sample in enumerate(samples):
        label = extract_answer(sample.output, task.answer_format)
        predicted = extract_answer(by_index[i].completions[0],
                                   task.answer_format)
        if label is not None and predicted is not None \
                and answers_equal(predicted, label):
            partition.solved.append(sample)
        else:
            partition.unsolved.append(sample)
    return partition


def rewrite(sample, direction, instructor, task, config):
    """Rewrite one sample harder or easier, then verify like any candidate.

    Returns a Sample linked to its parent, or a Rejection.
    """
    if direction not in ("harder", "easier"):
        raise ValueError(f"unknown rewrite direction {direction!r}")
    prompt = render_prompt(direction, {
        "sample": format_sample_record(sample.input, sample.output),
    })
    result = gateway.complete(
        gateway.CompletionRequest(
            request_index=0, prompt=prompt,
            temperature=config.gen_temperature,
            max_tokens=config.trainer_profile.max_response_length),
        instructor)
    try:
        candidate = parse_example_reply(result.completions[0])
    except ReplyParseError as exc:
        return Rejection("unparseable", str(exc))
    if normalized_input(candidate[0]) == normalized_input(sample.input):
        return Rejection("duplicate", "rewritten input matches the parent")
    outcome = verify(candidate, task, instructor, config.vote_count,
                     config.effective_min_votes(), config.gen_temperature,
                     config.trainer_profile.max_response_length)
    if isinstance(outcome, Rejection):
        return outcome
    outcome.id = f"{direction}-{sample.id}"
    outcome.provenance = direction
    outcome.parent_id = sample.id
    return outcome


def rewrite_all(partition, instructor, task, config):
    """One rewrite pass: solved -> harder, unsolved -> easier.

    Failed rewrites are dropped but tallied by reason.
    """
    harder, easier = [], []
    reasons = {}
    for direction, parents, bucket in (("harder", partition.solved, harder),
                                       ("easier", partition.unsolved,
                                        easier)):
        for parent in parents:
            outcome = rewrite(parent, direction, instructor, task, config)
            if isinstance(outcome, Rejection):
                key = f"{direction}:{outcome.reason}"
                reasons[key] = reasons.get(key, 0) + 1
                log.info("dropped %s rewrite of %s: %s", direction,
                         parent.id, outcome.reason)
            else:
                bucket.append(outcome)
    return harder, easier, reasons


def assemble(initial, harder, easier):
    """Concatenate initial + harder + easier, deduping by normalized input;
    the earliest provenance wins a collision."""
    seen = set()
    combined = []
    for sample in list(initial) + list(harder) + list(easier):
        norm = normalized_input(sample.input)
        if norm in seen:
            log.info("dropping %s: duplicate input", sample.id)
            continue
        seen.add(norm)
        combined.append(sample)
    return combined
