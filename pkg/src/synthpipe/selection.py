"""Pass-rate scoring over stochastic inferences and ascending top-M
selection of high-potential samples."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

from . import gateway
from .answers import extract_answer, answers_equal
from .prompts import build_solve_prompt

log = logging.getLogger(__name__)


@dataclass
class ScoredSample:
    sample: object
    pass_count: int
    score: float


def score(pass_count, total):
    """Pass rate, except a sample the model never solves scores 1 so it
    sorts with the saturated ones instead of first."""
    if not 0 <= pass_count <= total:
        raise ValueError(f"pass_count {pass_count} outside [0, {total}]")
    if pass_count == 0:
        return 1.0
    return float(Fraction(pass_count, total))


def count_passes(completions, label_answer, answer_format):
    passed = 0
    for completion in completions:
        predicted = extract_answer(completion, answer_format)
        if predicted is not None and answers_equal(predicted, label_answer):
            passed += 1
    return passed


def measure_pass_count(sample, base, task, config):
    """Count how many of pass_samples stochastic completions hit the label."""
    if config.eval_temperature <= 0:
        raise ValueError("pass-rate measurement needs temperature > 0")
    label = extract_answer(sample.output, task.answer_format)
    if label is None:
        raise ValueError(f"sample {sample.id} has no extractable label")
    result = gateway.complete(
        gateway.CompletionRequest(
            request_index=0,
            prompt=build_solve_prompt(task, sample.input),
            temperature=config.eval_temperature,
            n_samples=config.pass_samples,
            max_tokens=config.trainer_profile.max_response_length),
        base)
    return count_passes(result.completions, label, task.answer_format)


def score_samples(samples, base, task, config):
    """Measure pass counts for a whole set through one gateway batch."""
    reqs = [
        gateway.CompletionRequest(
            request_index=i,
            prompt=build_solve_prompt(task, s.input),
            temperature=config.eval_temperature,
            n_samples=config.pass_samples,
            max_tokens=config.trainer_profile.max_response_length)
        for i, s in enumerate(samples)
    ]
    batch = gateway.complete_many(reqs, base)
    if batch.errors:
        idx, exc = batch.errors[0]
        raise gateway.GatewayError(
            f"pass-rate measurement failed for {samples[idx].id}: {exc}")
    by_index = {r.request_index: r for r in batch.results}
    scored = []
    for i, sample in enumerate(samples):
        label = extract_answer(sample.output, task.answer_format)
        passes = count_passes(by_index[i].completions, label,
                              task.answer_format)
        scored.append(ScoredSample(sample=sample, pass_count=passes,
                                   score=score(passes, config.pass_samples)))
    return scored


def select(scored, m):
    """Ascending sort by score, stable in original order.

    Score-1 samples are used only as padding; among them, saturated
    (always-solved) samples precede zero-pass ones, which are the most
    likely to be mislabeled.
    """
    if not scored:
        raise ValueError("nothing to select from")
    if m < 1:
        raise ValueError("m must be >= 1")
    ordered = sorted(
        enumerate(scored),
        key=lambda pair: (pair[1].score,
                          0 if pair[1].pass_count > 0 else 1,
                          pair[0]))
    chosen = ordered[:min(m, len(ordered))]
    padding = sum(1 for _, s in chosen if s.score >= 1.0)
    if padding:
        log.warning(
            "selection padded with %d score-1 samples (saturated or "
            "zero-pass); fewer than %d samples had partial pass rates",
            padding, m)
    return [s.sample for _, s in chosen]
