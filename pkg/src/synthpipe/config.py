"""Task definitions, pipeline configuration, and built-in task presets.

Every tunable constant of the pipeline has exactly one home: the defaults
below. Other modules receive these values through PipelineConfig and must
never re-declare them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, asdict
from enum import Enum

import yaml

log = logging.getLogger(__name__)

# Pipeline defaults.
DEFAULT_N_INITIAL = 500
DEFAULT_M_TRAIN = 500
DEFAULT_VOTE_COUNT = 16
DEFAULT_PASS_SAMPLES = 64
DEFAULT_GEN_TEMPERATURE = 0.7
DEFAULT_EVAL_TEMPERATURE = 0.7
SOLVE_TEMPERATURE = 0.0
DEFAULT_RETRIEVAL_TOP_K = 20
DEFAULT_BUDGET_MULTIPLIER = 3.0

# Trainer profile defaults.
DEFAULT_ALGORITHM = "grpo"
DEFAULT_LEARNING_RATE = 1e-6
DEFAULT_RESPONSES_PER_PROMPT = 16
DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_RESPONSE_LENGTH = 2048
DEFAULT_KL_COEFFICIENT = 0.01
DEFAULT_EPOCHS = 5

# Gateway defaults.
DEFAULT_MAX_IN_FLIGHT = 8
DEFAULT_RETRY_LIMIT = 5


class ConfigError(ValueError):
    """Raised when a config or task file fails validation.

    ``fields`` names every offending field so callers can report them all
    at once.
    """

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])


class AnswerFormat(str, Enum):
    TAGGED_ANSWER = "tagged_answer"
    BOXED = "boxed"
    HASH_MARKS = "hash_marks"


@dataclass
class DemoExample:
    input: str
    output: str


@dataclass
class TaskDefinition:
    description_instruction: str
    input_format_instruction: str = ""
    output_format_instruction: str = ""
    demos: list[DemoExample] = field(default_factory=list)
    answer_format: AnswerFormat = AnswerFormat.TAGGED_ANSWER


@dataclass
class BackendDescriptor:
    role: str  # instructor | base | embedding
    kind: str  # http_openai_compatible | scripted
    endpoint_url: str = ""
    model_name: str = ""
    credential_env_var: str = ""
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    retry_limit: int = DEFAULT_RETRY_LIMIT
    # True when the endpoint honours the "n" parameter; default is fan-out.
    supports_n: bool = False
    # Scripted backends: either an in-process registry name or a table file.
    script_name: str = ""
    script_path: str = ""
    retry_backoff: float = 0.5


@dataclass
class TrainerProfile:
    algorithm_name: str = DEFAULT_ALGORITHM
    learning_rate: float = DEFAULT_LEARNING_RATE
    responses_per_prompt: int = DEFAULT_RESPONSES_PER_PROMPT
    batch_size: int = DEFAULT_BATCH_SIZE
    max_response_length: int = DEFAULT_MAX_RESPONSE_LENGTH
    kl_coefficient: float = DEFAULT_KL_COEFFICIENT
    epochs: int = DEFAULT_EPOCHS
    command_template: str = ""


def _scripted(role):
    return BackendDescriptor(role=role, kind="scripted")


@dataclass
class PipelineConfig:
    n_initial: int = DEFAULT_N_INITIAL
    m_train: int = DEFAULT_M_TRAIN
    vote_count: int = DEFAULT_VOTE_COUNT
    pass_samples: int = DEFAULT_PASS_SAMPLES
    gen_temperature: float = DEFAULT_GEN_TEMPERATURE
    eval_temperature: float = DEFAULT_EVAL_TEMPERATURE
    solve_temperature: float = SOLVE_TEMPERATURE
    retrieval_top_k: int = DEFAULT_RETRIEVAL_TOP_K
    generation_budget_multiplier: float = DEFAULT_BUDGET_MULTIPLIER
    min_votes: int | None = None  # None -> strict majority of vote_count
    instructor_backend: BackendDescriptor = field(
        default_factory=lambda: _scripted("instructor"))
    base_backend: BackendDescriptor = field(
        default_factory=lambda: _scripted("base"))
    embedding_backend: BackendDescriptor | None = None
    seed: int = 0
    corpus_paths: list[str] = field(default_factory=list)
    trainer_profile: TrainerProfile = field(default_factory=TrainerProfile)

    def effective_min_votes(self):
        if self.min_votes is not None:
            return self.min_votes
        return self.vote_count // 2 + 1


def _check_config(cfg):
    bad = []
    if cfg.n_initial < 1:
        bad.append("n_initial")
    if cfg.m_train < 1:
        bad.append("m_train")
    if cfg.vote_count < 1:
        bad.append("vote_count")
    if cfg.pass_samples < 1:
        bad.append("pass_samples")
    if not (0 <= cfg.gen_temperature <= 2):
        bad.append("gen_temperature")
    if cfg.eval_temperature <= 0:
        bad.append("eval_temperature")
    if cfg.retrieval_top_k < 1:
        bad.append("retrieval_top_k")
    if cfg.generation_budget_multiplier <= 0:
        bad.append("generation_budget_multiplier")
    if cfg.min_votes is not None and cfg.min_votes < 1:
        bad.append("min_votes")
    prof = cfg.trainer_profile
    for name in ("learning_rate", "responses_per_prompt", "batch_size",
                 "max_response_length", "kl_coefficient", "epochs"):
        if getattr(prof, name) <= 0:
            bad.append(f"trainer_profile.{name}")
    for role, backend in (("instructor_backend", cfg.instructor_backend),
                          ("base_backend", cfg.base_backend),
                          ("embedding_backend", cfg.embedding_backend)):
        if backend is None:
            continue
        if backend.kind == "http_openai_compatible":
            if not backend.endpoint_url:
                bad.append(f"{role}.endpoint_url")
            if not backend.model_name:
                bad.append(f"{role}.model_name")
        elif backend.kind != "scripted":
            bad.append(f"{role}.kind")
    if bad:
        raise ConfigError(
            "invalid config fields: " + ", ".join(bad), fields=bad)
    if cfg.vote_count % 2 == 0:
        log.warning("vote_count=%d is even; odd counts avoid exact ties",
                    cfg.vote_count)
    return cfg


def _backend_from_dict(role, data):
    if data is None:
        return None
    known = {f for f in BackendDescriptor.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"unknown backend fields for {role}: {sorted(unknown)}",
            fields=sorted(unknown))
    merged = dict(data)
    merged.setdefault("role", role)
    merged.setdefault("kind", "scripted")
    return BackendDescriptor(**merged)


def config_from_dict(data):
    """Build a PipelineConfig from a plain dict, filling defaults."""
    data = dict(data or {})
    for key, role in (("instructor_backend", "instructor"),
                      ("base_backend", "base"),
                      ("embedding_backend", "embedding")):
        if key in data:
            data[key] = _backend_from_dict(role, data[key])
    if "trainer_profile" in data and isinstance(data["trainer_profile"], dict):
        prof = data["trainer_profile"]
        unknown = set(prof) - set(TrainerProfile.__dataclass_fields__)
        if unknown:
            raise ConfigError(
                f"unknown trainer_profile fields: {sorted(unknown)}",
                fields=sorted(unknown))
        data["trainer_profile"] = TrainerProfile(**prof)
    unknown = set(data) - set(PipelineConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}",
                          fields=sorted(unknown))
    return _check_config(PipelineConfig(**data))


def load_config(path):
    """Load a YAML config file; omitted fields get the documented defaults."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a key/value mapping")
    return config_from_dict(data)


def config_to_dict(cfg):
    data = asdict(cfg)
    if data.get("embedding_backend") is None:
        data.pop("embedding_backend")
    return data


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)


def config_hash(cfg):
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def resolve_credential(backend):
    """Look up the bearer token named by the descriptor, if any."""
    if not backend.credential_env_var:
        return ""
    return os.environ.get(backend.credential_env_var, "")


# Phrases that suggest each answer format; used only to warn on mismatch.
_FORMAT_HINTS = {
    AnswerFormat.TAGGED_ANSWER: ("<answer>",),
    AnswerFormat.BOXED: ("boxed",),
    AnswerFormat.HASH_MARKS: ("####",),
}


def validate_task(task):
    """Normalize a TaskDefinition and warn on format inconsistencies."""
    desc = task.description_instruction.strip()
    if not desc:
        raise ConfigError("description_instruction is empty",
                          fields=["description_instruction"])
    demos = []
    for i, demo in enumerate(task.demos):
        if not demo.input.strip() or not demo.output.strip():
            raise ConfigError(f"demo {i} has an empty input or output",
                              fields=[f"demos[{i}]"])
        demos.append(DemoExample(demo.input.strip(), demo.output.strip()))
    out_fmt = task.output_format_instruction.strip()
    fmt = AnswerFormat(task.answer_format)
    if out_fmt:
        hints = _FORMAT_HINTS[fmt]
        if not any(h in out_fmt for h in hints):
            log.warning(
                "answer_format=%s but output instruction does not mention %s",
                fmt.value, " or ".join(hints))
        for other, other_hints in _FORMAT_HINTS.items():
            if other is fmt and fmt is not AnswerFormat.BOXED:
                continue
            if other is not fmt and any(h in out_fmt for h in other_hints):
                log.warning(
                    "output instruction mentions %s markers but "
                    "answer_format=%s", other.value, fmt.value)
    return TaskDefinition(
        description_instruction=desc,
        input_format_instruction=task.input_format_instruction.strip(),
        output_format_instruction=out_fmt,
        demos=demos,
        answer_format=fmt,
    )


def task_from_dict(data):
    demos = [DemoExample(**d) for d in data.get("demos", [])]
    return validate_task(TaskDefinition(
        description_instruction=data.get("description_instruction", ""),
        input_format_instruction=data.get("input_format_instruction", ""),
        output_format_instruction=data.get("output_format_instruction", ""),
        demos=demos,
        answer_format=AnswerFormat(data.get("answer_format", "tagged_answer")),
    ))


def task_to_dict(task):
    return {
        "description_instruction": task.description_instruction,
        "input_format_instruction": task.input_format_instruction,
        "output_format_instruction": task.output_format_instruction,
        "demos": [asdict(d) for d in task.demos],
        "answer_format": task.answer_format.value,
    }


_TAGGED_OUTPUT = (
    "Your output thinking process and answer should be enclosed within "
    "<think> </think> and <answer> </answer> tags, respectively, i.e., "
    "<think> thinking process here </think> "
    "<answer> the correct option here </answer>."
)

PRESETS = {
    "gsm8k": TaskDefinition(
        description_instruction=(
            "You are given a word problem involving basic arithmetic, "
            "algebra, or geometry. Your task is to carefully read the "
            "problem and provide a step-by-step solution for it"),
        input_format_instruction="",
        output_format_instruction=(
            "Let's think step by step and output the final answer "
            "after ####."),
        answer_format=AnswerFormat.HASH_MARKS,
    ),
    "math": TaskDefinition(
        description_instruction=(
            "For the math problem in Algebra, carefully read and understand "
            "the question. Apply your mathematical knowledge to derive the "
            "correct solution"),
        input_format_instruction="",
        output_format_instruction=(
            "Let's think step by step and output the final answer within "
            "boxed{}."),
        answer_format=AnswerFormat.BOXED,
    ),
    "gpqa": TaskDefinition(
        description_instruction=(
            "Your task is to answer challenging, graduate-level "
            "multiple-choice questions spanning Physics, Chemistry, and "
            "Biology, requiring deep subject-matter knowledge, complex "
            "reasoning, calculation, and synthesis of information."),
        input_format_instruction=(
            "Each data instance typically consists of a scientific question "
            "and 4 option labels and values are the corresponding answer "
            "texts."),
        output_format_instruction=_TAGGED_OUTPUT,
        answer_format=AnswerFormat.TAGGED_ANSWER,
    ),
    "logiqa": TaskDefinition(
        description_instruction=(
            "You are given a short passage and a multiple-choice question "
            "based on it. Your task is to carefully read the passage, "
            "reason about the information, and select the most logically "
            "correct answer from the provided choices."),
        input_format_instruction=(
            "The input should include a context passage labeled 'Context:', "
            "a logic question labeled 'Question:', and four options labeled "
            "A, B, C, and D."),
        output_format_instruction=_TAGGED_OUTPUT,
        answer_format=AnswerFormat.TAGGED_ANSWER,
    ),
    "medqa": TaskDefinition(
        description_instruction=(
            "The task evaluates a model's ability to answer multiple-choice "
            "questions from the United States Medical Licensing Examination "
            "(USMLE). These questions test professional-level knowledge "
            "across a broad range of medical domains, including physiology, "
            "pathology, pharmacology, and clinical reasoning. The task "
            "requires models to understand complex biomedical context, "
            "reason across multiple pieces of information, and choose the "
            "correct answer from 4 options."),
        input_format_instruction=(
            "First a clinical vignettes or diagrams. A clinical vignette is "
            "a short, descriptive medical case that simulates a real-life "
            "scenario involving a patient. It includes details like: Patient "
            "demographics (age, sex, etc.),Medical history,Symptoms and "
            "signs,Lab or imaging results,Progression or complication. Then "
            "a USMLE-style multiple-choice question with its four options."),
        output_format_instruction=_TAGGED_OUTPUT,
        answer_format=AnswerFormat.TAGGED_ANSWER,
    ),
    "mednli": TaskDefinition(
        description_instruction=(
            "You are given a pair of medical sentences: a premise (a "
            "statement derived from a patient's medical record) and a "
            "hypothesis (another medical statement). Your task is to "
            "determine the relationship between the premise and the "
            "hypothesis: Entailment, Contradiction, or Neutral."),
        input_format_instruction=(
            "Your input should start with 'Please classify the relationship "
            "between the premise and the hypothesis as 'entailment','neutral'"
            " or 'contradiction'.'. Then the premise sentence, and then the "
            "hypothesis sentence."),
        output_format_instruction=_TAGGED_OUTPUT,
        answer_format=AnswerFormat.TAGGED_ANSWER,
    ),
    "cqa": TaskDefinition(
        description_instruction=(
            "Given a passage excerpted from a consumer contract (e.g., Terms "
            "of Service, Privacy Policy, Rental Agreement) and a specific "
            "yes or no type question pertaining to that passage, the task is "
            "to answer the question based on the contract. Its knowledge "
            "involves consumer Law and contract Law. The task requires "
            "skills about Legal Text Comprehension, reasoning and analysis."),
        input_format_instruction=(
            "Your input should consists of a contract passage like "
            "'Contract:...' and then a yes-or-no question like "
            "'Question:...'"),
        output_format_instruction=_TAGGED_OUTPUT,
        answer_format=AnswerFormat.TAGGED_ANSWER,
    ),
    "cfa": TaskDefinition(
        description_instruction=(
            "Your task is to answer CFA exam questions in a multi-choice "
            "form, you should select the correct answer choice (e.g., A, B, "
            "C). These question is about asset valuation, applying "
            "investment tools and concepts to analyze various investments, "
            "portfolio management, wealth planning, ethical and professional "
            "standards. It requires skills about Fundamental Knowledge "
            "Understanding, Quantitative Analysis and Calculations, "
            "Application and Analysis, etc."),
        input_format_instruction=(
            "Follow this format: Read the questions and answers carefully, "
            "and choose the one you think is appropriate among the three "
            "options A, B and C.' then Q:[Your question here] CHOICES: "
            "A: ...,B: ...,C: ..."),
        output_format_instruction=(
            "Your output thinking process and answer should be enclosed "
            "within <think> </think> and <answer> </answer> tags, "
            "respectively, i.e., <think> thinking process here </think> "
            "<answer> a single option here </answer>."),
        answer_format=AnswerFormat.TAGGED_ANSWER,
    ),
}


def load_task(path_or_preset):
    """Load a task definition from a named preset or a YAML/JSON file."""
    if path_or_preset in PRESETS:
        return validate_task(PRESETS[path_or_preset])
    try:
        with open(path_or_preset, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(
            f"{path_or_preset!r} is neither a preset "
            f"({', '.join(sorted(PRESETS))}) nor a readable file")
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse task file {path_or_preset}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"task file {path_or_preset} must be a mapping")
    return task_from_dict(data)
