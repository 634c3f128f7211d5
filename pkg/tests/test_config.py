import re
from pathlib import Path

import pytest

from synthpipe.config import (AnswerFormat, ConfigError, DemoExample,
                              PipelineConfig, TaskDefinition, PRESETS,
                              config_to_dict, load_config, load_task,
                              save_config, validate_task)


def write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_empty_config_gets_documented_defaults(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.n_initial == 500
    assert cfg.m_train == 500
    assert cfg.vote_count == 16
    assert cfg.pass_samples == 64
    assert cfg.gen_temperature == 0.7


def test_single_field_override_keeps_other_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "m_train: 100\n"))
    assert cfg.m_train == 100
    assert cfg.n_initial == 500
    assert cfg.vote_count == 16


def test_invalid_field_named_in_error(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, "pass_samples: 0\n"))
    assert "pass_samples" in exc.value.fields


def test_multiple_invalid_fields_all_named(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, "pass_samples: 0\nvote_count: 0\n"))
    assert {"pass_samples", "vote_count"} <= set(exc.value.fields)


def test_unknown_field_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "no_such_field: 1\n"))


def test_parse_error_reported(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "m_train: [unclosed\n"))


def test_defaults_round_trip(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    save_config(cfg, tmp_path / "out.yaml")
    reloaded = load_config(tmp_path / "out.yaml")
    assert config_to_dict(reloaded) == config_to_dict(cfg)


def test_even_vote_count_warns(tmp_path, caplog):
    with caplog.at_level("WARNING"):
        load_config(write(tmp_path, "vote_count: 4\n"))
    assert any("even" in r.message for r in caplog.records)


def test_effective_min_votes_is_strict_majority():
    assert PipelineConfig(vote_count=16).effective_min_votes() == 9
    assert PipelineConfig(vote_count=5).effective_min_votes() == 3
    assert PipelineConfig(vote_count=5, min_votes=1).effective_min_votes() \
        == 1


def test_http_backend_requires_endpoint_and_model(tmp_path):
    text = ("instructor_backend:\n"
            "  kind: http_openai_compatible\n")
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, text))
    assert "instructor_backend.endpoint_url" in exc.value.fields
    assert "instructor_backend.model_name" in exc.value.fields


def test_logiqa_preset_is_tagged():
    task = load_task("logiqa")
    assert task.answer_format is AnswerFormat.TAGGED_ANSWER
    assert "<answer> the correct option here </answer>" in \
        task.output_format_instruction


def test_gsm8k_preset_is_hash_marks():
    task = load_task("gsm8k")
    assert task.answer_format is AnswerFormat.HASH_MARKS
    assert "####" in task.output_format_instruction


def test_all_eight_presets_validate():
    assert len(PRESETS) == 8
    for name in PRESETS:
        task = load_task(name)
        assert task.description_instruction


def test_blank_description_rejected():
    with pytest.raises(ConfigError):
        validate_task(TaskDefinition(description_instruction="   "))


def test_validate_trims_and_keeps_demos():
    task = validate_task(TaskDefinition(
        description_instruction="  solve things  ",
        demos=[DemoExample(input=" q ", output=" a ")],
        answer_format=AnswerFormat.BOXED,
    ))
    assert task.description_instruction == "solve things"
    assert task.demos[0].input == "q"


def test_format_mismatch_warns(caplog):
    with caplog.at_level("WARNING"):
        validate_task(TaskDefinition(
            description_instruction="solve",
            output_format_instruction="wrap the answer in <answer> tags",
            answer_format=AnswerFormat.BOXED,
        ))
    assert any("boxed" in r.message for r in caplog.records)


def test_empty_demo_rejected():
    with pytest.raises(ConfigError):
        validate_task(TaskDefinition(
            description_instruction="solve",
            demos=[DemoExample(input="", output="a")],
        ))


def test_task_file_loading(tmp_path):
    path = write(tmp_path, (
        "description_instruction: answer riddles\n"
        "answer_format: hash_marks\n"
        "demos:\n"
        "  - input: riddle one\n"
        "    output: 'solution #### 4'\n"), name="task.yaml")
    task = load_task(path)
    assert task.answer_format is AnswerFormat.HASH_MARKS
    assert len(task.demos) == 1


def test_unknown_preset_or_path_rejected():
    with pytest.raises(ConfigError):
        load_task("no-such-preset")


DISTINCTIVE_DEFAULTS = ["500", "2048", "0.7", "0.01", "1e-6", "1e-06"]


def test_default_constants_live_only_in_config_module():
    src = Path(__file__).parent.parent / "src" / "synthpipe"
    pattern = re.compile(
        r"(?<![\w.])(" + "|".join(map(re.escape, DISTINCTIVE_DEFAULTS)) +
        r")(?![\w.])")
    offenders = []
    for path in src.rglob("*.py"):
        if path.name == "config.py":
            continue
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            if pattern.search(line):
                offenders.append(f"{path.name}:{lineno}: {line.strip()}")
    assert not offenders, offenders
