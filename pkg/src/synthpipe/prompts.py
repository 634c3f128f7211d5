"""Prompt templates for every instructor-facing stage.

The keyword, generation, and harder/easier templates are fixed text with
slots; rendering is a pure function of (stage, context). The pattern
summarization template is our own wording (no canonical text exists for it).
"""

from __future__ import annotations


class PromptError(ValueError):
    """A required slot is missing from the render context."""


STAGES = ("keyword", "pattern", "generate", "harder", "easier")


def format_demos(demos):
    """Render demo examples as Input/Output blocks."""
    blocks = []
    for demo in demos:
        blocks.append(f"Input: {demo.input}\nOutput: {demo.output}")
    return "\n\n".join(blocks)


def format_sample_record(input_text, output_text):
    """Render a sample as the dict literal the rewrite prompts expect."""
    return repr({"input": input_text, "output": output_text})


_KEYWORD_WITH_DEMOS = (
    "You can summarize the domain of this task: {description} into a "
    "keyword. You can refer to these task examples {demos}. "
    "Only output the keyword."
)

_KEYWORD_NO_DEMOS = (
    "You can summarize the domain of this task: {description} into a "
    "keyword. Only output the keyword."
)

_GENERATE_HEAD = (
    "As a Dataset Generator, your task is to generate one new example "
    "(`input` and `output`) based on the [task instruction], "
    "[sample pattern] [reference passage], and [few-shot examples]. "
    "Please provide a JSON dictionary response that includes the new "
    "`input` and its corresponding `output`. Use the `input` and `output` "
    "keys in the dictionary.\n"
    "\n"
    "Try you best to ensure that the input and output you generate are "
    "distinct from the provided examples while maintaining a diverse, "
    "detailed, precise, comprehensive, and high-quality response.\n"
    "\n"
    "You must consider the task instruction (task knowledge), provided "
    "examples (format), and the passage (domain knowledge) to generate "
    "your training data.\n"
    "\n"
    "Here is the task instruction: {description}\n"
    "\n"
    "Here is the input instruction: {input_format}. You should follow the "
    "input format in the instruction strictly to generate data!!!\n"
    "\n"
    "Here is the output instruction: {output_format}. You should follow "
    "the output format in the instruction strictly to generate data!!!\n"
)

_GENERATE_PATTERN_BLOCK = (
    "\n"
    "Here is the sample pattern {pattern}. You should follow the input and "
    "output pattern strictly to generate data!!!\n"
    "You can refer to demonstration examples. You should generate examples "
    "that are in the same difficulty or are harder: {demos}\n"
)

_GENERATE_PASSAGE_BLOCK = (
    "\n"
    "Here are some related objects or passages that you can refer to: "
    "{passages}\n"
)

_GENERATE_TAIL = (
    "\n"
    "Before generating the new example, ensure that you strictly adhere to "
    "the rules mentioned in the [Requirement] and follow the example "
    "format. Think twice before generating a new example. "
    "New example (in JSON):"
)

_HARDER = (
    "The current sample is overly simplistic and can be solved effortlessly "
    "by the model. Please generate an alternative and task-similar sample "
    "that presents a significantly more challenging and intricate "
    "problem—one that requires multi-step reasoning, creative "
    "problem-solving, and deeper analytical thought. Only output the "
    "revised sample in the python dictionary form. Current sample: {sample}"
)

_EASIER = (
    "The given sample is too challenging for the model to solve. Please "
    "generate a task-similar alternative that is easier or represents a "
    "sub-problem of the original sample. Output only the revised sample in "
    "Python dictionary format. Current sample: {sample}"
)

# Our own template; the summarization step is described but has no
# published prompt text.
_PATTERN = (
    "Below are demonstration examples for a task.\n"
    "\n"
    "{demos}\n"
    "\n"
    "Task description: {description}\n"
    "\n"
    "Write a short prose summary of the general pattern these examples "
    "follow: what the input looks like, what the output looks like, and "
    "what kind of reasoning connects them. Describe the pattern in general "
    "terms so it can guide the creation of new, varied examples. Only "
    "output the summary."
)


def _require(context, stage, *slots):
    missing = [s for s in slots if s not in context or context[s] is None]
    if missing:
        raise PromptError(
            f"stage {stage!r} is missing slots: {', '.join(missing)}")


def render_prompt(stage, context):
    """Substitute the stage's template slots; pure and deterministic."""
    if stage == "keyword":
        _require(context, stage, "description")
        demos = context.get("demos", "")
        if demos:
            return _KEYWORD_WITH_DEMOS.format(
                description=context["description"], demos=demos)
        return _KEYWORD_NO_DEMOS.format(description=context["description"])

    if stage == "pattern":
        _require(context, stage, "description", "demos")
        if not context["demos"]:
            raise PromptError("stage 'pattern' requires non-empty demos")
        return _PATTERN.format(description=context["description"],
                               demos=context["demos"])

    if stage == "generate":
        _require(context, stage, "description", "input_format",
                 "output_format")
        parts = [_GENERATE_HEAD.format(
            description=context["description"],
            input_format=context["input_format"] or "None",
            output_format=context["output_format"])]
        demos = context.get("demos", "")
        pattern = context.get("pattern", "")
        if demos or pattern:
            if not (demos and pattern):
                raise PromptError(
                    "stage 'generate' needs pattern and demos together")
            parts.append(_GENERATE_PATTERN_BLOCK.format(
                pattern=pattern, demos=demos))
        passages = context.get("passages", "")
        if passages:
            parts.append(_GENERATE_PASSAGE_BLOCK.format(passages=passages))
        parts.append(_GENERATE_TAIL)
        return "".join(parts)

    if stage == "harder":
        _require(context, stage, "sample")
        return _HARDER.format(sample=context["sample"])

    if stage == "easier":
        _require(context, stage, "sample")
        return _EASIER.format(sample=context["sample"])

    raise PromptError(f"unknown stage {stage!r}; expected one of {STAGES}")


def build_solve_prompt(task, input_text):
    """Assemble the prompt a model answers: task instructions + input.

    This same assembly is used for verification voting, solvability
    classification, pass-rate measurement, and the exported RL prompts.
    """
    parts = [task.description_instruction]
    if task.input_format_instruction:
        parts.append(task.input_format_instruction)
    if task.output_format_instruction:
        parts.append(task.output_format_instruction)
    parts.append(input_text)
    return "\n\n".join(parts)
