"""synthpipe: synthesizes verified, difficulty-balanced training datasets
for reinforcement fine-tuning from a three-part task definition."""

from .config import (
    AnswerFormat,
    BackendDescriptor,
    DemoExample,
    PipelineConfig,
    TaskDefinition,
    TrainerProfile,
    load_config,
    load_task,
    validate_task,
)
from .samples import Sample, VerificationRecord

__version__ = "0.1.0"

__all__ = [
    "AnswerFormat",
    "BackendDescriptor",
    "DemoExample",
    "PipelineConfig",
    "Sample",
    "TaskDefinition",
    "TrainerProfile",
    "VerificationRecord",
    "load_config",
    "load_task",
    "validate_task",
]
