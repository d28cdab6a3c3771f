"""Adaptive interleaved-trajectory data engine.

Builds direct / reflection / multi-step trajectories over pluggable
Analyzer and Generator endpoints, compiles mode-specific SFT loss masks,
computes group-relative rewards with an intra-group complexity penalty,
and runs the two-annotator verification workflow.
"""

from .gateway import (
    AnalyzerClient,
    ClientError,
    GeneratorClient,
    MalformedResponse,
    parse_evaluation,
    scripted_mock,
)
from .masks import LossMask, compile_mask, mask_stats
from .pipeline import BatchStats, PipelineConfig, SampleInput, prune_multistep, run_batch, run_sample
from .rewards import (
    RewardBreakdown,
    RewardWeights,
    RolloutRecord,
    apply_complexity_penalty,
    format_reward,
    group_advantages,
    outcome_reward,
    score_group,
    stepwise_reward,
    total_reward,
)
from .store import DatasetStore, Decision, VerificationRecord, VerificationStatus
from .trajectory import (
    EvaluationResult,
    FailureCause,
    ImageRef,
    InstructionText,
    Mode,
    ReflectionText,
    Segment,
    SegmentKind,
    Trajectory,
    ValidityReport,
    count_images,
    validate_structure,
)

__all__ = [
    "AnalyzerClient",
    "BatchStats",
    "ClientError",
    "DatasetStore",
    "Decision",
    "EvaluationResult",
    "FailureCause",
    "GeneratorClient",
    "ImageRef",
    "InstructionText",
    "LossMask",
    "MalformedResponse",
    "Mode",
    "PipelineConfig",
    "ReflectionText",
    "RewardBreakdown",
    "RewardWeights",
    "RolloutRecord",
    "SampleInput",
    "Segment",
    "SegmentKind",
    "Trajectory",
    "ValidityReport",
    "VerificationRecord",
    "VerificationStatus",
    "apply_complexity_penalty",
    "compile_mask",
    "count_images",
    "format_reward",
    "group_advantages",
    "mask_stats",
    "outcome_reward",
    "parse_evaluation",
    "prune_multistep",
    "run_batch",
    "run_sample",
    "score_group",
    "scripted_mock",
    "stepwise_reward",
    "total_reward",
    "validate_structure",
]

__version__ = "0.1.0"
