"""Hierarchical escalation state machine.

One sample flows through: direct generation, evaluation, a bounded
reflection loop, failure diagnosis, and either multi-step decomposition or
filtering. Multi-step traces are pruned so failed reflection attempts never
reach the archived trajectory.
"""

from __future__ import annotations

import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable, Sequence

from .gateway import AnalyzerClient, ClientError, GeneratorClient, MalformedResponse
from .trajectory import (
    EvaluationResult,
    FailureCause,
    ImageRef,
    InstructionText,
    Mode,
    Provenance,
    Segment,
    SegmentKind,
    Trajectory,
    validate_structure,
)


@dataclass(frozen=True)
class PipelineConfig:
    max_reflection_iters: int = 3
    max_plan_steps: int = 8
    per_step_retries: int = 2
    pass_threshold: int = 4

    def __post_init__(self) -> None:
        if self.max_reflection_iters < 1:
            raise ValueError("max_reflection_iters must be >= 1")
        if self.max_plan_steps < 1:
            raise ValueError("max_plan_steps must be >= 1")
        if self.per_step_retries < 0:
            raise ValueError("per_step_retries must be >= 0")
        if not 1 <= self.pass_threshold <= 5:
            raise ValueError("pass_threshold must be in [1,5]")


@dataclass(frozen=True)
class SampleInput:
    instruction: str
    references: tuple[ImageRef, ...] = ()
    category: str | None = None

    def __post_init__(self) -> None:
        if not self.instruction:
            raise ValueError("instruction must be non-empty")


@dataclass
class BatchStats:
    total: int = 0
    direct: int = 0
    reflection: int = 0
    multi_step: int = 0
    filtered: dict[str, int] = field(
        default_factory=lambda: {"prompt_complexity": 0, "knowledge_gap": 0, "other": 0}
    )
    errors: int = 0

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "direct": self.direct,
            "reflection": self.reflection,
            "multi_step": self.multi_step,
            "filtered": dict(self.filtered),
            "errors": self.errors,
        }


def _default_id() -> str:
    return str(uuid.uuid4())


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _eval_summary(i: int, ev: EvaluationResult) -> str:
    return (
        f"attempt {i}: scores="
        f"{ev.instruction_score}/{ev.consistency_score}/{ev.quality_score}/{ev.knowledge_score}"
        f" pass={ev.passed} rationale={ev.rationale}"
    )


def run_sample(
    sample: SampleInput,
    analyzer: AnalyzerClient,
    generator: GeneratorClient,
    config: PipelineConfig = PipelineConfig(),
    *,
    id_source: Callable[[], str] = _default_id,
    clock: Callable[[], str] = _now_iso,
) -> Trajectory:
    """Run one sample through the escalation state machine.

    Returns exactly one trajectory; its mode records the path taken.
    Transport and protocol failures raise, they never produce a Filtered
    trajectory.
    """
    g = SegmentKind.GENERATION
    e = SegmentKind.EVALUATION
    r = SegmentKind.REFLECTION
    s = SegmentKind.SUB_INSTRUCTION

    provenance = Provenance(
        analyzer_id=getattr(analyzer, "analyzer_id", ""),
        generator_id=getattr(generator, "generator_id", ""),
        created_at=clock(),
    )

    def finish(mode: Mode, segments: list[Segment], cause: FailureCause | None = None) -> Trajectory:
        return Trajectory(
            id=id_source(),
            mode=mode,
            instruction=sample.instruction,
            references=sample.references,
            segments=tuple(segments),
            category=sample.category,
            provenance=provenance,
            failure_cause=cause,
        )

    # Direct attempt.
    image = generator.generate(sample.instruction, sample.references)
    evaluation = analyzer.evaluate(sample.instruction, sample.references, image)
    segments: list[Segment] = [
        Segment(kind=g, index=1, payload=image),
        Segment(kind=e, index=1, payload=evaluation),
    ]
    history = [_eval_summary(1, evaluation)]
    if evaluation.passed:
        return finish(Mode.DIRECT, segments)

    # Bounded reflection loop: attempt i produces R_i, G_{i+1}, E_{i+1}.
    for i in range(1, config.max_reflection_iters + 1):
        reflection = analyzer.reflect(sample.instruction, sample.references, image, evaluation)
        segments.append(Segment(kind=r, index=i, payload=reflection))
        image = generator.revise(reflection, image, sample.references)
        evaluation = analyzer.evaluate(sample.instruction, sample.references, image)
        segments.append(Segment(kind=g, index=i + 1, payload=image))
        segments.append(Segment(kind=e, index=i + 1, payload=evaluation))
        history.append(_eval_summary(i + 1, evaluation))
        if evaluation.passed:
            return finish(Mode.REFLECTION, segments)

    # Diagnosis: only excessive prompt complexity escalates.
    cause = analyzer.diagnose(sample.instruction, history)
    if cause != FailureCause.PROMPT_COMPLEXITY:
        return finish(Mode.FILTERED, segments, cause=cause)

    plan = analyzer.plan(sample.instruction, sample.references, history)
    if not 1 <= len(plan) <= config.max_plan_steps:
        return finish(Mode.FILTERED, segments, cause=FailureCause.OTHER)

    # Sub-steps chain on the previous step's output; the first conditions on
    # the original references because the direct attempt was rejected.
    next_index = config.max_reflection_iters + 2
    previous: ImageRef | None = None
    for offset, sub in enumerate(plan):
        idx = next_index + offset
        step_done = False
        for _attempt in range(1 + config.per_step_retries):
            step_image = generator.execute_step(
                sub, previous, sample.references if previous is None else ()
            )
            step_eval = analyzer.evaluate(sub.text, sample.references, step_image)
            if step_eval.passed:
                segments.append(Segment(kind=s, index=idx, payload=sub))
                segments.append(Segment(kind=g, index=idx, payload=step_image))
                segments.append(Segment(kind=e, index=idx, payload=step_eval))
                previous = step_image
                step_done = True
                break
        if not step_done:
            return finish(Mode.FILTERED, segments, cause=FailureCause.OTHER)

    raw = finish(Mode.MULTI_STEP, segments)
    return prune_multistep(raw)


def prune_multistep(raw: Trajectory) -> Trajectory:
    """Strip the failed reflection loop out of a multi-step trace.

    Keeps G1/E1 and every (S, G, E) sub-step triple, renumbering triples to
    2..N+1. Idempotent on already-pruned trajectories.
    """
    g = SegmentKind.GENERATION
    e = SegmentKind.EVALUATION
    s = SegmentKind.SUB_INSTRUCTION
    segs = list(raw.segments)

    if (
        len(segs) < 2
        or segs[0].kind != g
        or segs[0].index != 1
        or segs[1].kind != e
        or segs[1].index != 1
    ):
        raise ValueError("multi-step trace must start with the direct attempt G1, E1")

    kept: list[Segment] = [segs[0], segs[1]]
    triple_index = 2
    pos = 2
    while pos < len(segs):
        seg = segs[pos]
        if seg.kind != s:
            # Reflection-loop residue; dropped.
            pos += 1
            continue
        if (
            pos + 2 >= len(segs)
            or segs[pos + 1].kind != g
            or segs[pos + 2].kind != e
            or segs[pos + 1].index != seg.index
            or segs[pos + 2].index != seg.index
        ):
            raise ValueError(f"incomplete sub-step triple at raw index {seg.index}")
        kept.append(replace(seg, index=triple_index))
        kept.append(replace(segs[pos + 1], index=triple_index))
        kept.append(replace(segs[pos + 2], index=triple_index))
        triple_index += 1
        pos += 3

    if triple_index == 2:
        raise ValueError("multi-step trace contains no sub-step triples")

    pruned = replace(raw, mode=Mode.MULTI_STEP, segments=tuple(kept), failure_cause=None)
    report = validate_structure(pruned)
    if not report.valid:
        raise ValueError(f"pruned trajectory still invalid: {report.violations}")
    return pruned


def run_batch(
    inputs: Sequence[SampleInput],
    analyzer: AnalyzerClient,
    generator: GeneratorClient,
    config: PipelineConfig = PipelineConfig(),
    *,
    parallel: int = 1,
    id_source: Callable[[], str] = _default_id,
    clock: Callable[[], str] = _now_iso,
) -> tuple[list[Trajectory], BatchStats]:
    """Run many samples; per-sample failures are counted, not fatal.

    Results are merged in input order regardless of parallelism.
    """
    stats = BatchStats(total=len(inputs))

    def one(sample: SampleInput) -> Trajectory | None:
        try:
            return run_sample(
                sample, analyzer, generator, config, id_source=id_source, clock=clock
            )
        except (ClientError, MalformedResponse):
            return None

    if parallel <= 1:
        results = [one(sample) for sample in inputs]
    else:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(one, inputs))

    trajectories: list[Trajectory] = []
    for result in results:
        if result is None:
            stats.errors += 1
            continue
        trajectories.append(result)
        if result.mode == Mode.DIRECT:
            stats.direct += 1
        elif result.mode == Mode.REFLECTION:
            stats.reflection += 1
        elif result.mode == Mode.MULTI_STEP:
            stats.multi_step += 1
        else:
            cause = result.failure_cause or FailureCause.OTHER
            stats.filtered[cause.value] += 1
    return trajectories, stats
