"""Trajectory data model, mode grammars, and JSONL serialization.

A trajectory is the ordered interleaved record of image generations (G),
evaluations (E), reflections (R), and sub-instructions (S) produced for one
sample. Each escalation mode admits exactly one segment sequence; the
grammar validator here backs both dataset validation and the binary format
reward.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator


class Mode(str, enum.Enum):
    DIRECT = "direct"
    REFLECTION = "reflection"
    MULTI_STEP = "multi_step"
    FILTERED = "filtered"


class SegmentKind(str, enum.Enum):
    GENERATION = "generation"
    EVALUATION = "evaluation"
    REFLECTION = "reflection"
    SUB_INSTRUCTION = "sub_instruction"


class FailureCause(str, enum.Enum):
    PROMPT_COMPLEXITY = "prompt_complexity"
    KNOWLEDGE_GAP = "knowledge_gap"
    OTHER = "other"


SCORE_MIN = 1
SCORE_MAX = 5

# Reflection trajectories hold 2..4 total generation attempts:
# the direct attempt plus at most three revision cycles.
MIN_REFLECTION_ATTEMPTS = 2
MAX_REFLECTION_ATTEMPTS = 4


@dataclass(frozen=True)
class ImageRef:
    """Opaque pointer to persisted image bytes; no pixel data in-process."""

    uri: str
    content_hash: str

    def __post_init__(self) -> None:
        h = self.content_hash
        if len(h) != 64 or any(c not in "0123456789abcdef" for c in h):
            raise ValueError(f"content_hash must be 64 lowercase hex chars, got {h!r}")


@dataclass(frozen=True)
class EvaluationResult:
    """Four-criterion verdict for one generated image.

    Scores are on the 1-5 scale; ``passed`` reflects the configured
    threshold applied by whoever constructed the result (the Analyzer
    client), not a recomputation here.
    """

    instruction_score: int
    consistency_score: int
    quality_score: int
    knowledge_score: int
    passed: bool
    rationale: str = ""
    failure_cause: FailureCause | None = None

    def __post_init__(self) -> None:
        for name, value in zip(
            ("instruction", "consistency", "quality", "knowledge"), self.scores
        ):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} score must be an integer, got {value!r}")
            if not SCORE_MIN <= value <= SCORE_MAX:
                raise ValueError(f"{name} score {value} outside [{SCORE_MIN},{SCORE_MAX}]")
        if self.passed and self.failure_cause is not None:
            raise ValueError("failure_cause is only meaningful on a failing evaluation")

    @property
    def scores(self) -> tuple[int, int, int, int]:
        return (
            self.instruction_score,
            self.consistency_score,
            self.quality_score,
            self.knowledge_score,
        )


@dataclass(frozen=True)
class ReflectionText:
    """Two-part reflection prompt: what went wrong, and how to fix it."""

    failure_analysis: str
    improvement_plan: str

    def __post_init__(self) -> None:
        if not self.failure_analysis or not self.improvement_plan:
            raise ValueError("reflection requires non-empty analysis and plan")


@dataclass(frozen=True)
class InstructionText:
    """A planner-produced sub-instruction."""

    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("sub-instruction text must be non-empty")


Payload = ImageRef | EvaluationResult | ReflectionText | InstructionText

_PAYLOAD_TYPES: dict[SegmentKind, type] = {
    SegmentKind.GENERATION: ImageRef,
    SegmentKind.EVALUATION: EvaluationResult,
    SegmentKind.REFLECTION: ReflectionText,
    SegmentKind.SUB_INSTRUCTION: InstructionText,
}


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    index: int
    payload: Payload
    loss_eligible: bool = False

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"segment index must be >= 1, got {self.index}")
        expected = _PAYLOAD_TYPES[self.kind]
        if not isinstance(self.payload, expected):
            raise ValueError(
                f"{self.kind.value} segment requires {expected.__name__} payload, "
                f"got {type(self.payload).__name__}"
            )


@dataclass(frozen=True)
class Provenance:
    analyzer_id: str = ""
    generator_id: str = ""
    created_at: str = ""


@dataclass(frozen=True)
class Trajectory:
    id: str
    mode: Mode
    instruction: str
    references: tuple[ImageRef, ...] = ()
    segments: tuple[Segment, ...] = ()
    category: str | None = None
    provenance: Provenance = field(default_factory=Provenance)
    failure_cause: FailureCause | None = None
    verification: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.instruction:
            raise ValueError("instruction must be non-empty")

    def segments_of(self, kind: SegmentKind) -> list[Segment]:
        return [s for s in self.segments if s.kind == kind]


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: tuple[str, ...] = ()


def _expected_sequence(traj: Trajectory) -> list[tuple[SegmentKind, int]] | str:
    """Return the exact (kind, index) sequence the mode demands.

    Returns an error string instead when the mode's shape parameter (K or N)
    cannot be inferred within bounds.
    """
    g = SegmentKind.GENERATION
    e = SegmentKind.EVALUATION
    r = SegmentKind.REFLECTION
    s = SegmentKind.SUB_INSTRUCTION

    if traj.mode == Mode.DIRECT:
        return [(g, 1), (e, 1)]

    if traj.mode == Mode.REFLECTION:
        k = len(traj.segments_of(g))
        if not MIN_REFLECTION_ATTEMPTS <= k <= MAX_REFLECTION_ATTEMPTS:
            return (
                f"reflection mode requires {MIN_REFLECTION_ATTEMPTS}.."
                f"{MAX_REFLECTION_ATTEMPTS} generation attempts, found {k}"
            )
        seq: list[tuple[SegmentKind, int]] = []
        for i in range(1, k):
            seq += [(g, i), (e, i), (r, i)]
        seq += [(g, k), (e, k)]
        return seq

    if traj.mode == Mode.MULTI_STEP:
        n = len(traj.segments_of(s))
        if n < 1:
            return "multi_step mode requires at least one sub-instruction"
        seq = [(g, 1), (e, 1)]
        for i in range(2, n + 2):
            seq += [(s, i), (g, i), (e, i)]
        return seq

    raise AssertionError(f"no grammar for mode {traj.mode}")


def validate_structure(traj: Trajectory) -> ValidityReport:
    """Check the segment sequence against the mode grammar.

    Total: malformed trajectories yield ``valid=False`` with every breach
    enumerated, never an exception.
    """
    violations: list[str] = []

    if traj.mode == Mode.FILTERED:
        if traj.failure_cause is None:
            violations.append("filtered trajectory must carry a failure cause")
        return ValidityReport(valid=not violations, violations=tuple(violations))

    expected = _expected_sequence(traj)
    if isinstance(expected, str):
        return ValidityReport(valid=False, violations=(expected,))

    actual = [(seg.kind, seg.index) for seg in traj.segments]

    if traj.mode == Mode.MULTI_STEP:
        for seg in traj.segments:
            if seg.kind == SegmentKind.REFLECTION:
                violations.append(
                    f"Reflection segment in MultiStep (index {seg.index})"
                )

    if len(actual) != len(expected):
        violations.append(
            f"expected {len(expected)} segments for mode {traj.mode.value}, "
            f"found {len(actual)}"
        )
    for pos, (got, want) in enumerate(zip(actual, expected)):
        if got != want:
            violations.append(
                f"segment {pos}: expected {want[0].value}[{want[1]}], "
                f"got {got[0].value}[{got[1]}]"
            )

    return ValidityReport(valid=not violations, violations=tuple(violations))


def count_images(traj: Trajectory) -> int:
    """Number of generation segments (the trajectory's image count)."""
    n = len(traj.segments_of(SegmentKind.GENERATION))
    if n == 0:
        raise ValueError(f"trajectory {traj.id} has no generation segments")
    return n


# ---------------------------------------------------------------------------
# JSONL serialization


def _payload_to_json(seg: Segment) -> dict[str, Any]:
    p = seg.payload
    if isinstance(p, ImageRef):
        return {"uri": p.uri, "content_hash": p.content_hash}
    if isinstance(p, EvaluationResult):
        return {
            "scores": {
                "instruction": p.instruction_score,
                "consistency": p.consistency_score,
                "quality": p.quality_score,
                "knowledge": p.knowledge_score,
            },
            "pass": p.passed,
            "rationale": p.rationale,
            "failure_cause": p.failure_cause.value if p.failure_cause else None,
        }
    if isinstance(p, ReflectionText):
        return {
            "failure_analysis": p.failure_analysis,
            "improvement_plan": p.improvement_plan,
        }
    return {"text": p.text}


def _payload_from_json(kind: SegmentKind, data: dict[str, Any]) -> Payload:
    if kind == SegmentKind.GENERATION:
        return ImageRef(uri=data["uri"], content_hash=data["content_hash"])
    if kind == SegmentKind.EVALUATION:
        scores = data["scores"]
        cause = data.get("failure_cause")
        return EvaluationResult(
            instruction_score=scores["instruction"],
            consistency_score=scores["consistency"],
            quality_score=scores["quality"],
            knowledge_score=scores["knowledge"],
            passed=data["pass"],
            rationale=data.get("rationale", ""),
            failure_cause=FailureCause(cause) if cause else None,
        )
    if kind == SegmentKind.REFLECTION:
        return ReflectionText(
            failure_analysis=data["failure_analysis"],
            improvement_plan=data["improvement_plan"],
        )
    return InstructionText(text=data["text"])


def evaluation_from_json(data: dict[str, Any]) -> EvaluationResult:
    result = _payload_from_json(SegmentKind.EVALUATION, data)
    assert isinstance(result, EvaluationResult)
    return result


_KNOWN_FIELDS = {
    "id",
    "mode",
    "instruction",
    "references",
    "segments",
    "category",
    "provenance",
    "verification",
    "failure_cause",
}


def to_record(traj: Trajectory) -> dict[str, Any]:
    """Serialize to the trajectory JSONL object."""
    record: dict[str, Any] = {
        "id": traj.id,
        "mode": traj.mode.value,
        "instruction": traj.instruction,
        "references": [
            {"uri": r.uri, "content_hash": r.content_hash} for r in traj.references
        ],
        "segments": [
            {
                "kind": seg.kind.value,
                "index": seg.index,
                "payload": _payload_to_json(seg),
                "loss_eligible": seg.loss_eligible,
            }
            for seg in traj.segments
        ],
        "category": traj.category,
        "provenance": {
            "analyzer_id": traj.provenance.analyzer_id,
            "generator_id": traj.provenance.generator_id,
            "created_at": traj.provenance.created_at,
        },
        "verification": traj.verification,
    }
    if traj.failure_cause is not None:
        record["failure_cause"] = traj.failure_cause.value
    # Unknown fields survive the round-trip untouched.
    for key, value in traj.extra.items():
        record.setdefault(key, value)
    return record


def from_record(record: dict[str, Any]) -> Trajectory:
    """Parse one trajectory JSONL object; raises on schema breaches."""
    prov = record.get("provenance") or {}
    cause = record.get("failure_cause")
    return Trajectory(
        id=record["id"],
        mode=Mode(record["mode"]),
        instruction=record["instruction"],
        references=tuple(
            ImageRef(uri=r["uri"], content_hash=r["content_hash"])
            for r in record.get("references", [])
        ),
        segments=tuple(
            Segment(
                kind=SegmentKind(s["kind"]),
                index=s["index"],
                payload=_payload_from_json(SegmentKind(s["kind"]), s["payload"]),
                loss_eligible=s.get("loss_eligible", False),
            )
            for s in record.get("segments", [])
        ),
        category=record.get("category"),
        provenance=Provenance(
            analyzer_id=prov.get("analyzer_id", ""),
            generator_id=prov.get("generator_id", ""),
            created_at=prov.get("created_at", ""),
        ),
        failure_cause=FailureCause(cause) if cause else None,
        verification=record.get("verification"),
        extra={k: v for k, v in record.items() if k not in _KNOWN_FIELDS},
    )


def dumps(traj: Trajectory) -> str:
    return json.dumps(to_record(traj), ensure_ascii=False, sort_keys=True)


def loads(line: str) -> Trajectory:
    return from_record(json.loads(line))


def write_jsonl(path: str | Path, trajectories: Iterable[Trajectory]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(dumps(traj) + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield loads(line)


def with_new_indices(seg: Segment, index: int) -> Segment:
    return replace(seg, index=index)
