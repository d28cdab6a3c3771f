import hashlib

import pytest

from reasonforge.trajectory import (
    EvaluationResult,
    ImageRef,
    InstructionText,
    Mode,
    ReflectionText,
    Segment,
    SegmentKind,
    Trajectory,
)

G = SegmentKind.GENERATION
E = SegmentKind.EVALUATION
R = SegmentKind.REFLECTION
S = SegmentKind.SUB_INSTRUCTION


def fake_hash(tag: str) -> str:
    return hashlib.sha256(tag.encode()).hexdigest()


def image(tag: str) -> ImageRef:
    return ImageRef(uri=f"/tmp/{tag}.png", content_hash=fake_hash(tag))


def evaluation(passed: bool = True) -> EvaluationResult:
    if passed:
        return EvaluationResult(5, 5, 5, 5, passed=True, rationale="ok")
    return EvaluationResult(5, 3, 4, 5, passed=False, rationale="off")


def reflection(i: int = 1) -> ReflectionText:
    return ReflectionText(
        failure_analysis=f"analysis {i}", improvement_plan=f"plan {i}"
    )


def make_direct(traj_id: str = "t-direct") -> Trajectory:
    return Trajectory(
        id=traj_id,
        mode=Mode.DIRECT,
        instruction="draw a cat",
        segments=(
            Segment(G, 1, image("g1")),
            Segment(E, 1, evaluation(True)),
        ),
    )


def make_reflection(k: int = 2, traj_id: str = "t-reflect") -> Trajectory:
    segs: list[Segment] = []
    for i in range(1, k):
        segs.append(Segment(G, i, image(f"g{i}")))
        segs.append(Segment(E, i, evaluation(False)))
        segs.append(Segment(R, i, reflection(i)))
    segs.append(Segment(G, k, image(f"g{k}")))
    segs.append(Segment(E, k, evaluation(True)))
    return Trajectory(
        id=traj_id, mode=Mode.REFLECTION, instruction="fix the cat", segments=tuple(segs)
    )


def make_multistep(n: int = 2, traj_id: str = "t-multi") -> Trajectory:
    segs: list[Segment] = [
        Segment(G, 1, image("g1")),
        Segment(E, 1, evaluation(False)),
    ]
    for i in range(2, n + 2):
        segs.append(Segment(S, i, InstructionText(text=f"step {i}")))
        segs.append(Segment(G, i, image(f"g{i}")))
        segs.append(Segment(E, i, evaluation(True)))
    return Trajectory(
        id=traj_id, mode=Mode.MULTI_STEP, instruction="complex scene", segments=tuple(segs)
    )


@pytest.fixture
def image_dir(tmp_path):
    d = tmp_path / "images"
    d.mkdir()
    return d
