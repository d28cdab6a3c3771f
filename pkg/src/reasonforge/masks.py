"""Segment-level SFT loss masks.

Each trajectory mode trains on a fixed subset of its segments: the direct
pair for direct mode, only the final correction phase for reflection mode,
and the full planning sequence (minus the rejected first image) for
multi-step mode. Token expansion is the trainer's job.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .trajectory import Mode, SegmentKind, Trajectory, validate_structure


@dataclass(frozen=True)
class MaskEntry:
    kind: SegmentKind
    index: int
    loss: bool


@dataclass(frozen=True)
class LossMask:
    trajectory_id: str
    entries: tuple[MaskEntry, ...]

    def loss_set(self) -> set[tuple[SegmentKind, int]]:
        return {(e.kind, e.index) for e in self.entries if e.loss}


def _target_set(traj: Trajectory) -> set[tuple[SegmentKind, int]]:
    g = SegmentKind.GENERATION
    e = SegmentKind.EVALUATION
    r = SegmentKind.REFLECTION
    s = SegmentKind.SUB_INSTRUCTION

    if traj.mode == Mode.DIRECT:
        return {(g, 1), (e, 1)}

    if traj.mode == Mode.REFLECTION:
        k = len(traj.segments_of(g))
        # Only the final correction phase: the diagnosis of the last failure,
        # the reflection that fixed it, and the successful attempt.
        return {(e, k - 1), (r, k - 1), (g, k), (e, k)}

    n = len(traj.segments_of(s))
    target: set[tuple[SegmentKind, int]] = {(e, 1)}
    for i in range(2, n + 2):
        target |= {(s, i), (g, i), (e, i)}
    return target


def compile_mask(traj: Trajectory) -> LossMask:
    """Emit the per-segment loss bits for one trajectory.

    Raises on filtered or structurally invalid input; masks are only
    meaningful for archivable trajectories.
    """
    if traj.mode == Mode.FILTERED:
        raise ValueError(f"trajectory {traj.id} is filtered; no loss mask applies")
    report = validate_structure(traj)
    if not report.valid:
        raise ValueError(
            f"trajectory {traj.id} fails structure validation: {report.violations}"
        )
    target = _target_set(traj)
    entries = tuple(
        MaskEntry(kind=seg.kind, index=seg.index, loss=(seg.kind, seg.index) in target)
        for seg in traj.segments
    )
    return LossMask(trajectory_id=traj.id, entries=entries)


def mask_stats(masks: Iterable[LossMask]) -> dict[str, int]:
    """Counts of loss-true segments by kind across all masks."""
    counter: Counter[str] = Counter()
    for mask in masks:
        for entry in mask.entries:
            if entry.loss:
                counter[entry.kind.value] += 1
    return {kind.value: counter.get(kind.value, 0) for kind in SegmentKind}


def dumps(mask: LossMask) -> str:
    return json.dumps(
        {
            "trajectory_id": mask.trajectory_id,
            "entries": [
                {"kind": e.kind.value, "index": e.index, "loss": e.loss}
                for e in mask.entries
            ],
        },
        sort_keys=True,
    )


def loads(line: str) -> LossMask:
    data = json.loads(line)
    return LossMask(
        trajectory_id=data["trajectory_id"],
        entries=tuple(
            MaskEntry(kind=SegmentKind(e["kind"]), index=e["index"], loss=e["loss"])
            for e in data["entries"]
        ),
    )


def write_jsonl(path: str | Path, masks: Iterable[LossMask]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for mask in masks:
            fh.write(dumps(mask) + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[LossMask]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield loads(line)
