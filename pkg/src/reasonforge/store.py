"""Append-only trajectory dataset with a human-verification ledger.

Two JSONL files: the dataset itself and a sidecar ledger of verification
records. Both are append-only for inspectability; the ledger's last record
per trajectory wins. A trajectory is retained only when every required
annotator accepts it.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable

from . import trajectory as tj
from .trajectory import Mode, Trajectory, validate_structure

DEFAULT_REQUIRED_ANNOTATORS = 2
# Target direct : reflection : multi_step distribution.
DEFAULT_MODE_TARGET = (1, 2, 2)

_TAXONOMY_PATH = Path(__file__).parent / "taxonomy.json"


class Decision(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class VerificationStatus(str, enum.Enum):
    PENDING = "pending"
    RETAINED = "retained"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Verdict:
    annotator_id: str
    decision: Decision
    notes: str = ""
    timestamp: str = ""


@dataclass(frozen=True)
class VerificationRecord:
    trajectory_id: str
    verdicts: tuple[Verdict, ...] = ()
    status: VerificationStatus = VerificationStatus.PENDING

    def to_json(self) -> dict[str, Any]:
        return {
            "trajectory_id": self.trajectory_id,
            "verdicts": [
                {
                    "annotator_id": v.annotator_id,
                    "decision": v.decision.value,
                    "notes": v.notes,
                    "timestamp": v.timestamp,
                }
                for v in self.verdicts
            ],
            "status": self.status.value,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "VerificationRecord":
        return cls(
            trajectory_id=data["trajectory_id"],
            verdicts=tuple(
                Verdict(
                    annotator_id=v["annotator_id"],
                    decision=Decision(v["decision"]),
                    notes=v.get("notes", ""),
                    timestamp=v.get("timestamp", ""),
                )
                for v in data.get("verdicts", [])
            ),
            status=VerificationStatus(data["status"]),
        )


def consensus_status(
    verdicts: Iterable[Verdict], required_annotators: int = DEFAULT_REQUIRED_ANNOTATORS
) -> VerificationStatus:
    """Any reject rejects; unanimous accepts at quorum retain; else pending."""
    verdicts = list(verdicts)
    if any(v.decision == Decision.REJECT for v in verdicts):
        return VerificationStatus.REJECTED
    accepts = {v.annotator_id for v in verdicts if v.decision == Decision.ACCEPT}
    if len(accepts) >= required_annotators:
        return VerificationStatus.RETAINED
    return VerificationStatus.PENDING


@dataclass
class DatasetStats:
    total: int = 0
    mode_counts: dict[str, int] = field(default_factory=dict)
    category_counts: dict[str, int] = field(default_factory=dict)
    unknown_categories: list[str] = field(default_factory=list)
    verification_counts: dict[str, int] = field(default_factory=dict)
    mode_ratio_deviation: float | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "mode_counts": self.mode_counts,
            "category_counts": self.category_counts,
            "unknown_categories": self.unknown_categories,
            "verification_counts": self.verification_counts,
            "mode_ratio_deviation": self.mode_ratio_deviation,
        }


def load_taxonomy(path: str | Path | None = None) -> set[str]:
    data = json.loads(Path(path or _TAXONOMY_PATH).read_text(encoding="utf-8"))
    categories: set[str] = set()
    for subcats in data.values():
        categories.update(subcats)
    return categories


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class DatasetStore:
    """Single-writer JSONL store; reads are served from the in-memory index."""

    def __init__(
        self,
        dataset_path: str | Path,
        ledger_path: str | Path | None = None,
        required_annotators: int = DEFAULT_REQUIRED_ANNOTATORS,
        taxonomy_path: str | Path | None = None,
        mode_target: tuple[int, int, int] = DEFAULT_MODE_TARGET,
        clock: Callable[[], str] = _now_iso,
    ) -> None:
        self._dataset_path = Path(dataset_path)
        self._ledger_path = (
            Path(ledger_path)
            if ledger_path is not None
            else self._dataset_path.with_suffix(self._dataset_path.suffix + ".ledger")
        )
        self._required = required_annotators
        self._taxonomy = load_taxonomy(taxonomy_path)
        self._mode_target = mode_target
        self._clock = clock
        self._lock = threading.Lock()
        self._records: dict[str, Trajectory] = {}
        self._order: list[str] = []
        self._verifications: dict[str, VerificationRecord] = {}
        self._load()

    # -- loading -----------------------------------------------------------

    def _load(self) -> None:
        if self._dataset_path.exists():
            self._load_jsonl(self._dataset_path, self._ingest_trajectory_line)
        if self._ledger_path.exists():
            self._load_jsonl(self._ledger_path, self._ingest_ledger_line)

    def _load_jsonl(self, path: Path, ingest: Callable[[str], None]) -> None:
        """Load all complete lines; quarantine a truncated final line."""
        raw = path.read_bytes()
        if not raw:
            return
        lines = raw.decode("utf-8", errors="replace").split("\n")
        tail = lines.pop() if lines else ""
        for line in lines:
            if line.strip():
                ingest(line)
        if tail.strip():
            # File did not end in a newline: the writer was cut off mid-line.
            quarantine = path.with_suffix(path.suffix + ".quarantine")
            with open(quarantine, "a", encoding="utf-8") as fh:
                fh.write(tail + "\n")
            complete = raw[: len(raw) - len(tail.encode("utf-8"))]
            path.write_bytes(complete)

    def _ingest_trajectory_line(self, line: str) -> None:
        traj = tj.loads(line)
        if traj.id in self._records:
            raise ValueError(f"duplicate trajectory id {traj.id} in dataset file")
        self._records[traj.id] = traj
        self._order.append(traj.id)

    def _ingest_ledger_line(self, line: str) -> None:
        record = VerificationRecord.from_json(json.loads(line))
        self._verifications[record.trajectory_id] = record

    # -- writes ------------------------------------------------------------

    def append(self, traj: Trajectory) -> str:
        with self._lock:
            if traj.id in self._records:
                raise ValueError(f"duplicate trajectory id {traj.id}")
            with open(self._dataset_path, "a", encoding="utf-8") as fh:
                fh.write(tj.dumps(traj) + "\n")
                fh.flush()
            self._records[traj.id] = traj
            self._order.append(traj.id)
            return traj.id

    def record_verdict(
        self, trajectory_id: str, annotator_id: str, decision: Decision, notes: str = ""
    ) -> VerificationRecord:
        with self._lock:
            if trajectory_id not in self._records:
                raise KeyError(f"unknown trajectory {trajectory_id}")
            existing = self._verifications.get(
                trajectory_id, VerificationRecord(trajectory_id=trajectory_id)
            )
            verdict = Verdict(
                annotator_id=annotator_id,
                decision=decision,
                notes=notes,
                timestamp=self._clock(),
            )
            # Re-votes replace the annotator's previous verdict.
            verdicts = tuple(
                v for v in existing.verdicts if v.annotator_id != annotator_id
            ) + (verdict,)
            record = VerificationRecord(
                trajectory_id=trajectory_id,
                verdicts=verdicts,
                status=consensus_status(verdicts, self._required),
            )
            with open(self._ledger_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
                fh.flush()
            self._verifications[trajectory_id] = record
            return record

    # -- reads -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._order)

    def get(self, trajectory_id: str) -> Trajectory:
        try:
            return self._records[trajectory_id]
        except KeyError:
            raise KeyError(f"unknown trajectory {trajectory_id}") from None

    def verification(self, trajectory_id: str) -> VerificationRecord:
        self.get(trajectory_id)
        return self._verifications.get(
            trajectory_id, VerificationRecord(trajectory_id=trajectory_id)
        )

    def status_of(self, trajectory_id: str) -> VerificationStatus:
        return self.verification(trajectory_id).status

    def list(
        self,
        mode: Mode | None = None,
        status: VerificationStatus | None = None,
        category: str | None = None,
        cursor: int | None = None,
        limit: int | None = None,
    ) -> tuple[list[Trajectory], int | None]:
        """Filtered page in insertion order.

        The cursor is the insertion ordinal of the last item on the previous
        page, so pages stay stable while new records are appended.
        """
        start = 0 if cursor is None else cursor + 1
        items: list[Trajectory] = []
        last_ordinal: int | None = None
        next_cursor: int | None = None
        for ordinal in range(start, len(self._order)):
            traj = self._records[self._order[ordinal]]
            if mode is not None and traj.mode != mode:
                continue
            if status is not None and self.status_of(traj.id) != status:
                continue
            if category is not None and traj.category != category:
                continue
            if limit is not None and len(items) >= limit:
                next_cursor = last_ordinal
                break
            items.append(traj)
            last_ordinal = ordinal
        return items, next_cursor

    def all(self) -> list[Trajectory]:
        return [self._records[i] for i in self._order]

    def stats(self) -> DatasetStats:
        stats = DatasetStats(total=len(self._order))
        stats.mode_counts = {m.value: 0 for m in Mode}
        stats.verification_counts = {s.value: 0 for s in VerificationStatus}
        unknown: set[str] = set()
        for traj in self.all():
            stats.mode_counts[traj.mode.value] += 1
            if traj.category is not None:
                stats.category_counts[traj.category] = (
                    stats.category_counts.get(traj.category, 0) + 1
                )
                if traj.category not in self._taxonomy:
                    unknown.add(traj.category)
            stats.verification_counts[self.status_of(traj.id).value] += 1
        stats.unknown_categories = sorted(unknown)

        modes = ("direct", "reflection", "multi_step")
        counts = [stats.mode_counts[m] for m in modes]
        total_modal = sum(counts)
        if total_modal > 0:
            target_total = sum(self._mode_target)
            stats.mode_ratio_deviation = max(
                abs(count / total_modal - share / target_total)
                for count, share in zip(counts, self._mode_target)
            )
        return stats

    def export_retained(self, out_path: str | Path) -> int:
        """Write retained trajectories, gated on structural validity."""
        retained = [
            traj
            for traj in self.all()
            if self.status_of(traj.id) == VerificationStatus.RETAINED
        ]
        for traj in retained:
            report = validate_structure(traj)
            if not report.valid:
                raise ValueError(
                    f"retained trajectory {traj.id} fails structure validation: "
                    f"{report.violations}"
                )
        count = 0
        with open(out_path, "w", encoding="utf-8") as fh:
            for traj in retained:
                fh.write(tj.dumps(traj) + "\n")
                count += 1
        return count
