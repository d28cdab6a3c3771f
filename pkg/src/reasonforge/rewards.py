"""Group-relative reward calculus.

Per rollout: an outcome reward from the four evaluation criteria, a binary
format reward from the trajectory grammar, and a step-wise reasoning reward
averaging Analyzer validity scores. Totals are weighted, then an intra-group
complexity penalty adds a bonus inversely proportional to image count for
rollouts within epsilon of the group maximum, and advantages are the
group-normalized finals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .trajectory import (
    EvaluationResult,
    SegmentKind,
    Trajectory,
    validate_structure,
)

# Each criterion sits on a 1-5 scale; 0.05 = 0.2 rescale / 4 criteria, so the
# outcome reward lands in [0.2, 1.0]. Fixed normalization, not a knob.
OUTCOME_WEIGHT = 0.05

ADVANTAGE_STABILIZER = 1e-6


@dataclass(frozen=True)
class RewardWeights:
    alpha_outcome: float = 0.7
    alpha_format: float = 0.1
    alpha_stepwise: float = 0.2
    epsilon: float = 0.05

    def __post_init__(self) -> None:
        for name in ("alpha_outcome", "alpha_format", "alpha_stepwise", "epsilon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        total = self.alpha_outcome + self.alpha_format + self.alpha_stepwise
        if abs(total - 1.0) > 1e-9:
            warnings.warn(
                f"reward weights sum to {total}, not 1.0", stacklevel=2
            )


@dataclass(frozen=True)
class RolloutRecord:
    trajectory: Trajectory
    final_scores: EvaluationResult
    text_validities: tuple[float, ...] = ()


@dataclass(frozen=True)
class RewardBreakdown:
    r_outcome: float
    r_format: float
    r_stepwise: float
    r_total: float
    r_final: float
    n_images: int
    competitive: bool
    advantage: float


def outcome_reward(scores: EvaluationResult) -> float:
    """Normalized weighted sum of the four criterion scores."""
    return OUTCOME_WEIGHT * sum(scores.scores)


def format_reward(traj: Trajectory) -> int:
    """1 iff the trajectory matches its mode grammar, else 0."""
    return 1 if validate_structure(traj).valid else 0


def stepwise_reward(text_validities: Sequence[float]) -> float:
    """Mean validity of intermediate reasoning texts.

    An empty list (direct mode has no intermediate steps) scores 1.0 so the
    simplest path is not structurally penalized.
    """
    for value in text_validities:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"text validity {value} outside [0,1]")
    if not text_validities:
        return 1.0
    return sum(text_validities) / len(text_validities)


def total_reward(r_o: float, r_f: float, r_s: float, weights: RewardWeights = RewardWeights()) -> float:
    return (
        weights.alpha_outcome * r_o
        + weights.alpha_format * r_f
        + weights.alpha_stepwise * r_s
    )


def apply_complexity_penalty(
    group: Sequence[tuple[float, int]], epsilon: float = 0.05
) -> list[float]:
    """Add the simplicity bonus to every competitive rollout.

    ``group`` pairs each rollout's total reward with its image count. The
    competitive set holds rollouts within ``epsilon`` of the group maximum;
    each gains ``n_min / n_i`` where ``n_min`` is the smallest image count in
    the set. Non-competitive totals pass through unchanged.
    """
    if not group:
        raise ValueError("group must be non-empty")
    for _total, n_images in group:
        if n_images < 1:
            raise ValueError("image counts must be >= 1")
    best = max(total for total, _ in group)
    competitive = [i for i, (total, _) in enumerate(group) if total >= best - epsilon]
    n_min = min(group[i][1] for i in competitive)
    finals = []
    for i, (total, n_images) in enumerate(group):
        if i in competitive:
            finals.append(total + n_min / n_images)
        else:
            finals.append(total)
    return finals


def group_advantages(r_finals: Sequence[float]) -> list[float]:
    """Group-normalized advantages: (r - mean) / (population std + delta)."""
    if not r_finals:
        raise ValueError("group must be non-empty")
    m = len(r_finals)
    if max(r_finals) == min(r_finals):
        return [0.0] * m
    mean = math.fsum(r_finals) / m
    variance = math.fsum((r - mean) ** 2 for r in r_finals) / m
    std = math.sqrt(variance)
    if std == 0.0:
        return [0.0] * m
    return [(r - mean) / (std + ADVANTAGE_STABILIZER) for r in r_finals]


def score_group(
    rollouts: Sequence[RolloutRecord], weights: RewardWeights = RewardWeights()
) -> list[RewardBreakdown]:
    """Full scoring pipeline over one group of rollouts, order preserved."""
    if not rollouts:
        raise ValueError("rollout group must be non-empty")

    components = []
    for rollout in rollouts:
        r_o = outcome_reward(rollout.final_scores)
        r_f = float(format_reward(rollout.trajectory))
        r_s = stepwise_reward(rollout.text_validities)
        n_images = len(rollout.trajectory.segments_of(SegmentKind.GENERATION))
        if n_images < 1:
            raise ValueError(
                f"rollout {rollout.trajectory.id} has no generation segments"
            )
        components.append((r_o, r_f, r_s, total_reward(r_o, r_f, r_s, weights), n_images))

    totals = [(total, n) for _, _, _, total, n in components]
    finals = apply_complexity_penalty(totals, weights.epsilon)
    advantages = group_advantages(finals)
    best = max(total for total, _ in totals)

    return [
        RewardBreakdown(
            r_outcome=r_o,
            r_format=r_f,
            r_stepwise=r_s,
            r_total=total,
            r_final=final,
            n_images=n,
            competitive=total >= best - weights.epsilon,
            advantage=advantage,
        )
        for (r_o, r_f, r_s, total, n), final, advantage in zip(
            components, finals, advantages
        )
    ]


def score_pre_totaled(
    entries: Sequence[tuple[float, int]], epsilon: float = 0.05
) -> list[RewardBreakdown]:
    """Penalty and advantages for rollouts whose totals are already known.

    Component rewards are not recoverable here and are reported as NaN.
    """
    finals = apply_complexity_penalty(entries, epsilon)
    advantages = group_advantages(finals)
    best = max(total for total, _ in entries)
    return [
        RewardBreakdown(
            r_outcome=math.nan,
            r_format=math.nan,
            r_stepwise=math.nan,
            r_total=total,
            r_final=final,
            n_images=n,
            competitive=total >= best - epsilon,
            advantage=advantage,
        )
        for (total, n), final, advantage in zip(entries, finals, advantages)
    ]
