"""Acceptance suite: one test per release criterion.

Each test prints a single PASS line on success (run with -s to see them);
tolerances and runtime budgets are pinned here, not configurable.
"""

import itertools
import json
import math
import random
import time

import pytest
from click.testing import CliRunner

from conftest import make_direct, make_multistep, make_reflection
from reasonforge import trajectory as tj
from reasonforge.cli import main as cli_main
from reasonforge.gateway import scripted_mock
from reasonforge.masks import compile_mask
from reasonforge.pipeline import PipelineConfig, SampleInput, run_batch, run_sample
from reasonforge.rewards import (
    apply_complexity_penalty,
    format_reward,
    group_advantages,
    outcome_reward,
)
from reasonforge.store import DatasetStore, Decision, VerificationStatus
from reasonforge.trajectory import (
    EvaluationResult,
    FailureCause,
    Mode,
    SegmentKind,
    Trajectory,
)

G = SegmentKind.GENERATION
E = SegmentKind.EVALUATION
R = SegmentKind.REFLECTION
S = SegmentKind.SUB_INSTRUCTION


def report(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


def test_outcome_reward_exactness_full_grid():
    """Outcome reward matches an independent oracle over all 625 score combos."""
    start = time.perf_counter()
    worst = 0.0
    for combo in itertools.product(range(1, 6), repeat=4):
        # Independent oracle: rescale each 1-5 score by 0.2, then average.
        expected = math.fsum(0.2 * s for s in combo) / 4
        got = outcome_reward(
            EvaluationResult(*combo, passed=all(s >= 4 for s in combo))
        )
        worst = max(worst, abs(got - expected))
    elapsed = time.perf_counter() - start
    assert worst < 1e-12
    assert elapsed < 1.0
    report(f"outcome reward 625-grid exact (max err {worst:.2e}, {elapsed:.3f}s)")


def test_complexity_penalty_worked_group():
    """Hand-computed three-rollout group reproduced within 1e-9."""
    finals = apply_complexity_penalty([(0.95, 3), (0.93, 1), (0.80, 1)], epsilon=0.05)
    expected = [0.95 + 1 / 3, 0.93 + 1.0, 0.80]
    for got, want in zip(finals, expected):
        assert abs(got - want) < 1e-9
    report("worked penalty group finals (1.28333..., 1.93, 0.80)")


def test_complexity_penalty_properties_random_groups():
    """1000 random groups: pass-through bit-exact, simplicity ordering, max competitive."""
    rng = random.Random(20260824)
    start = time.perf_counter()
    for _ in range(1000):
        size = rng.randint(1, 8)
        group = [(rng.uniform(0.14, 1.0), rng.randint(1, 9)) for _ in range(size)]
        # Force at least one equal-total pair in competitive range when possible.
        if size >= 2:
            group[1] = (group[0][0], rng.randint(1, 9))
        finals = apply_complexity_penalty(group, 0.05)
        best = max(t for t, _ in group)
        for (total, n), final in zip(group, finals):
            if total >= best - 0.05:
                assert final == total + min(
                    m for t2, m in group if t2 >= best - 0.05
                ) / n
            else:
                assert final == total  # bit-exact
        top = max(range(size), key=lambda i: group[i][0])
        assert finals[top] != group[top][0] or group[top][1] == 0  # max got bonus
        # Equal totals in the competitive set: fewer images => strictly larger final.
        competitive = [
            (t, n, f) for (t, n), f in zip(group, finals) if t >= best - 0.05
        ]
        for (t1, n1, f1), (t2, n2, f2) in itertools.combinations(competitive, 2):
            if t1 == t2 and n1 < n2:
                assert f1 > f2
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    report(f"penalty properties over 1000 random groups ({elapsed:.2f}s)")


def test_advantage_properties():
    """Zero variance -> zeros; otherwise centered and shift-invariant."""
    assert group_advantages([1.7] * 5) == [0.0] * 5
    assert group_advantages([0.4]) == [0.0]

    rng = random.Random(99)
    for _ in range(200):
        finals = [rng.uniform(0.14, 2.0) for _ in range(rng.randint(2, 8))]
        adv = group_advantages(finals)
        if max(finals) > min(finals):
            assert abs(sum(adv) / len(adv)) < 1e-9
        shifted = group_advantages([f + 17.5 for f in finals])
        for a, b in zip(adv, shifted):
            assert abs(a - b) < 1e-9
    report("advantage zero-variance, centering, shift-invariance")


def _brute_force_target(traj: Trajectory) -> set:
    """Independent mask-set constructor, written directly from the formulas."""
    if traj.mode == Mode.DIRECT:
        return {(G, 1), (E, 1)}
    if traj.mode == Mode.REFLECTION:
        k = sum(1 for s in traj.segments if s.kind == G)
        full = set()
        for i in range(1, k + 1):
            full.add((G, i))
            full.add((E, i))
            if i < k:
                full.add((R, i))
        masked = {(G, i) for i in range(1, k)}
        masked |= {(E, i) for i in range(1, k - 1)}
        masked |= {(R, i) for i in range(1, k - 1)}
        return full - masked
    n = sum(1 for s in traj.segments if s.kind == S)
    target = {(E, 1)}
    for i in range(2, n + 2):
        target |= {(S, i), (G, i), (E, i)}
    return target


def test_mask_set_exactness():
    """Compiled loss sets equal the brute-force sets for every K and N."""
    cases = [make_direct()]
    cases += [make_reflection(k, f"r{k}") for k in (2, 3, 4)]
    cases += [make_multistep(n, f"m{n}") for n in range(1, 9)]
    for traj in cases:
        assert compile_mask(traj).loss_set() == _brute_force_target(traj), traj.id
    report("mask sets exact for direct, K in [2,4], N in [1,8]")


def test_pipeline_end_to_end_mock(tmp_path):
    """Four-marker script hits all four modes within the effort bound, offline."""
    config = PipelineConfig()
    start = time.perf_counter()
    analyzer, generator = scripted_mock(tmp_path / "img", seed=0)
    samples = [
        SampleInput(instruction="simple portrait"),
        SampleInput(instruction="portrait [[fail:2]]"),
        SampleInput(instruction="triple scene [[complex:3]]"),
        SampleInput(instruction="rare physics [[knowledge]]"),
    ]
    trajectories, stats = run_batch(samples, analyzer, generator, config)
    elapsed = time.perf_counter() - start

    direct, reflect, multi, filtered = trajectories
    assert direct.mode == Mode.DIRECT
    assert reflect.mode == Mode.REFLECTION
    assert len(reflect.segments_of(G)) == 3
    assert multi.mode == Mode.MULTI_STEP
    assert len(multi.segments_of(S)) == 3
    assert not multi.segments_of(R)
    assert filtered.mode == Mode.FILTERED
    assert filtered.failure_cause == FailureCause.KNOWLEDGE_GAP

    per_sample_bound = 1 + config.max_reflection_iters + config.max_plan_steps * (
        1 + config.per_step_retries
    )
    assert generator.call_count <= per_sample_bound * len(samples)
    assert elapsed < 2.0
    report(f"pipeline 4-marker end-to-end ({elapsed:.3f}s, {generator.call_count} generator calls)")


def test_grammar_fuzz_and_emitted_trajectories(tmp_path):
    """1000 single-segment mutations score format 0; emitted trajectories score 1."""
    rng = random.Random(4242)
    bases = [make_direct(), make_reflection(2), make_reflection(3),
             make_reflection(4), make_multistep(1), make_multistep(4)]
    checked = 0
    while checked < 1000:
        base = rng.choice(bases)
        segs = list(base.segments)
        op = rng.choice(["delete", "duplicate", "swap"])
        if op == "delete":
            del segs[rng.randrange(len(segs))]
        elif op == "duplicate":
            i = rng.randrange(len(segs))
            segs.insert(i, segs[i])
        else:
            i = rng.randrange(len(segs) - 1)
            if (segs[i].kind, segs[i].index) == (segs[i + 1].kind, segs[i + 1].index):
                continue
            segs[i], segs[i + 1] = segs[i + 1], segs[i]
        mutated = Trajectory(
            id=base.id, mode=base.mode, instruction=base.instruction,
            segments=tuple(segs),
        )
        assert format_reward(mutated) == 0
        checked += 1

    analyzer, generator = scripted_mock(tmp_path / "img", seed=1)
    for marker in ("", " [[fail:1]]", " [[fail:3]]", " [[complex:1]]", " [[complex:5]]"):
        traj = run_sample(
            SampleInput(instruction=f"subject{marker}"), analyzer, generator
        )
        assert format_reward(traj) == 1, traj.mode
    report("grammar fuzz: 1000 mutations rejected, emitted trajectories accepted")


def test_verification_consensus(tmp_path):
    """Consensus rule, export count, and arrival-order permutations."""
    store = DatasetStore(tmp_path / "d.jsonl")
    for i in range(6):
        store.append(make_direct(f"t{i}"))

    store.record_verdict("t0", "a", Decision.ACCEPT)
    store.record_verdict("t0", "b", Decision.ACCEPT)
    assert store.status_of("t0") == VerificationStatus.RETAINED

    store.record_verdict("t1", "a", Decision.ACCEPT)
    store.record_verdict("t1", "b", Decision.REJECT)
    assert store.status_of("t1") == VerificationStatus.REJECTED

    store.record_verdict("t2", "a", Decision.ACCEPT)
    assert store.status_of("t2") == VerificationStatus.PENDING

    out = tmp_path / "retained.jsonl"
    retained = sum(
        1 for i in range(6) if store.status_of(f"t{i}") == VerificationStatus.RETAINED
    )
    assert store.export_retained(out) == retained == 1

    # All 2-verdict arrival orders agree.
    expected = {
        (Decision.ACCEPT, Decision.ACCEPT): VerificationStatus.RETAINED,
        (Decision.ACCEPT, Decision.REJECT): VerificationStatus.REJECTED,
        (Decision.REJECT, Decision.ACCEPT): VerificationStatus.REJECTED,
        (Decision.REJECT, Decision.REJECT): VerificationStatus.REJECTED,
    }
    for idx, (d1, d2) in enumerate(itertools.product(Decision, repeat=2)):
        fresh = DatasetStore(tmp_path / f"perm{idx}.jsonl")
        fresh.append(make_direct("p"))
        fresh.record_verdict("p", "a", d1)
        fresh.record_verdict("p", "b", d2)
        assert fresh.status_of("p") == expected[(d1, d2)]
        reverse = DatasetStore(tmp_path / f"perm{idx}r.jsonl")
        reverse.append(make_direct("p"))
        reverse.record_verdict("p", "b", d2)
        reverse.record_verdict("p", "a", d1)
        assert reverse.status_of("p") == fresh.status_of("p")
    report("verification consensus, export count, order permutations")


def test_stats_ratio_on_synthetic_1_2_2_dataset(tmp_path):
    """A 50-record 1:2:2 dataset reports zero deviation from the target ratio."""
    store = DatasetStore(tmp_path / "d.jsonl")
    for i in range(10):
        store.append(make_direct(f"d{i}"))
    for i in range(20):
        store.append(make_reflection(2 + i % 3, f"r{i}"))
    for i in range(20):
        store.append(make_multistep(1 + i % 4, f"m{i}"))
    stats = store.stats()
    assert stats.total == 50
    assert stats.mode_ratio_deviation == 0.0
    report("stats ratio zero deviation on synthetic 1:2:2 dataset")


def test_cli_determinism_with_seed(tmp_path):
    """Two seeded mock runs produce identical datasets modulo timestamps."""
    runner = CliRunner()
    inp = tmp_path / "in.jsonl"
    with open(inp, "w") as fh:
        for instr in ("plain", "x [[fail:2]]", "y [[complex:3]]", "z [[knowledge]]"):
            fh.write(json.dumps({"instruction": instr}) + "\n")
    normalized = []
    for run_no in range(2):
        out = tmp_path / f"out{run_no}.jsonl"
        result = runner.invoke(
            cli_main,
            ["pipeline", "run", "--input", str(inp), "--out", str(out),
             "--mock", "--seed", "7", "--image-dir", str(tmp_path / "img")],
        )
        assert result.exit_code == 0, result.output
        lines = []
        for line in out.read_text().splitlines():
            record = json.loads(line)
            record["provenance"]["created_at"] = ""  # injected timestamp
            lines.append(json.dumps(record, sort_keys=True))
        normalized.append("\n".join(lines).encode())
    assert normalized[0] == normalized[1]
    report("CLI --mock --seed 7 byte-identical modulo timestamps")
