import pytest

from conftest import E, G, R, S, make_direct, make_multistep, make_reflection
from reasonforge.masks import compile_mask, dumps, loads, mask_stats
from reasonforge.trajectory import FailureCause, Mode, Trajectory


class TestCompileMask:
    def test_direct_targets_both_segments(self):
        mask = compile_mask(make_direct())
        assert mask.loss_set() == {(G, 1), (E, 1)}

    def test_reflection_k3(self):
        mask = compile_mask(make_reflection(3))
        assert mask.loss_set() == {(E, 2), (R, 2), (G, 3), (E, 3)}

    def test_multistep_n2(self):
        mask = compile_mask(make_multistep(2))
        assert mask.loss_set() == {
            (E, 1), (S, 2), (G, 2), (E, 2), (S, 3), (G, 3), (E, 3),
        }

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_reflection_counts(self, k):
        # Always exactly 1 G, 1 R, 2 E regardless of attempt count.
        mask = compile_mask(make_reflection(k))
        kinds = [kind for kind, _ in mask.loss_set()]
        assert kinds.count(G) == 1
        assert kinds.count(R) == 1
        assert kinds.count(E) == 2

    @pytest.mark.parametrize("n", list(range(1, 9)))
    def test_multistep_counts(self, n):
        mask = compile_mask(make_multistep(n))
        kinds = [kind for kind, _ in mask.loss_set()]
        assert kinds.count(G) == n
        assert kinds.count(S) == n
        assert kinds.count(E) == n + 1
        assert (G, 1) not in mask.loss_set()

    def test_entries_cover_all_segments_in_order(self):
        traj = make_reflection(4)
        mask = compile_mask(traj)
        assert [(e.kind, e.index) for e in mask.entries] == [
            (s.kind, s.index) for s in traj.segments
        ]

    def test_loss_true_generations_follow_passing_evaluation(self):
        for traj in (make_direct(), make_reflection(2), make_reflection(4),
                     make_multistep(1), make_multistep(5)):
            mask = compile_mask(traj)
            eval_pass = {
                s.index: s.payload.passed for s in traj.segments if s.kind == E
            }
            for kind, index in mask.loss_set():
                if kind == G:
                    assert eval_pass[index], (traj.mode, index)

    def test_filtered_rejected(self):
        traj = Trajectory(
            id="t", mode=Mode.FILTERED, instruction="x",
            failure_cause=FailureCause.OTHER,
        )
        with pytest.raises(ValueError):
            compile_mask(traj)

    def test_invalid_structure_rejected(self):
        broken = Trajectory(
            id="t", mode=Mode.DIRECT, instruction="x",
            segments=make_reflection(2).segments,
        )
        with pytest.raises(ValueError):
            compile_mask(broken)


class TestMaskStats:
    def test_single_direct(self):
        stats = mask_stats([compile_mask(make_direct())])
        assert stats == {
            "generation": 1, "evaluation": 1, "reflection": 0, "sub_instruction": 0,
        }

    def test_reflection_k2(self):
        stats = mask_stats([compile_mask(make_reflection(2))])
        assert stats["evaluation"] == 2
        assert stats["reflection"] == 1
        assert stats["generation"] == 1

    def test_empty(self):
        assert mask_stats([]) == {
            "generation": 0, "evaluation": 0, "reflection": 0, "sub_instruction": 0,
        }

    def test_totals_are_sums(self):
        masks = [compile_mask(make_direct()), compile_mask(make_multistep(3))]
        stats = mask_stats(masks)
        assert sum(stats.values()) == sum(
            len(m.loss_set()) for m in masks
        )


def test_mask_serde_round_trip():
    mask = compile_mask(make_multistep(2))
    assert loads(dumps(mask)) == mask
