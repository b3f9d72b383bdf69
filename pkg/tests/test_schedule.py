import pytest

from vistrim.errors import ScheduleError
from vistrim.prune import REFERENCE_RANDOM_LAYERS
from vistrim.prune import KeepPolicy
from vistrim.prune import PruneSchedule
from vistrim.prune import baseline_schedules
from vistrim.prune import solve_schedule


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        PruneSchedule(((10, 5), (1, 2)), 32)
    with pytest.raises(ScheduleError):
        PruneSchedule(((1, 5), (10, 5)), 32)
    with pytest.raises(ScheduleError):
        PruneSchedule(((32, 5),), 32)
    with pytest.raises(ScheduleError):
        PruneSchedule(((1, -1),), 32)


def test_vision_timeline_and_average():
    schedule = PruneSchedule(((1, 58), (10, 29), (20, 8)), 32)
    timeline = schedule.vision_timeline(576)
    assert timeline[:2] == [576, 576]
    assert timeline[2:11] == [58] * 9
    assert timeline[11:21] == [29] * 10
    assert timeline[21:] == [8] * 11
    assert schedule.average_tokens(576) == pytest.approx(64.125)
    assert (2 * 576 + 9 * 58 + 10 * 29 + 11 * 8) / 32 == 64.125


def test_timeline_rejects_keep_above_vision():
    with pytest.raises(ScheduleError):
        PruneSchedule(((1, 100),), 4).vision_timeline(50)


def test_schedule_dict_keys():
    schedule = PruneSchedule(((1, 58), (10, 29), (20, 8)), 32, "halving")
    content = schedule.to_dict()
    assert set(content) == {"stage_layers", "keep_counts", "total_layers",
                            "policy", "seed"}
    restored = PruneSchedule.from_dict(content)
    assert restored.stages == schedule.stages
    assert restored.policy == "halving"


def test_solve_budget_64():
    schedule = solve_schedule(64, 576, 32)
    assert schedule.keep_counts == [58, 29, 8]
    assert schedule.stage_layers == [1, 10, 20]
    assert schedule.average_tokens(576) == pytest.approx(64.125)


@pytest.mark.parametrize("budget, vision, expected", [
    (128, 576, [204, 102, 8]),
    (48, 576, [22, 11, 8]),
    (64, 576, [58, 29, 8]),
    (32, 256, [30, 15, 8]),
])
def test_solve_budgets_within_one_token(budget, vision, expected):
    schedule = solve_schedule(budget, vision, 32)
    assert schedule.keep_counts == expected
    assert abs(schedule.average_tokens(vision) - budget) <= 1.0


def test_solve_infeasible_budget_reports_range():
    with pytest.raises(ScheduleError) as info:
        solve_schedule(32, 576, 32)
    low, high = info.value.feasible
    assert low > 32
    assert low < high


@pytest.mark.parametrize("budget", [576, 600])
def test_solve_budget_above_vision_count_reports_range(budget):
    with pytest.raises(ScheduleError, match="below") as info:
        solve_schedule(budget, 576, 32)
    low, high = info.value.feasible
    assert low == pytest.approx(46.625)
    assert high == pytest.approx(290.75)


def test_solve_empty_stages():
    schedule = solve_schedule(576, 576, 32, stage_layers=())
    assert schedule.stages == ()
    assert schedule.average_tokens(576) == 576
    with pytest.raises(ScheduleError):
        solve_schedule(100, 576, 32, stage_layers=())


def test_solve_single_stage():
    schedule = solve_schedule(128, 576, 32, stage_layers=(1,))
    assert schedule.keep_counts == [98]
    assert abs(schedule.average_tokens(576) - 128) <= 1.0


def test_solve_transfers_to_40_layers():
    schedule = solve_schedule(64, 576, 40, stage_layers=(1, 11, 22))
    assert abs(schedule.average_tokens(576) - 64) <= 1.0
    assert schedule.keep_counts[-1] == 8


def test_solve_with_custom_policy():
    policy = KeepPolicy(name="thirds", final_keep=4, ratio=3.0)
    schedule = solve_schedule(64, 576, 32, policy=policy)
    assert schedule.policy == "thirds"
    assert schedule.keep_counts[-1] == 4
    assert abs(schedule.average_tokens(576) - 64) <= 1.0


def test_keep_policy_validation():
    with pytest.raises(ScheduleError):
        KeepPolicy(ratio=1.0)


@pytest.mark.parametrize("start, stride, layers", [
    (0, 9, [0, 9, 18, 27]),
    (2, 10, [2, 12, 22]),
])
def test_uniform_baselines(start, stride, layers):
    schedule = baseline_schedules("uniform", 32, 576, 128, start=start,
                                  stride=stride)
    assert schedule.stage_layers == layers
    assert schedule.policy == "uniform/halving"
    assert abs(schedule.average_tokens(576) - 128) <= 1.0


def test_single_baseline():
    schedule = baseline_schedules("single", 32, 576, 128, start=1)
    assert schedule.stage_layers == [1]
    assert schedule.keep_counts == [98]


@pytest.mark.parametrize("layers", REFERENCE_RANDOM_LAYERS)
def test_reference_random_layers(layers):
    schedule = baseline_schedules("random", 32, 576, 128, layers=layers)
    assert schedule.stage_layers == list(layers)
    assert abs(schedule.average_tokens(576) - 128) <= 1.0


def test_random_baseline_is_reproducible():
    # one stage keeps budget 560 feasible wherever the layer lands
    first = baseline_schedules("random", 32, 576, 560, seed=5, num_stages=1)
    second = baseline_schedules("random", 32, 576, 560, seed=5, num_stages=1)
    assert first.stages == second.stages
    assert first.seed == 5
    assert len(first.stage_layers) == 1
    assert all(1 <= layer <= 30 for layer in first.stage_layers)


def test_unknown_baseline():
    with pytest.raises(ScheduleError):
        baseline_schedules("static", 32, 576, 128)
