import shutil
from dataclasses import replace

import pandas as pd
import pytest

from vistrim.cost import CostParams
from vistrim.errors import ConfigError
from vistrim.errors import TraceError
from vistrim.prune import PruneSchedule
from vistrim.runner import LocalRunner
from vistrim.trace import BudgetConfig
from vistrim.trace import RunConfig
from vistrim.trace import read_corpus
from vistrim.trace import read_json


@pytest.fixture
def runner(run_yaml, tmp_path):
    config = RunConfig.from_yaml(run_yaml).update(output=str(tmp_path / "out"))
    yield LocalRunner(config)


def test_samples_are_seeded(runner):
    samples = runner.samples()
    assert [s for s, _ in samples] == ["sample_00000", "sample_00001",
                                       "sample_00002"]
    assert len({seed for _, seed in samples}) == 3


def test_simulate_writes_traces(runner):
    summary = runner.simulate()
    assert summary["samples"] == 3
    corpus = read_corpus(runner.output / "traces")
    assert len(corpus) == 3
    assert all(maps.vision_counts == [20] * 6 for maps in corpus)
    planted = pd.read_csv(runner.output / "planted.csv")
    assert planted.columns.tolist() == ["sample_id", "planted"]
    assert all(len(str(p).split()) == 4 for p in planted["planted"])


def test_prune_writes_logs(runner):
    summary = runner.prune(write_traces=True)
    retained = pd.read_csv(runner.output / "retained.csv")
    assert retained.columns.tolist() == ["sample_id", "layer", "kept"]
    assert retained["layer"].tolist() == [1, 3] * 3
    assert [len(str(k).split()) for k in retained["kept"]] == [10, 4] * 3
    assert len(summary["planted_recall"]) == 2
    assert all(0.0 <= r <= 1.0 for r in summary["planted_recall"])
    assert summary["cost"]["ratio_vs_dense"] < 1.0
    pruned = read_corpus(runner.output / "pruned_traces")
    assert pruned[0].vision_counts == [20, 20, 10, 10, 4, 4]
    assert (runner.output / "schedule.yml").is_file()


def test_prune_replays_recorded_traces(runner):
    runner.simulate()
    summary = runner.prune(trace_dir=runner.output / "traces")
    assert summary["replay"] is True
    assert summary["planted_recall"] == [None, None]
    retained = pd.read_csv(runner.output / "retained.csv")
    assert len(retained) == 6


def test_replay_is_sized_after_the_traces(run_yaml, tmp_path):
    config = RunConfig.from_yaml(run_yaml)
    recorder = LocalRunner(config.update(output=str(tmp_path / "rec")))
    recorder.simulate()
    # V0=40 cannot reach a budget of 12, the recorded V0=20 can
    other = config.update(
        schedule=None,
        budget=BudgetConfig(12, stage_layers=(1, 3)),
        data=replace(config.data, vision_count=40, text_count=9))
    replayer = LocalRunner(other.update(output=str(tmp_path / "out")))
    summary = replayer.prune(trace_dir=recorder.output / "traces")
    assert summary["schedule"]["keep_counts"] == [9, 8]
    cost = read_json(replayer.output / "cost.json")
    assert cost["params"]["vision_count"] == 20
    assert cost["params"]["text_count"] == 4
    assert cost["params"]["num_layers"] == 6
    assert read_json(replayer.output / "schedule.json")["vision_count"] == 20


def test_replay_rejects_schedule_for_other_depth(run_yaml, tmp_path):
    config = RunConfig.from_yaml(run_yaml)
    shallow = config.update(model=replace(config.model, num_layers=4),
                            schedule=PruneSchedule(((1, 10), (2, 4)), 4),
                            output=str(tmp_path / "rec"))
    LocalRunner(shallow).simulate()
    runner = LocalRunner(config.update(output=str(tmp_path / "out")))
    with pytest.raises(ConfigError, match="layers"):
        runner.prune(trace_dir=tmp_path / "rec" / "traces")


def test_replay_rejects_mixed_shapes(run_yaml, tmp_path):
    config = RunConfig.from_yaml(run_yaml)
    LocalRunner(config.update(output=str(tmp_path / "a"))).simulate()
    wide = config.update(data=replace(config.data, samples=1,
                                      vision_count=30),
                         output=str(tmp_path / "b"))
    LocalRunner(wide).simulate()
    shutil.copytree(tmp_path / "b" / "traces" / "sample_00000",
                    tmp_path / "a" / "traces" / "sample_wide")
    runner = LocalRunner(config.update(output=str(tmp_path / "out")))
    with pytest.raises(TraceError, match="shapes"):
        runner.prune(trace_dir=tmp_path / "a" / "traces")
    with pytest.raises(TraceError, match="no traces"):
        runner.prune(trace_dir=tmp_path / "a")


def test_parallel_matches_sequential(run_yaml, tmp_path):
    config = RunConfig.from_yaml(run_yaml)
    sequential = LocalRunner(config.update(output=str(tmp_path / "a")))
    parallel = LocalRunner(config.update(output=str(tmp_path / "b"),
                                         n_jobs=2))
    sequential.prune()
    parallel.prune()
    for name in ("retained.csv", "prune.json", "cost.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_analyses_after_simulate(runner):
    runner.simulate()
    histogram = runner.shifts()
    assert histogram.sample_count == 3
    assert histogram.counts.sum() == 3 * 4
    matrix = runner.miou()
    assert matrix.num_layers == 6
    frame = pd.read_csv(runner.output / "miou.csv")
    assert frame.shape == (6, 7)
    assert read_json(runner.output / "shifts.json")["fraction"] == 0.2


def test_cost_writes_table(runner):
    runner.cost(CostParams(hidden_dim=4096, ffn_dim=11008, num_layers=32,
                           text_count=64, vision_count=576))
    frame = pd.read_csv(runner.output / "cost.csv", dtype=str)
    assert frame.to_dict("records") == [{"method": "dense", "tokens": "576",
                                         "flops_T": "4.252",
                                         "ratio": "1.0000"}]


def test_report_copies_outputs(runner):
    runner.simulate()
    runner.prune()
    runner.shifts()
    summary = runner.report()
    assert summary["parts"] == ["simulate", "prune", "shifts", "cost",
                                "schedule"]
    assert summary["prune"] == read_json(runner.output / "prune.json")
    assert read_json(runner.output / "report.json") == summary


def test_report_without_outputs(runner):
    with pytest.raises(TraceError):
        runner.report()
