"""Local implementation of the vistrim experiment runner"""
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from joblib import Parallel, delayed

from vistrim.analytics import MiouMatrix
from vistrim.analytics import ShiftHistogram
from vistrim.analytics import miou_matrix
from vistrim.analytics import shift_histogram
from vistrim.cost import CostParams
from vistrim.cost import CostReport
from vistrim.cost import run_cost
from vistrim.errors import TraceError
from vistrim.linalg import SeededRng
from vistrim.linalg import derive_seed
from vistrim.logger import logger
from vistrim.model import AttentionMaps
from vistrim.model import ToyVLM
from vistrim.model import init_model
from vistrim.model import planted_sequence
from vistrim.model import prefill
from vistrim.model import random_sequence
from vistrim.prune import PruneSchedule
from vistrim.prune import RetainedSet
from vistrim.prune import make_hook
from vistrim.prune import replay_schedule
from vistrim.prune import retained_sets
from vistrim.trace import DataConfig
from vistrim.trace import RunConfig
from vistrim.trace import cost_frame
from vistrim.trace import read_corpus
from vistrim.trace import read_json
from vistrim.trace import retained_frame
from vistrim.trace import write_corpus
from vistrim.trace import write_csv
from vistrim.trace import write_json

TRACES = "traces"
PRUNED_TRACES = "pruned_traces"
REPORT_PARTS = ("simulate", "prune", "shifts", "miou", "cost", "schedule")


def _sample_input(model: ToyVLM, data: DataConfig, seed: int):
    """Input sequence and planted positions of one sample"""
    rng = SeededRng(seed)
    if data.planted_fraction is None:
        seq = random_sequence(model.config.hidden_dim, data.vision_count,
                              data.text_count, rng)
        return seq, np.zeros(0, dtype=np.int64)
    return planted_sequence(model, data.vision_count, data.text_count, rng,
                            fraction=data.planted_fraction,
                            strength=data.planted_strength,
                            layer=data.planted_layer)


def _simulate_sample(model: ToyVLM,
                     data: DataConfig,
                     sample_id: str,
                     seed: int
                     ) -> tuple[AttentionMaps, np.ndarray]:
    seq, planted = _sample_input(model, data, seed)
    _, maps = prefill(model, seq, sample_id=sample_id)
    return maps, planted


def _prune_sample(model: ToyVLM,
                  data: DataConfig,
                  schedule: PruneSchedule,
                  scorer: str,
                  sample_id: str,
                  seed: int
                  ) -> tuple[AttentionMaps, list[RetainedSet], np.ndarray]:
    seq, planted = _sample_input(model, data, seed)
    final_seq, maps = prefill(model, seq, make_hook(schedule, scorer, seed),
                              sample_id=sample_id)
    return maps, retained_sets(maps, schedule, final_seq), planted


def _replay_sample(maps: AttentionMaps,
                   schedule: PruneSchedule,
                   scorer: str,
                   seed: int
                   ) -> list[RetainedSet]:
    return replay_schedule(maps, schedule, scorer, seed)


def _recall(kept: np.ndarray, planted: np.ndarray) -> float | None:
    if planted.shape[0] == 0:
        return None
    return float(np.isin(planted, kept).sum()) / planted.shape[0]


class LocalRunner:
    """Run the vistrim commands on the local machine

    Samples are processed in parallel with joblib and every output file is
    written by this object once all the samples are merged, in sample order.

    :param config: Run configuration
    """

    def __init__(self, config: RunConfig):
        self.__config = config
        self.__model = None

    @property
    def config(self) -> RunConfig:
        """Run configuration"""
        return self.__config

    @property
    def output(self) -> Path:
        """Output directory"""
        return Path(self.__config.output)

    @property
    def model(self) -> ToyVLM:
        """Toy model built from the model configuration"""
        if self.__model is None:
            self.__model = init_model(self.__config.model)
        return self.__model

    def samples(self) -> list[tuple[str, int]]:
        """(sample_id, seed) of every configured sample"""
        data = self.__config.data
        return [(f"sample_{i:05d}", derive_seed(data.seed, i))
                for i in range(data.samples)]

    def __parallel(self) -> Parallel:
        return Parallel(n_jobs=self.__config.n_jobs)

    def simulate(self) -> dict[str, any]:
        """Run the dense prefill over every sample and write the traces

        :return: The content of simulate.json
        """
        config = self.__config
        samples = self.samples()
        logger().info(f"simulate: {len(samples)} samples, "
                      f"n_jobs={config.n_jobs}")
        results = self.__parallel()(
            delayed(_simulate_sample)(self.model, config.data, sample_id, seed)
            for sample_id, seed in samples)
        corpus = [maps for maps, _ in results]
        write_corpus(corpus, self.output / TRACES)
        write_csv(pd.DataFrame(
            [{"sample_id": sample_id,
              "planted": " ".join(str(int(i)) for i in planted)}
             for (sample_id, _), (_, planted) in zip(samples, results)],
            columns=["sample_id", "planted"]), self.output / "planted.csv")
        summary = {"command": "simulate",
                   "samples": len(samples),
                   "trace_dir": TRACES,
                   "model": config.model.to_dict(),
                   "data": config.to_dict()["data"]}
        write_json(summary, self.output / "simulate.json")
        return summary

    def solve(self) -> PruneSchedule:
        """Resolve the configured schedule and write it

        :return: The schedule, also written to schedule.yml and
                 schedule.json
        """
        return self.__solve(self.__config)

    def __solve(self, config: RunConfig) -> PruneSchedule:
        schedule = config.resolve_schedule()
        vision = config.data.vision_count
        logger().info(f"schedule {schedule.policy}: stages {schedule.stages}")
        self.output.mkdir(parents=True, exist_ok=True)
        try:
            with open(self.output / "schedule.yml", "w",
                      encoding="utf-8") as yaml_file:
                yaml.safe_dump({"schedule": schedule.to_dict()}, yaml_file,
                               sort_keys=False)
        except OSError as err:
            raise TraceError(f"cannot write schedule: {err}") from err
        write_json({"command": "schedule",
                    "vision_count": vision,
                    "average_tokens": schedule.average_tokens(vision),
                    "timeline": schedule.vision_timeline(vision),
                    "schedule": schedule.to_dict()},
                   self.output / "schedule.json")
        return schedule

    def prune(self,
              trace_dir: str | Path | None = None,
              write_traces: bool = False
              ) -> dict[str, any]:
        """Run the pruned prefill, or replay a schedule on recorded traces

        :param trace_dir: Recorded corpus to replay the schedule on, None to
                          run the toy model,
        :param write_traces: Also write the attention of the pruned runs,
        :return: The content of prune.json
        """
        config = self.__config
        corpus = None
        if trace_dir is not None:
            corpus = read_corpus(trace_dir)
            config = self.__replay_config(corpus)
        schedule = self.__solve(config)
        samples = self.samples()
        planted = {}
        if corpus is None:
            logger().info(f"prune: {len(samples)} samples with the "
                          f"{config.scorer} scorer")
            results = self.__parallel()(
                delayed(_prune_sample)(self.model, config.data, schedule,
                                       config.scorer, sample_id, seed)
                for sample_id, seed in samples)
            rows = [(maps.sample_id, retained)
                    for maps, kept, _ in results for retained in kept]
            planted = {maps.sample_id: marked
                       for maps, _, marked in results}
            if write_traces:
                write_corpus([maps for maps, _, _ in results],
                             self.output / PRUNED_TRACES)
            sample_count = len(results)
        else:
            logger().info(f"prune: replaying on {len(corpus)} traces")
            results = self.__parallel()(
                delayed(_replay_sample)(maps, schedule, config.scorer,
                                        derive_seed(config.data.seed, i))
                for i, maps in enumerate(corpus))
            rows = [(maps.sample_id, retained)
                    for maps, kept in zip(corpus, results)
                    for retained in kept]
            sample_count = len(corpus)
        write_csv(retained_frame(rows), self.output / "retained.csv")

        report = self.cost(CostParams(hidden_dim=config.model.hidden_dim,
                                      ffn_dim=config.model.ffn_dim,
                                      num_layers=config.model.num_layers,
                                      text_count=config.data.text_count,
                                      vision_count=config.data.vision_count,
                                      schedule=schedule,
                                      decode_steps=config.decode_steps),
                           method=config.scorer)
        summary = {"command": "prune",
                   "samples": sample_count,
                   "scorer": config.scorer,
                   "replay": trace_dir is not None,
                   "schedule": schedule.to_dict(),
                   "planted_recall": self.__planted_recall(rows, planted,
                                                           schedule),
                   "cost": report.to_dict()}
        write_json(summary, self.output / "prune.json")
        return summary

    def __replay_config(self, corpus: list[AttentionMaps]) -> RunConfig:
        """Configuration sized after the recorded traces

        The layer count, T and V0 come from the corpus, so an explicit
        schedule for another depth is rejected.
        """
        config = self.__config
        if not corpus:
            raise TraceError("no traces to replay the schedule on")
        shapes = {(maps.num_layers, maps.text_count,
                   maps.vision_counts[0] if maps.num_layers else 0)
                  for maps in corpus}
        if len(shapes) > 1:
            raise TraceError(f"cannot replay on traces of shapes "
                             f"{sorted(shapes)}, one shape is required")
        num_layers, text_count, vision_count = shapes.pop()
        if (num_layers, text_count, vision_count) != \
                (config.model.num_layers, config.data.text_count,
                 config.data.vision_count):
            logger().info(f"replay sized after the traces: L={num_layers}, "
                          f"T={text_count}, V0={vision_count}")
        return config.update(
            model=replace(config.model, num_layers=num_layers),
            data=replace(config.data, text_count=text_count,
                         vision_count=vision_count))

    @staticmethod
    def __planted_recall(rows: list[tuple[str, RetainedSet]],
                         planted: dict[str, np.ndarray],
                         schedule: PruneSchedule
                         ) -> list[float | None]:
        """Mean share of the planted tokens kept, per stage"""
        recalls = {layer: [] for layer in schedule.stage_layers}
        for sample_id, retained in rows:
            value = _recall(retained.kept,
                            planted.get(sample_id, np.zeros(0, np.int64)))
            if value is not None:
                recalls[retained.layer_index].append(value)
        return [float(np.mean(values)) if values else None
                for values in recalls.values()]

    def __corpus(self, trace_dir: str | Path | None) -> list[AttentionMaps]:
        return read_corpus(trace_dir if trace_dir is not None
                           else self.output / TRACES)

    def shifts(self, trace_dir: str | Path | None = None) -> ShiftHistogram:
        """Attention shift histogram of a trace corpus

        :param trace_dir: Corpus directory, the simulated traces otherwise,
        :return: The histogram, also written to shifts.csv and shifts.json
        """
        config = self.__config
        fraction = config.analysis.fraction_vision
        corpus = self.__corpus(trace_dir)
        histogram = shift_histogram(corpus, fraction, n_jobs=config.n_jobs)
        write_csv(histogram.to_frame(), self.output / "shifts.csv")
        write_json({"command": "shifts",
                    "fraction": fraction,
                    "mode": histogram.mode if histogram.num_layers else None,
                    **histogram.to_dict()},
                   self.output / "shifts.json")
        return histogram

    def miou(self, trace_dir: str | Path | None = None) -> MiouMatrix:
        """Key text token mIoU matrix of a trace corpus

        :param trace_dir: Corpus directory, the simulated traces otherwise,
        :return: The matrix, also written to miou.csv and miou.json
        """
        config = self.__config
        fraction = config.analysis.fraction_text
        corpus = self.__corpus(trace_dir)
        matrix = miou_matrix(corpus, fraction, n_jobs=config.n_jobs)
        frame = matrix.to_frame().reset_index()
        write_csv(frame, self.output / "miou.csv")
        write_json({"command": "miou", "fraction": fraction,
                    **matrix.to_dict()},
                   self.output / "miou.json")
        return matrix

    def cost(self, params: CostParams, method: str = "pruned") -> CostReport:
        """FLOPs of a run next to the dense run

        :param params: Run description, dense when it has no schedule,
        :param method: Label of the pruned row,
        :return: The report, also written to cost.csv and cost.json
        """
        report = run_cost(params)
        dense = run_cost(params.dense())
        rows = [("dense", float(params.vision_count), dense.grand_total, 1.0)]
        if params.schedule is not None:
            rows.append((method, report.avg_tokens, report.grand_total,
                         report.ratio_vs_dense))
        write_csv(cost_frame(rows), self.output / "cost.csv")
        write_json({"command": "cost",
                    "method": method if params.schedule is not None
                    else "dense",
                    "params": {"hidden_dim": params.hidden_dim,
                               "ffn_dim": params.ffn_dim,
                               "num_layers": params.num_layers,
                               "text_count": params.text_count,
                               "vision_count": params.vision_count,
                               "decode_steps": params.decode_steps,
                               "schedule": params.schedule.to_dict()
                               if params.schedule is not None else None},
                    "report": report.to_dict()},
                   self.output / "cost.json")
        return report

    def report(self) -> dict[str, any]:
        """Merge the JSON outputs found in the output directory

        Values are copied from the command outputs, never recomputed.

        :return: The content of report.json
        """
        parts = {}
        for name in REPORT_PARTS:
            filename = self.output / f"{name}.json"
            if filename.is_file():
                parts[name] = read_json(filename)
        if not parts:
            raise TraceError(f"no command output to report in {self.output}")
        summary = {"command": "report", "parts": list(parts), **parts}
        write_json(summary, self.output / "report.json")
        return summary
