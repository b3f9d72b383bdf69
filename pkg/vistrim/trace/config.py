"""Run configuration read from a YAML file"""
import os
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from pathlib import Path

import yaml

from vistrim.errors import ConfigError
from vistrim.errors import VistrimError
from vistrim.model import ModelConfig
from vistrim.prune import BASELINE_KINDS
from vistrim.prune import DEFAULT_STAGE_LAYERS
from vistrim.prune import SCORERS
from vistrim.prune import KeepPolicy
from vistrim.prune import PruneSchedule
from vistrim.prune import baseline_schedules
from vistrim.prune import solve_schedule

OUTPUT_ENV = "VISTRIM_OUTPUT"


def default_output() -> str:
    """Output directory from the environment, ``vistrim_out`` otherwise"""
    return os.environ.get(OUTPUT_ENV, "vistrim_out")


def _fraction(value: float, name: str) -> float:
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"{name} must be in (0, 1], got {value}")
    return float(value)


@dataclass(frozen=True)
class DataConfig:
    """Simulated input sequences

    :param samples: Number of samples,
    :param vision_count: Vision tokens per sample (V0),
    :param text_count: Text tokens per sample (T),
    :param planted_fraction: Share of text-correlated vision tokens, None
                             for plain random sequences,
    :param planted_strength: Shift length of the planted tokens,
    :param planted_layer: Layer whose attention the planted tokens target,
    :param seed: Seed of the sample generators
    """
    samples: int = 8
    vision_count: int = 144
    text_count: int = 16
    planted_fraction: float | None = 0.1
    planted_strength: float = 2.0
    planted_layer: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.samples < 0 or self.vision_count < 0 or self.text_count < 1:
            raise ConfigError("samples >= 0, vision_count >= 0 and "
                              "text_count >= 1 are required")
        if self.planted_fraction is not None:
            _fraction(self.planted_fraction, "planted_fraction")


@dataclass(frozen=True)
class BudgetConfig:
    """Average token budget solved into a schedule"""
    value: float
    stage_layers: tuple[int, ...] = DEFAULT_STAGE_LAYERS
    final_keep: int = 8
    ratio: float = 2.0

    def policy(self) -> KeepPolicy:
        """Keep count rule of the budget"""
        return KeepPolicy(final_keep=self.final_keep, ratio=self.ratio)


@dataclass(frozen=True)
class BaselineConfig:
    """Comparison schedule solved at the configured budget"""
    kind: str
    layers: tuple[int, ...] | None = None
    start: int = 0
    stride: int | None = None
    seed: int | None = None
    num_stages: int | None = None

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ConfigError(f"unknown baseline {self.kind}")


@dataclass(frozen=True)
class AnalysisConfig:
    """Selection fractions of the attention analyses"""
    fraction_text: float = 0.2
    fraction_vision: float = 0.1

    def __post_init__(self):
        _fraction(self.fraction_text, "fraction_text")
        _fraction(self.fraction_vision, "fraction_vision")


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs

    At most one of ``schedule`` and ``budget`` may be set; commands that
    prune require exactly one.
    """
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    schedule: PruneSchedule | None = None
    budget: BudgetConfig | None = None
    baseline: BaselineConfig | None = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    scorer: str = "adaptive"
    output: str = field(default_factory=default_output)
    n_jobs: int = 1
    decode_steps: int = 0

    def __post_init__(self):
        if self.schedule is not None and self.budget is not None:
            raise ConfigError("set either a schedule or a budget, not both")
        if self.baseline is not None and self.budget is None:
            raise ConfigError("a baseline schedule needs a budget")
        if self.scorer not in SCORERS:
            raise ConfigError(f"unknown scorer {self.scorer}")
        if self.schedule is not None and \
                self.schedule.total_layers != self.model.num_layers:
            raise ConfigError(f"schedule for {self.schedule.total_layers} "
                              f"layers, model has {self.model.num_layers}")
        if self.decode_steps < 0:
            raise ConfigError("decode_steps must be >= 0")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must not be 0")

    def resolve_schedule(self) -> PruneSchedule:
        """Schedule given explicitly or solved from the budget"""
        if self.schedule is not None:
            return self.schedule
        if self.budget is None:
            raise ConfigError("pruning needs a schedule or a budget")
        layers, vision = self.model.num_layers, self.data.vision_count
        if self.baseline is not None:
            return baseline_schedules(self.baseline.kind, layers, vision,
                                      self.budget.value,
                                      layers=self.baseline.layers,
                                      start=self.baseline.start,
                                      stride=self.baseline.stride,
                                      seed=self.baseline.seed,
                                      num_stages=self.baseline.num_stages,
                                      policy=self.budget.policy())
        return solve_schedule(self.budget.value, vision, layers,
                              self.budget.stage_layers, self.budget.policy())

    def update(self, **changes) -> "RunConfig":
        """Copy with some fields replaced"""
        return replace(self, **changes)

    def to_dict(self) -> dict[str, any]:
        """Serializable content"""
        content = {"model": self.model.to_dict(),
                   "data": dict(vars(self.data)),
                   "analysis": dict(vars(self.analysis)),
                   "scorer": self.scorer,
                   "output": self.output,
                   "n_jobs": self.n_jobs,
                   "decode_steps": self.decode_steps}
        if self.schedule is not None:
            content["schedule"] = self.schedule.to_dict()
        if self.budget is not None:
            content["budget"] = {"value": self.budget.value,
                                 "stage_layers": list(self.budget.stage_layers),
                                 "final_keep": self.budget.final_keep,
                                 "ratio": self.budget.ratio}
        if self.baseline is not None:
            baseline = dict(vars(self.baseline))
            if baseline["layers"] is not None:
                baseline["layers"] = list(baseline["layers"])
            content["baseline"] = baseline
        return content

    @classmethod
    def from_dict(cls, content: dict[str, any] | None) -> "RunConfig":
        """Build a configuration from parsed YAML content"""
        content = content or {}
        if not isinstance(content, dict):
            raise ConfigError("the configuration must be a mapping")
        try:
            model = ModelConfig(**content.get("model", {}))
            budget = content.get("budget")
            if budget is not None and not isinstance(budget, dict):
                budget = {"value": budget}
            if budget is not None and "stage_layers" in budget:
                budget = {**budget,
                          "stage_layers": tuple(budget["stage_layers"])}
            baseline = content.get("baseline")
            if baseline is not None and baseline.get("layers") is not None:
                baseline = {**baseline, "layers": tuple(baseline["layers"])}
            schedule = content.get("schedule")
            if schedule is not None:
                schedule = PruneSchedule.from_dict(
                    {"total_layers": model.num_layers, **schedule})
            kwargs = {"model": model,
                      "data": DataConfig(**content.get("data", {})),
                      "schedule": schedule,
                      "budget": BudgetConfig(**budget) if budget else None,
                      "baseline": BaselineConfig(**baseline)
                      if baseline else None,
                      "analysis": AnalysisConfig(**content.get("analysis",
                                                               {}))}
            for key in ("scorer", "output", "n_jobs", "decode_steps"):
                if key in content:
                    kwargs[key] = content[key]
            return cls(**kwargs)
        except TypeError as err:
            raise ConfigError(f"invalid configuration: {err}") from err
        except VistrimError as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(f"invalid configuration: {err}") from err

    @classmethod
    def from_yaml(cls, filename: str | Path) -> "RunConfig":
        """Read a YAML configuration file"""
        try:
            with open(filename, "r", encoding="utf-8") as yaml_file:
                content = yaml.safe_load(yaml_file)
        except OSError as err:
            raise ConfigError(f"cannot read {filename}: {err}") from err
        except yaml.YAMLError as err:
            raise ConfigError(f"invalid YAML in {filename}: {err}") from err
        return cls.from_dict(content)
