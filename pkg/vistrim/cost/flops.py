"""FLOPs accounting of a pruned prefill and of the decode stage

Per layer and per token counts follow the coefficient-level estimates
    prefill layer:   4 n d^2 + 2 n^2 d + 3 n d m
    pruning stage:   T^2 + 2 T V
    decode layer:    4 d^2 + 2 n d + 3 d m
evaluated in Python integers.
"""
import math
from dataclasses import dataclass
from dataclasses import field

from vistrim.errors import CostOverflowError
from vistrim.errors import ScheduleError
from vistrim.errors import ShapeError
from vistrim.prune import PruneSchedule

INT64_MAX = 2 ** 63 - 1
TERA = 10 ** 12


def _checked(value: int, what: str) -> int:
    """Reject counts beyond the signed 64-bit range"""
    if value > INT64_MAX:
        raise CostOverflowError(f"{what} = {value} overflows 64-bit integers")
    return value


def _positive(**values: int):
    for name, value in values.items():
        if int(value) != value or value < 1:
            raise ShapeError(f"{name} must be a positive integer, got {value}")


def prefill_layer_flops(n: int, d: int, m: int) -> int:
    """FLOPs of one prefill layer over n tokens"""
    _positive(n=n, d=d, m=m)
    return _checked(4 * n * d * d + 2 * n * n * d + 3 * n * d * m,
                    "prefill layer flops")


def prune_overhead_flops(text_count: int, vision_count: int) -> int:
    """Extra FLOPs of one pruning stage: prior plus reweighting"""
    _positive(text_count=text_count)
    if vision_count < 0:
        raise ShapeError(f"vision count must be >= 0, got {vision_count}")
    return _checked(text_count * text_count + 2 * text_count * vision_count,
                    "prune overhead flops")


def decode_step_flops(n: int, d: int, m: int) -> int:
    """FLOPs of one decode layer attending n cached tokens"""
    _positive(n=n, d=d, m=m)
    return _checked(4 * d * d + 2 * n * d + 3 * d * m, "decode step flops")


@dataclass(frozen=True)
class CostParams:
    """Inputs of a whole-run FLOPs estimate

    :param hidden_dim: d,
    :param ffn_dim: m,
    :param num_layers: L,
    :param text_count: T,
    :param vision_count: Initial number of vision tokens V0,
    :param schedule: Pruning schedule, None for the dense run,
    :param decode_steps: Number of generated tokens
    """
    hidden_dim: int
    ffn_dim: int
    num_layers: int
    text_count: int
    vision_count: int
    schedule: PruneSchedule | None = None
    decode_steps: int = 0

    def __post_init__(self):
        _positive(hidden_dim=self.hidden_dim, ffn_dim=self.ffn_dim,
                  num_layers=self.num_layers, text_count=self.text_count)
        if self.vision_count < 0 or self.decode_steps < 0:
            raise ShapeError("vision_count and decode_steps must be >= 0")
        if self.schedule is not None and \
                self.schedule.total_layers != self.num_layers:
            raise ScheduleError(f"schedule for {self.schedule.total_layers} "
                                f"layers applied to {self.num_layers}")

    def dense(self) -> "CostParams":
        """Same run without pruning"""
        return CostParams(self.hidden_dim, self.ffn_dim, self.num_layers,
                          self.text_count, self.vision_count, None,
                          self.decode_steps)


@dataclass(frozen=True)
class CostReport:
    """FLOPs of a run, broken down by stage"""
    prefill_flops: list[int] = field(default_factory=list)
    prune_flops: list[int] = field(default_factory=list)
    decode_flops: list[int] = field(default_factory=list)
    avg_tokens: float = 0.0
    vision_count: int = 0
    dense_prefill_total: int = 0
    dense_grand_total: int = 0

    @property
    def prefill_total(self) -> int:
        """Sum over the layers"""
        return sum(self.prefill_flops)

    @property
    def prune_total(self) -> int:
        """Sum over the pruning stages"""
        return sum(self.prune_flops)

    @property
    def decode_total(self) -> int:
        """Sum over the decode steps"""
        return sum(self.decode_flops)

    @property
    def grand_total(self) -> int:
        """Prefill, pruning and decode"""
        return _checked(self.prefill_total + self.prune_total +
                        self.decode_total, "total flops")

    @property
    def ratio_vs_dense(self) -> float:
        """Grand total relative to the dense run"""
        return self.grand_total / self.dense_grand_total

    @property
    def prefill_ratio(self) -> float:
        """Prefill total relative to the dense prefill"""
        return self.prefill_total / self.dense_prefill_total

    @property
    def vision_token_reduction(self) -> float:
        """Share of the vision tokens removed, layer-weighted"""
        if self.vision_count == 0:
            return 0.0
        return 1.0 - self.avg_tokens / self.vision_count

    def to_dict(self) -> dict[str, any]:
        """Serializable content"""
        return {"prefill_flops": self.prefill_flops,
                "prefill_total": self.prefill_total,
                "prune_flops": self.prune_flops,
                "prune_total": self.prune_total,
                "decode_flops": self.decode_flops,
                "decode_total": self.decode_total,
                "grand_total": self.grand_total,
                "grand_total_tflops": tflops(self.grand_total),
                "prefill_total_tflops": tflops(self.prefill_total),
                "ratio_vs_dense": self.ratio_vs_dense,
                "prefill_ratio": self.prefill_ratio,
                "avg_tokens": self.avg_tokens,
                "vision_token_reduction": self.vision_token_reduction}


def tflops(flops: int) -> float:
    """Tera-FLOPs rounded to 3 decimals"""
    return round(flops / TERA, 3)


def _walk(params: CostParams) -> tuple[list[int], list[int], list[int], float]:
    """Per-layer, per-stage and per-step counts of one run"""
    schedule = params.schedule or PruneSchedule.empty(params.num_layers)
    d, m, text = params.hidden_dim, params.ffn_dim, params.text_count
    timeline = schedule.vision_timeline(params.vision_count)

    prefill = [prefill_layer_flops(text + vision, d, m) for vision in timeline]
    prune = [prune_overhead_flops(text, timeline[layer])
             for layer in schedule.stage_layers]
    final_vision = schedule.keep_counts[-1] if schedule.stages \
        else params.vision_count
    start = text + final_vision
    decode = [params.num_layers * decode_step_flops(start + step, d, m)
              for step in range(params.decode_steps)]
    return prefill, prune, decode, sum(timeline) / params.num_layers


def run_cost(params: CostParams) -> CostReport:
    """FLOPs of a whole run and its savings against the dense run

    Prefill sums the layer estimate with n = T + V alive at every layer,
    pruning adds one overhead term per stage with the V it ranks, decode
    adds one term per step for all layers with n starting at the
    post-prefill length and growing by one token per step.

    :param params: Run description,
    :return: The report
    """
    prefill, prune, decode, avg_tokens = _walk(params)
    dense_prefill, dense_prune, dense_decode, _ = _walk(params.dense())
    return CostReport(prefill_flops=prefill,
                      prune_flops=prune,
                      decode_flops=decode,
                      avg_tokens=avg_tokens,
                      vision_count=params.vision_count,
                      dense_prefill_total=sum(dense_prefill),
                      dense_grand_total=sum(dense_prefill) + sum(dense_prune)
                      + sum(dense_decode))


def text_len_for_dense_flops(target: float,
                             hidden_dim: int,
                             ffn_dim: int,
                             num_layers: int,
                             vision_count: int
                             ) -> int:
    """Text length whose dense prefill FLOPs are closest to a target

    :param target: Dense prefill FLOPs to match,
    :param hidden_dim: d,
    :param ffn_dim: m,
    :param num_layers: L,
    :param vision_count: V0,
    :return: The text length T >= 1
    """
    d, m = hidden_dim, ffn_dim
    # L (2 d n^2 + (4 d^2 + 3 d m) n) = target, positive root in n
    a = 2 * d * num_layers
    b = (4 * d * d + 3 * d * m) * num_layers
    n = (-b + math.sqrt(b * b + 4 * a * target)) / (2 * a)
    candidates = {max(1, math.floor(n) - vision_count),
                  max(1, math.ceil(n) - vision_count)}
    return min(candidates, key=lambda t: abs(
        num_layers * prefill_layer_flops(t + vision_count, d, m) - target))
