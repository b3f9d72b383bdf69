"""Layer-wise pruning schedules and the token budget solver"""
import math
from dataclasses import dataclass

from vistrim.errors import ScheduleError
from vistrim.linalg import SeededRng
from vistrim.logger import logger

DEFAULT_STAGE_LAYERS = (1, 10, 20)
REFERENCE_RANDOM_LAYERS = ((3,), (2, 15), (2, 8, 16), (2, 4, 8, 16),
                           (3, 6, 23))
BASELINE_KINDS = ("uniform", "single", "random")


@dataclass(frozen=True)
class KeepPolicy:
    """Rule turning a token budget into per-stage keep counts

    :param name: Name recorded in the solved schedule,
    :param final_keep: Keep count of the last stage,
    :param ratio: Ratio between the keep counts of consecutive stages
                  before the last one
    """
    name: str = "halving"
    final_keep: int = 8
    ratio: float = 2.0

    def __post_init__(self):
        if self.final_keep < 0:
            raise ScheduleError("final_keep must be >= 0")
        if self.ratio <= 1.0:
            raise ScheduleError("ratio must be > 1 for decreasing keep counts")


@dataclass(frozen=True)
class PruneSchedule:
    """Ordered pruning stages

    :param stages: (prune_after_layer, keep_count) pairs,
    :param total_layers: Number of layers of the model (L),
    :param policy: Name of the rule that produced the keep counts,
    :param seed: Seed of the layer draw for random schedules
    """
    stages: tuple[tuple[int, int], ...]
    total_layers: int
    policy: str = "manual"
    seed: int | None = None

    def __post_init__(self):
        stages = tuple((int(layer), int(keep)) for layer, keep in self.stages)
        object.__setattr__(self, "stages", stages)
        if self.total_layers < 1:
            raise ScheduleError("total_layers must be >= 1")
        previous_layer, previous_keep = -1, None
        for layer, keep in stages:
            if layer <= previous_layer:
                raise ScheduleError("stage layers must be strictly increasing")
            if layer >= self.total_layers:
                raise ScheduleError(f"stage layer {layer} >= L="
                                    f"{self.total_layers}")
            if keep < 0:
                raise ScheduleError("keep counts must be >= 0")
            if previous_keep is not None and keep >= previous_keep:
                raise ScheduleError("keep counts must be strictly decreasing")
            previous_layer, previous_keep = layer, keep

    @classmethod
    def empty(cls, total_layers: int) -> "PruneSchedule":
        """Schedule that never prunes"""
        return cls(stages=(), total_layers=total_layers, policy="dense")

    @property
    def stage_layers(self) -> list[int]:
        """Layers after which pruning happens"""
        return [layer for layer, _ in self.stages]

    @property
    def keep_counts(self) -> list[int]:
        """Keep count of every stage"""
        return [keep for _, keep in self.stages]

    def keep_at(self, layer: int) -> int | None:
        """Keep count of the stage at a layer, None when no stage"""
        for stage_layer, keep in self.stages:
            if stage_layer == layer:
                return keep
        return None

    def vision_timeline(self, vision_count: int) -> list[int]:
        """Vision tokens alive at every layer

        :param vision_count: Initial number of vision tokens V0,
        :return: L counts, layer 0 first
        """
        if self.stages and self.stages[0][1] > vision_count:
            raise ScheduleError(f"first stage keeps {self.stages[0][1]} of "
                                f"{vision_count} vision tokens")
        keep = dict(self.stages)
        timeline = []
        current = vision_count
        for layer in range(self.total_layers):
            timeline.append(current)
            if layer in keep:
                current = keep[layer]
        return timeline

    def average_tokens(self, vision_count: int) -> float:
        """Layer-weighted average of the alive vision tokens"""
        return sum(self.vision_timeline(vision_count)) / self.total_layers

    def to_dict(self) -> dict[str, any]:
        """Serializable content with the documented key set"""
        return {"stage_layers": self.stage_layers,
                "keep_counts": self.keep_counts,
                "total_layers": self.total_layers,
                "policy": self.policy,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, content: dict[str, any]) -> "PruneSchedule":
        """Build a schedule from its serialized content"""
        try:
            layers = list(content.get("stage_layers", []))
            keeps = list(content.get("keep_counts", []))
            total_layers = int(content["total_layers"])
        except (KeyError, TypeError, ValueError) as err:
            raise ScheduleError(f"malformed schedule: {err}") from err
        if len(layers) != len(keeps):
            raise ScheduleError("stage_layers and keep_counts differ in length")
        return cls(stages=tuple(zip(layers, keeps)),
                   total_layers=total_layers,
                   policy=content.get("policy", "manual"),
                   seed=content.get("seed"))


def _checked_layers(stage_layers, num_layers: int) -> list[int]:
    """Validate a list of stage layers"""
    layers = [int(layer) for layer in stage_layers]
    if any(b <= a for a, b in zip(layers, layers[1:])):
        raise ScheduleError(f"stage layers must be strictly increasing: "
                            f"{layers}")
    if layers and (layers[0] < 0 or layers[-1] >= num_layers):
        raise ScheduleError(f"stage layers {layers} out of [0, {num_layers})")
    return layers


def _keep_counts(x: int, stages: int, policy: KeepPolicy) -> list[int]:
    """Keep counts generated by the policy from the free count x"""
    if stages == 1:
        return [x]
    head = [int(round(policy.ratio ** (stages - 2 - i) * x))
            for i in range(stages - 1)]
    return head + [policy.final_keep]


def solve_schedule(budget: float,
                   vision_count: int,
                   num_layers: int,
                   stage_layers=DEFAULT_STAGE_LAYERS,
                   policy: KeepPolicy = KeepPolicy()
                   ) -> PruneSchedule:
    """Find integer keep counts whose layer-weighted average meets a budget

    With one stage its keep count is solved directly. With more stages the
    last one keeps ``policy.final_keep`` tokens and the others form a
    geometric sequence of ratio ``policy.ratio``; the free count is solved
    from the linear budget equation and rounded to the neighbour with the
    smallest realized error.

    :param budget: Target average number of vision tokens per layer,
    :param vision_count: Initial number of vision tokens V0,
    :param num_layers: Number of layers L,
    :param stage_layers: Layers after which to prune,
    :param policy: Keep count rule,
    :return: The solved schedule
    """
    layers = _checked_layers(stage_layers, num_layers)
    if not layers:
        if budget == vision_count:
            return PruneSchedule((), num_layers, policy=policy.name)
        raise ScheduleError(f"without stages the only feasible budget is "
                            f"{vision_count}", feasible=(vision_count,
                                                         vision_count))
    count = len(layers)
    spans = [b - a for a, b in zip(layers, layers[1:])]
    spans.append(num_layers - 1 - layers[-1])
    unpruned = (layers[0] + 1) * vision_count
    target = budget * num_layers - unpruned

    if count == 1:
        coefficient = spans[0]
        fixed = 0
        x_low = 0
    else:
        coefficient = sum(policy.ratio ** (count - 2 - i) * spans[i]
                          for i in range(count - 1))
        fixed = policy.final_keep * spans[-1]
        x_low = policy.final_keep + 1
    x_high = math.floor(vision_count / policy.ratio ** max(count - 2, 0))
    while x_high >= x_low and _keep_counts(x_high, count, policy)[0] > vision_count:
        x_high -= 1

    def build(x: int) -> PruneSchedule:
        return PruneSchedule(tuple(zip(layers, _keep_counts(x, count, policy))),
                             num_layers, policy=policy.name)

    if x_high < x_low:
        raise ScheduleError(f"policy {policy.name} admits no schedule for "
                            f"V0={vision_count} on layers {layers}")
    feasible = (build(x_low).average_tokens(vision_count),
                build(x_high).average_tokens(vision_count))
    if budget >= vision_count:
        raise ScheduleError(f"budget {budget} must be below V0={vision_count}"
                            f": feasible range [{feasible[0]:.3f}, "
                            f"{feasible[1]:.3f}]", feasible=feasible)
    if coefficient == 0:
        raise ScheduleError(f"stages on layers {layers} cannot change the "
                            f"average", feasible=feasible)

    x = (target - fixed) / coefficient
    candidates = sorted({min(max(math.floor(x), x_low), x_high),
                         min(max(math.ceil(x), x_low), x_high)},
                        key=lambda c: abs(c - x))
    best = None
    for candidate in candidates:
        schedule = build(candidate)
        error = abs(schedule.average_tokens(vision_count) - budget)
        if best is None or error < best[0]:
            best = (error, schedule)
    if best[0] > 1.0:
        raise ScheduleError(f"budget {budget} infeasible for V0={vision_count}"
                            f" on layers {layers}: feasible range "
                            f"[{feasible[0]:.3f}, {feasible[1]:.3f}]",
                            feasible=feasible)
    return best[1]


def _uniform_layers(num_layers: int, start: int, stride: int) -> list[int]:
    if stride is None or stride < 1:
        raise ScheduleError("uniform schedules need a stride >= 1")
    return list(range(start, num_layers, stride))


def baseline_schedules(kind: str,
                       num_layers: int,
                       vision_count: int,
                       budget: float,
                       layers=None,
                       start: int = 0,
                       stride: int | None = None,
                       seed: int | None = None,
                       num_stages: int | None = None,
                       policy: KeepPolicy = KeepPolicy()
                       ) -> PruneSchedule:
    """Comparison schedules at the same token budget

    :param kind: One of uniform, single or random,
    :param num_layers: Number of layers L,
    :param vision_count: Initial number of vision tokens V0,
    :param budget: Average token budget shared with the compared schedule,
    :param layers: Explicit stage layers (uniform, single, or a logged
                   random draw),
    :param start: First layer of a uniform schedule,
    :param stride: Layer stride of a uniform schedule,
    :param seed: Seed of the random layer draw,
    :param num_stages: Number of layers drawn by a random schedule, drawn
                       in 1..4 when not given,
    :param policy: Keep count rule,
    :return: The baseline schedule
    """
    if kind not in BASELINE_KINDS:
        raise ScheduleError(f"unknown baseline {kind}, expected one of "
                            f"{BASELINE_KINDS}")
    seed_used = None
    if kind == "uniform":
        stage_layers = list(layers) if layers else _uniform_layers(
            num_layers, start, stride)
    elif kind == "single":
        stage_layers = list(layers) if layers else [start]
        if len(stage_layers) != 1:
            raise ScheduleError(f"single-layer schedule with layers "
                                f"{stage_layers}")
    elif layers:
        stage_layers = list(layers)
    else:
        if seed is None:
            raise ScheduleError("random schedules need a seed or layers")
        seed_used = seed
        rng = SeededRng(seed)
        if num_stages is None:
            num_stages = int(rng.integers(1, 5))
        candidates = num_layers - 2
        if num_stages < 1 or num_stages > candidates:
            raise ScheduleError(f"cannot draw {num_stages} layers out of "
                                f"{candidates}")
        stage_layers = [int(v) + 1 for v in rng.choice(candidates, num_stages)]
        logger().info(f"random schedule seed={seed} drew layers "
                      f"{stage_layers}")
    if not stage_layers:
        raise ScheduleError(f"{kind} baseline without stage layers")
    solved = solve_schedule(budget, vision_count, num_layers, stage_layers,
                            policy)
    return PruneSchedule(solved.stages, num_layers,
                         policy=f"{kind}/{policy.name}", seed=seed_used)
