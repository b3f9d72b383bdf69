"""Package implementing text-guided vision token pruning"""
from .schedule import BASELINE_KINDS
from .schedule import DEFAULT_STAGE_LAYERS
from .schedule import REFERENCE_RANDOM_LAYERS
from .schedule import KeepPolicy
from .schedule import PruneSchedule
from .schedule import baseline_schedules
from .schedule import solve_schedule
from .scoring import SCORERS
from .scoring import RetainedSet
from .scoring import TextPrior
from .scoring import VisionScores
from .scoring import make_hook
from .scoring import replay_schedule
from .scoring import retained_sets
from .scoring import score_vision
from .scoring import text_prior
from .scoring import top_k_indices
from .scoring import top_k_retain

export = [text_prior, score_vision, top_k_retain, make_hook, solve_schedule,
          baseline_schedules]

__all__ = [
    "BASELINE_KINDS",
    "DEFAULT_STAGE_LAYERS",
    "REFERENCE_RANDOM_LAYERS",
    "SCORERS",
    "KeepPolicy",
    "PruneSchedule",
    "RetainedSet",
    "TextPrior",
    "VisionScores",
    "baseline_schedules",
    "make_hook",
    "replay_schedule",
    "retained_sets",
    "score_vision",
    "solve_schedule",
    "text_prior",
    "top_k_indices",
    "top_k_retain"
]
