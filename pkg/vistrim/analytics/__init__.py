"""Package implementing the offline attention analyses"""
from .changepoint import AttentionCurve
from .changepoint import ChangePointResult
from .changepoint import cumulative_curve
from .changepoint import detect_change_point
from .changepoint import split_costs
from .changepoint import tie_tolerance
from .importance import ensure_fraction
from .importance import key_text_tokens
from .importance import received_attention
from .importance import top_vision_tokens
from .corpus import MiouMatrix
from .corpus import ShiftHistogram
from .corpus import miou_matrix
from .corpus import sample_iou
from .corpus import sample_shifts
from .corpus import shift_histogram

export = [cumulative_curve, detect_change_point, top_vision_tokens,
          shift_histogram, key_text_tokens, miou_matrix]

__all__ = [
    "AttentionCurve",
    "ChangePointResult",
    "MiouMatrix",
    "ShiftHistogram",
    "cumulative_curve",
    "detect_change_point",
    "ensure_fraction",
    "key_text_tokens",
    "miou_matrix",
    "received_attention",
    "sample_iou",
    "sample_shifts",
    "shift_histogram",
    "split_costs",
    "tie_tolerance",
    "top_vision_tokens"
]
