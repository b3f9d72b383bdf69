"""Single change-point detection on cumulative attention curves

The detector is binary segmentation restricted to one change point with an
l2 cost (Binseg-1): it scans every split of the series and keeps the one
with the smallest total within-segment squared error.
"""
from dataclasses import dataclass

import numpy as np

from vistrim.errors import ShapeError
from vistrim.linalg import as_vector


@dataclass(frozen=True, eq=False)
class AttentionCurve:
    """Attention received by one vision token across the layers

    :param token_id: Original position of the token,
    :param values: Attention received at every layer,
    :param cumulative: Prefix sums of the values
    """
    token_id: int
    values: np.ndarray
    cumulative: np.ndarray


@dataclass(frozen=True)
class ChangePointResult:
    """Best two-segment split of a series

    :param token_id: Original position of the token,
    :param breakpoint: Length of the first segment, in 1..L-1,
    :param segment_means: Means of the two segments,
    :param sse: Total within-segment squared error at the breakpoint
    """
    token_id: int
    breakpoint: int
    segment_means: tuple[float, float]
    sse: float


def cumulative_curve(values, token_id: int = 0) -> AttentionCurve:
    """Prefix sums of a per-layer attention series

    :param values: Attention received at every layer,
    :param token_id: Original position of the token,
    :return: The curve
    """
    values = as_vector(values, "attention series")
    if values.shape[0] < 2:
        raise ShapeError("a curve needs at least 2 layers to be split")
    return AttentionCurve(token_id=token_id,
                          values=values,
                          cumulative=np.cumsum(values))


def split_costs(series) -> np.ndarray:
    """Within-segment squared error of every split

    :param series: Series y_1..y_L,
    :return: L-1 costs, entry b-1 for segments [1..b] and [b+1..L]
    """
    y = as_vector(series, "series")
    if y.shape[0] < 2:
        raise ShapeError("a series needs at least 2 points to be split")
    costs = np.empty(y.shape[0] - 1)
    for b in range(1, y.shape[0]):
        left = y[:b]
        right = y[b:]
        costs[b - 1] = (np.sum((left - left.mean()) ** 2) +
                        np.sum((right - right.mean()) ** 2))
    return costs


def tie_tolerance(series) -> float:
    """Cost difference below which two splits count as tied"""
    y = np.asarray(series, dtype=np.float64)
    return 1e-12 * y.shape[0] * float(np.max(np.abs(y))) ** 2


def detect_change_point(series, token_id: int = 0) -> ChangePointResult:
    """Binseg-1 with an l2 cost

    Ties, within rounding noise, go to the smaller breakpoint, so a
    constant series splits at b = 1.

    :param series: Cumulative series y_1..y_L, L >= 2,
    :param token_id: Original position of the token,
    :return: The best split
    """
    y = as_vector(series, "series")
    costs = split_costs(y)
    best = float(costs.min())
    b = int(np.flatnonzero(costs <= best + tie_tolerance(y))[0]) + 1
    return ChangePointResult(token_id=token_id,
                             breakpoint=b,
                             segment_means=(float(y[:b].mean()),
                                            float(y[b:].mean())),
                             sse=float(costs[b - 1]))
