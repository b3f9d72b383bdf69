"""Corpus level analyses: attention shift histograms and key text token mIoU

Per-sample results are computed in parallel with joblib and merged by
summation, so partial results combine in any grouping.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from vistrim.errors import ShapeError
from vistrim.model import AttentionMaps

from .changepoint import cumulative_curve
from .changepoint import detect_change_point
from .importance import ensure_fraction
from .importance import key_text_tokens
from .importance import received_attention
from .importance import top_vision_tokens


@dataclass(eq=False)
class ShiftHistogram:
    """Count of attention shift points per layer

    Bin b counts the curves whose first segment covers b layers, that is
    whose shift starts at 0-based layer b.

    :param counts: One count per layer,
    :param sample_count: Number of samples analyzed,
    :param token_count: Number of curves analyzed
    """
    counts: np.ndarray
    sample_count: int = 0
    token_count: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def num_layers(self) -> int:
        """Number of layer bins"""
        return self.counts.shape[0]

    @property
    def mode(self) -> int:
        """Layer with the most shift points, the smaller one on ties"""
        return int(np.argmax(self.counts))

    def merge(self, other: "ShiftHistogram") -> "ShiftHistogram":
        """Sum two histograms over the same layer count"""
        if other.num_layers != self.num_layers:
            raise ShapeError(f"cannot merge histograms over {self.num_layers}"
                             f" and {other.num_layers} layers")
        return ShiftHistogram(counts=self.counts + other.counts,
                              sample_count=self.sample_count +
                              other.sample_count,
                              token_count=self.token_count + other.token_count)

    def to_frame(self) -> pd.DataFrame:
        """Table with one (layer, count) row per layer"""
        return pd.DataFrame({"layer": np.arange(self.num_layers),
                             "count": self.counts})

    def to_dict(self) -> dict[str, any]:
        """Serializable content"""
        return {"num_layers": self.num_layers,
                "sample_count": self.sample_count,
                "token_count": self.token_count,
                "counts": [int(c) for c in self.counts]}


@dataclass(eq=False)
class MiouMatrix:
    """Layer-pair mean IoU of the key text token sets

    Holds the IoU sum over samples so matrices merge by addition.

    :param iou_sum: L x L sum of per-sample IoU values,
    :param sample_count: Number of samples summed
    """
    iou_sum: np.ndarray
    sample_count: int = 0

    def __post_init__(self):
        self.iou_sum = np.asarray(self.iou_sum, dtype=np.float64)

    @property
    def num_layers(self) -> int:
        """Number of layers"""
        return self.iou_sum.shape[0]

    @property
    def values(self) -> np.ndarray:
        """Mean IoU, the identity for an empty corpus"""
        if self.sample_count == 0:
            return np.eye(self.num_layers)
        return self.iou_sum / self.sample_count

    def merge(self, other: "MiouMatrix") -> "MiouMatrix":
        """Sum two matrices over the same layer count"""
        if other.num_layers != self.num_layers:
            raise ShapeError(f"cannot merge mIoU over {self.num_layers} and "
                             f"{other.num_layers} layers")
        return MiouMatrix(iou_sum=self.iou_sum + other.iou_sum,
                          sample_count=self.sample_count + other.sample_count)

    def to_frame(self) -> pd.DataFrame:
        """L x L grid with layer labels"""
        layers = list(range(self.num_layers))
        return pd.DataFrame(self.values, index=pd.Index(layers, name="layer"),
                            columns=layers)

    def to_dict(self) -> dict[str, any]:
        """Serializable content"""
        return {"num_layers": self.num_layers,
                "sample_count": self.sample_count,
                "values": self.values.tolist()}


def _common_layers(corpus: list[AttentionMaps], num_layers: int | None) -> int:
    """Layer count shared by every sample of a corpus"""
    counts = {maps.num_layers for maps in corpus}
    if len(counts) > 1:
        raise ShapeError(f"corpus mixes layer counts {sorted(counts)}")
    if counts:
        found = counts.pop()
        if num_layers is not None and num_layers != found:
            raise ShapeError(f"corpus has {found} layers, expected "
                             f"{num_layers}")
        return found
    return num_layers or 0


def sample_shifts(maps: AttentionMaps, fraction: float = 0.1) -> ShiftHistogram:
    """Shift points of the top vision tokens of one sample

    :param maps: Attention of the sample,
    :param fraction: Share of vision tokens to analyze,
    :return: The histogram of the sample
    """
    ids, received = received_attention(maps)
    columns = np.searchsorted(ids, top_vision_tokens(maps, fraction))
    counts = np.zeros(maps.num_layers, dtype=np.int64)
    for column in columns:
        curve = cumulative_curve(received[:, column], int(ids[column]))
        counts[detect_change_point(curve.cumulative,
                                   curve.token_id).breakpoint] += 1
    return ShiftHistogram(counts=counts, sample_count=1,
                          token_count=len(columns))


def shift_histogram(corpus: list[AttentionMaps],
                    fraction: float = 0.1,
                    n_jobs: int = 1,
                    num_layers: int | None = None
                    ) -> ShiftHistogram:
    """Distribution of attention shift points over a corpus

    :param corpus: Attention maps sharing one layer count,
    :param fraction: Share of vision tokens analyzed per sample,
    :param n_jobs: joblib workers,
    :param num_layers: Expected layer count, sizes the empty histogram,
    :return: The merged histogram
    """
    fraction = ensure_fraction(fraction, "vision fraction")
    layers = _common_layers(corpus, num_layers)
    total = ShiftHistogram(counts=np.zeros(layers, dtype=np.int64))
    parts = Parallel(n_jobs=n_jobs)(
        delayed(sample_shifts)(maps, fraction) for maps in corpus)
    for part in parts:
        total = total.merge(part)
    return total


def sample_iou(maps: AttentionMaps, fraction: float = 0.2) -> np.ndarray:
    """Layer-pair IoU of the key text token sets of one sample

    :param maps: Attention of the sample,
    :param fraction: Share of text tokens selected per layer,
    :return: L x L IoU values
    """
    if maps.text_count < 1:
        raise ShapeError(f"{maps.sample_id}: no text tokens")
    members = np.zeros((maps.num_layers, maps.text_count), dtype=np.int64)
    for row, attention in enumerate(maps.per_layer):
        members[row, key_text_tokens(attention.t2t, fraction)] = 1
    inter = members @ members.T
    sizes = members.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    return inter / union


def miou_matrix(corpus: list[AttentionMaps],
                fraction: float = 0.2,
                n_jobs: int = 1,
                num_layers: int | None = None
                ) -> MiouMatrix:
    """Mean IoU of key text tokens between every pair of layers

    :param corpus: Attention maps sharing one layer count,
    :param fraction: Share of text tokens selected per layer,
    :param n_jobs: joblib workers,
    :param num_layers: Expected layer count, sizes the empty matrix,
    :return: The merged matrix
    """
    fraction = ensure_fraction(fraction, "text fraction")
    layers = _common_layers(corpus, num_layers)
    total = MiouMatrix(iou_sum=np.zeros((layers, layers)))
    parts = Parallel(n_jobs=n_jobs)(
        delayed(sample_iou)(maps, fraction) for maps in corpus)
    for part in parts:
        total = total.merge(MiouMatrix(iou_sum=part, sample_count=1))
    return total
