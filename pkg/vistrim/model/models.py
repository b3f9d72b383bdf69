"""Data models of the toy vision-language transformer"""
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from vistrim.errors import ShapeError
from vistrim.linalg import as_matrix


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and seed of a toy model

    :param num_layers: Number of transformer layers (L),
    :param hidden_dim: Hidden state dimension (d),
    :param ffn_dim: Inner width of the feed-forward network (m),
    :param num_heads: Number of attention heads,
    :param seed: Seed of the weight initialization
    """
    num_layers: int = 4
    hidden_dim: int = 32
    ffn_dim: int = 64
    num_heads: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("num_layers", "hidden_dim", "ffn_dim", "num_heads"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1")
        if self.hidden_dim % self.num_heads != 0:
            raise ShapeError(f"hidden_dim {self.hidden_dim} is not divisible "
                             f"by num_heads {self.num_heads}")
        if self.seed < 0:
            raise ShapeError("seed must be non negative")

    @property
    def head_dim(self) -> int:
        """Dimension of one attention head"""
        return self.hidden_dim // self.num_heads

    def to_dict(self) -> dict[str, int]:
        """Serializable content"""
        return {"num_layers": self.num_layers,
                "hidden_dim": self.hidden_dim,
                "ffn_dim": self.ffn_dim,
                "num_heads": self.num_heads,
                "seed": self.seed}


@dataclass(frozen=True, eq=False)
class TokenSequence:
    """Hidden states of a [vision | text] sequence

    :param vision_count: Number of vision tokens still alive (V),
    :param text_count: Number of text tokens (T),
    :param hidden: (V + T) x d hidden states,
    :param position_ids: Original absolute positions, strictly increasing
    """
    vision_count: int
    text_count: int
    hidden: np.ndarray
    position_ids: np.ndarray

    def __post_init__(self):
        hidden = as_matrix(self.hidden, "hidden")
        positions = np.asarray(self.position_ids, dtype=np.int64)
        length = self.vision_count + self.text_count
        if self.vision_count < 0 or self.text_count < 1:
            raise ShapeError("a sequence needs V >= 0 and T >= 1")
        if hidden.shape[0] != length or positions.shape != (length,):
            raise ShapeError(f"expected {length} tokens, got hidden "
                             f"{hidden.shape} and positions {positions.shape}")
        if length > 1 and not np.all(np.diff(positions) > 0):
            raise ShapeError("position_ids must be strictly increasing")
        object.__setattr__(self, "hidden", hidden)
        object.__setattr__(self, "position_ids", positions)

    @property
    def length(self) -> int:
        """Current sequence length n = T + V"""
        return self.vision_count + self.text_count

    @property
    def vision_ids(self) -> np.ndarray:
        """Original positions of the alive vision tokens"""
        return self.position_ids[:self.vision_count]

    def keep_vision(self, keep: np.ndarray) -> "TokenSequence":
        """Drop every vision token not listed

        :param keep: Sorted local indices of the vision tokens to keep,
        :return: The reduced sequence, text tokens untouched
        """
        rows = np.concatenate([
            np.asarray(keep, dtype=np.int64),
            np.arange(self.vision_count, self.length, dtype=np.int64)])
        return TokenSequence(vision_count=len(keep),
                             text_count=self.text_count,
                             hidden=self.hidden[rows],
                             position_ids=self.position_ids[rows])


@dataclass(frozen=True, eq=False)
class LayerAttention:
    """Text-query attention blocks of one layer, averaged over heads

    :param layer_index: Index of the layer,
    :param t2t: T x T text-to-text block,
    :param t2v: T x V text-to-vision block,
    :param vision_ids: Original positions of the t2v columns
    """
    layer_index: int
    t2t: np.ndarray
    t2v: np.ndarray
    vision_ids: np.ndarray = None

    def __post_init__(self):
        t2t = as_matrix(self.t2t, "t2t")
        t2v = np.asarray(self.t2v, dtype=np.float64)
        if t2v.ndim == 1 and t2v.size == 0:
            t2v = t2v.reshape(t2t.shape[0], 0)
        t2v = as_matrix(t2v, "t2v")
        if t2t.shape[0] != t2t.shape[1]:
            raise ShapeError(f"t2t must be square, got {t2t.shape}")
        if t2v.shape[0] != t2t.shape[0]:
            raise ShapeError(f"t2v has {t2v.shape[0]} rows, "
                             f"t2t has {t2t.shape[0]}")
        if self.vision_ids is None:
            ids = np.arange(t2v.shape[1], dtype=np.int64)
        else:
            ids = np.asarray(self.vision_ids, dtype=np.int64)
        if ids.shape != (t2v.shape[1],):
            raise ShapeError(f"{ids.shape[0]} vision ids for "
                             f"{t2v.shape[1]} t2v columns")
        if np.any(np.diff(ids) <= 0):
            raise ShapeError(f"vision ids of layer {self.layer_index} must be "
                             f"unique and increasing, got {ids.tolist()}")
        object.__setattr__(self, "t2t", t2t)
        object.__setattr__(self, "t2v", t2v)
        object.__setattr__(self, "vision_ids", ids)

    @property
    def text_count(self) -> int:
        """Number of text tokens"""
        return self.t2t.shape[0]

    @property
    def vision_count(self) -> int:
        """Number of vision tokens alive at this layer"""
        return self.t2v.shape[1]


@dataclass(eq=False)
class AttentionMaps:
    """Per-layer attention of one sample

    :param sample_id: Identifier of the sample,
    :param per_layer: One LayerAttention per executed layer
    """
    sample_id: str
    per_layer: list[LayerAttention] = field(default_factory=list)

    def __post_init__(self):
        self.per_layer = sorted(self.per_layer, key=lambda a: a.layer_index)
        indices = [a.layer_index for a in self.per_layer]
        if len(set(indices)) != len(indices):
            raise ShapeError(f"duplicated layer indices in {self.sample_id}")
        if len({a.text_count for a in self.per_layer}) > 1:
            raise ShapeError(f"text count varies across layers in "
                             f"{self.sample_id}")

    @property
    def num_layers(self) -> int:
        """Number of recorded layers"""
        return len(self.per_layer)

    @property
    def text_count(self) -> int:
        """Number of text tokens"""
        if not self.per_layer:
            return 0
        return self.per_layer[0].text_count

    @property
    def vision_counts(self) -> list[int]:
        """Alive vision tokens per layer"""
        return [a.vision_count for a in self.per_layer]

    @property
    def vision_ids(self) -> np.ndarray:
        """Sorted union of the vision token positions seen in any layer"""
        if not self.per_layer:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([a.vision_ids
                                         for a in self.per_layer]))
