"""Deterministic toy vision-language transformer

Each layer runs causal multi-head attention, a residual add, a two-layer
ReLU feed-forward network and a second residual add, without normalization
or biases. Attention maps are recorded averaged over heads.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from vistrim.errors import HookError
from vistrim.errors import NumericError
from vistrim.errors import ShapeError
from vistrim.linalg import SeededRng
from vistrim.linalg import as_matrix
from vistrim.linalg import causal_mask
from vistrim.linalg import softmax_rows
from vistrim.logger import logger

from .models import AttentionMaps
from .models import LayerAttention
from .models import ModelConfig
from .models import TokenSequence

PrefillHook = Callable[[LayerAttention], np.ndarray | list[int] | None]


@dataclass(frozen=True, eq=False)
class LayerWeights:
    """Weights of one transformer layer"""
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        """Weights in initialization order"""
        return self.wq, self.wk, self.wv, self.wo, self.w1, self.w2


class ToyVLM:
    """Immutable toy transformer

    :param config: Model dimensions,
    :param layers: Weights of every layer
    """

    def __init__(self, config: ModelConfig, layers: list[LayerWeights]):
        if len(layers) != config.num_layers:
            raise ShapeError(f"{len(layers)} layer weights for "
                             f"{config.num_layers} layers")
        self.__config = config
        self.__layers = tuple(layers)

    @property
    def config(self) -> ModelConfig:
        """Model dimensions"""
        return self.__config

    @property
    def layers(self) -> tuple[LayerWeights, ...]:
        """Per-layer weights"""
        return self.__layers

    def attention(self,
                  layer_index: int,
                  hidden: np.ndarray,
                  positions: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
        """Causal multi-head self-attention of one layer

        :param layer_index: Layer to run,
        :param hidden: n x d hidden states,
        :param positions: Absolute positions used for the causal mask,
        :return: The n x d attention output and the n x n head-averaged
                 post-softmax attention
        """
        weights = self.__layers[layer_index]
        n = hidden.shape[0]
        heads = self.__config.num_heads
        head_dim = self.__config.head_dim
        q = (hidden @ weights.wq).reshape(n, heads, head_dim)
        k = (hidden @ weights.wk).reshape(n, heads, head_dim)
        v = (hidden @ weights.wv).reshape(n, heads, head_dim)
        mask = causal_mask(n, positions)

        probs_sum = np.zeros((n, n))
        context = np.empty((n, heads, head_dim))
        for head in range(heads):
            logits = q[:, head, :] @ k[:, head, :].T / np.sqrt(head_dim)
            probs = softmax_rows(logits, mask)
            probs_sum += probs
            context[:, head, :] = probs @ v[:, head, :]
        output = context.reshape(n, heads * head_dim) @ weights.wo
        return output, probs_sum / heads

    def feed_forward(self, layer_index: int, hidden: np.ndarray) -> np.ndarray:
        """Two-layer ReLU feed-forward network of one layer"""
        weights = self.__layers[layer_index]
        return np.maximum(hidden @ weights.w1, 0.0) @ weights.w2


def init_model(config: ModelConfig) -> ToyVLM:
    """Initialize the weights of a toy model

    Weights are drawn from ``SeededRng(config.seed)`` layer after layer, in
    the order wq, wk, wv, wo, w1, w2, as standard normals scaled by
    1/sqrt(fan_in). Output projections wo and w2 are further scaled by
    1/sqrt(2 L) to keep the residual stream bounded.

    :param config: Model dimensions and seed,
    :return: The model
    """
    rng = SeededRng(config.seed)
    d = config.hidden_dim
    m = config.ffn_dim
    residual = 1.0 / np.sqrt(2.0 * config.num_layers)
    layers = []
    for _ in range(config.num_layers):
        wq = rng.normal((d, d), 1.0 / np.sqrt(d))
        wk = rng.normal((d, d), 1.0 / np.sqrt(d))
        wv = rng.normal((d, d), 1.0 / np.sqrt(d))
        wo = rng.normal((d, d), residual / np.sqrt(d))
        w1 = rng.normal((d, m), 1.0 / np.sqrt(d))
        w2 = rng.normal((m, d), residual / np.sqrt(m))
        layers.append(LayerWeights(wq=wq, wk=wk, wv=wv, wo=wo, w1=w1, w2=w2))
    logger().debug(f"initialized toy model {config.to_dict()}")
    return ToyVLM(config, layers)


def extract_blocks(full_attention,
                   vision_count: int,
                   text_count: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Slice the text-query blocks out of a full attention matrix

    :param full_attention: (V+T) x (V+T) attention, vision tokens first,
    :param vision_count: Number of vision tokens V,
    :param text_count: Number of text tokens T,
    :return: The T x T text-to-text and T x V text-to-vision blocks
    """
    full = as_matrix(full_attention, "attention")
    n = vision_count + text_count
    if full.shape != (n, n):
        raise ShapeError(f"attention of shape {full.shape} for V={vision_count}"
                         f" and T={text_count}")
    text_rows = full[vision_count:n]
    return text_rows[:, vision_count:n].copy(), text_rows[:, :vision_count].copy()


def _validated_keep(keep, vision_count: int, layer_index: int) -> np.ndarray:
    """Check the index set returned by a hook

    :param keep: Local vision indices to keep,
    :param vision_count: Number of vision tokens alive,
    :param layer_index: Layer that produced the hook call,
    :return: The sorted indices
    """
    keep = np.asarray(keep)
    if keep.size == 0:
        return np.zeros(0, dtype=np.int64)
    if keep.ndim != 1 or not np.issubdtype(keep.dtype, np.integer):
        raise HookError(f"layer {layer_index}: hook must return a 1-D "
                        f"integer index set")
    if keep.min() < 0 or keep.max() >= vision_count:
        raise HookError(f"layer {layer_index}: index out of range "
                        f"[0, {vision_count})")
    if np.unique(keep).size != keep.size:
        raise HookError(f"layer {layer_index}: duplicated indices")
    return np.sort(keep).astype(np.int64)


def prefill(model: ToyVLM,
            seq: TokenSequence,
            hook: PrefillHook | None = None,
            sample_id: str = "sample"
            ) -> tuple[TokenSequence, AttentionMaps]:
    """Run the prefill pass, letting a hook drop vision tokens between layers

    :param model: Toy model,
    :param seq: Input sequence,
    :param hook: Called after every layer with its attention; returns the
                 local indices of the vision tokens to keep, or None to keep
                 them all,
    :param sample_id: Identifier recorded in the attention maps,
    :return: The final sequence and the per-layer attention maps
    """
    if seq.hidden.shape[1] != model.config.hidden_dim:
        raise ShapeError(f"hidden size {seq.hidden.shape[1]} != model "
                         f"{model.config.hidden_dim}")
    per_layer = []
    for layer_index in range(model.config.num_layers):
        hidden = seq.hidden
        attended, full = model.attention(layer_index, hidden, seq.position_ids)
        hidden = hidden + attended
        hidden = hidden + model.feed_forward(layer_index, hidden)
        if not np.all(np.isfinite(hidden)):
            raise NumericError(f"{sample_id}: non finite hidden states at "
                               f"layer {layer_index}")
        seq = TokenSequence(vision_count=seq.vision_count,
                            text_count=seq.text_count,
                            hidden=hidden,
                            position_ids=seq.position_ids)
        t2t, t2v = extract_blocks(full, seq.vision_count, seq.text_count)
        attention = LayerAttention(layer_index=layer_index, t2t=t2t, t2v=t2v,
                                   vision_ids=seq.vision_ids.copy())
        per_layer.append(attention)

        if hook is not None:
            keep = hook(attention)
            if keep is not None:
                keep = _validated_keep(keep, seq.vision_count, layer_index)
                if keep.size < seq.vision_count:
                    seq = seq.keep_vision(keep)
    return seq, AttentionMaps(sample_id=sample_id, per_layer=per_layer)
