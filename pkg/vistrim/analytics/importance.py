"""Token importance rankings read from attention maps"""
import math

import numpy as np

from vistrim.errors import ConfigError
from vistrim.errors import ShapeError
from vistrim.model import AttentionMaps
from vistrim.prune import text_prior
from vistrim.prune import top_k_indices


def ensure_fraction(fraction: float, name: str = "fraction") -> float:
    """Check a selection fraction lies in (0, 1]"""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"{name} must be in (0, 1], got {fraction}")
    return float(fraction)


def received_attention(maps: AttentionMaps) -> tuple[np.ndarray, np.ndarray]:
    """Attention every vision token receives from all text queries

    A token pruned before a layer receives 0 at that layer.

    :param maps: Attention of one sample,
    :return: The sorted vision positions and an L x V0 matrix of received
             attention, one row per layer
    """
    if not maps.per_layer:
        raise ShapeError(f"{maps.sample_id}: empty attention maps")
    ids = maps.vision_ids
    received = np.zeros((maps.num_layers, ids.shape[0]))
    for row, attention in enumerate(maps.per_layer):
        columns = np.searchsorted(ids, attention.vision_ids)
        received[row, columns] = attention.t2v.sum(axis=0)
    return ids, received


def top_vision_tokens(maps: AttentionMaps, fraction: float = 0.1) -> np.ndarray:
    """Vision tokens receiving the most text attention over the prefill

    :param maps: Attention of one sample,
    :param fraction: Share of the vision tokens to return,
    :return: ceil(fraction V) original positions, best first, ties to the
             smaller position
    """
    fraction = ensure_fraction(fraction, "vision fraction")
    ids, received = received_attention(maps)
    count = math.ceil(fraction * ids.shape[0])
    return ids[top_k_indices(received.sum(axis=0), count)]


def key_text_tokens(t2t, fraction: float = 0.2) -> np.ndarray:
    """Most attended text tokens of one layer

    :param t2t: Text-to-text block of the layer,
    :param fraction: Share of the text tokens to return,
    :return: ceil(fraction T) text indices, best first, ties to the smaller
             index
    """
    fraction = ensure_fraction(fraction, "text fraction")
    weights = text_prior(t2t).weights
    return top_k_indices(weights, math.ceil(fraction * weights.shape[0]))
