"""Input sequence generators for simulations"""
import math

import numpy as np

from vistrim.errors import ShapeError
from vistrim.linalg import SeededRng

from .models import TokenSequence
from .toy import ToyVLM


def random_sequence(hidden_dim: int,
                    vision_count: int,
                    text_count: int,
                    rng: SeededRng
                    ) -> TokenSequence:
    """Standard normal embeddings, vision tokens first

    Vision embeddings are drawn before text embeddings.

    :param hidden_dim: Embedding dimension,
    :param vision_count: Number of vision tokens,
    :param text_count: Number of text tokens,
    :param rng: Generator owned by the caller,
    :return: The sequence with positions 0..V+T-1
    """
    vision = rng.normal((vision_count, hidden_dim))
    text = rng.normal((text_count, hidden_dim))
    return TokenSequence(vision_count=vision_count,
                         text_count=text_count,
                         hidden=np.vstack([vision, text]),
                         position_ids=np.arange(vision_count + text_count))


def planted_count(vision_count: int, fraction: float) -> int:
    """Number of planted vision tokens for a fraction"""
    if not 0.0 < fraction <= 1.0:
        raise ShapeError(f"planted fraction must be in (0, 1]: {fraction}")
    return min(vision_count, math.ceil(fraction * vision_count))


def planted_sequence(model: ToyVLM,
                     vision_count: int,
                     text_count: int,
                     rng: SeededRng,
                     fraction: float = 0.1,
                     strength: float = 2.0,
                     layer: int = 1
                     ) -> tuple[TokenSequence, np.ndarray]:
    """Random sequence where a subset of vision tokens is text-correlated

    The planted vision tokens are shifted along the key-space direction that
    the mean text embedding queries at the given layer, ``Wk Wq^T x_text``,
    so text tokens attend to them more than to the other vision tokens.

    :param model: Model whose attention weights define the direction,
    :param vision_count: Number of vision tokens,
    :param text_count: Number of text tokens,
    :param rng: Generator owned by the caller,
    :param fraction: Share of vision tokens to plant,
    :param strength: Shift length in units of sqrt(d),
    :param layer: Layer whose query/key weights define the direction,
                  clipped to the last layer,
    :return: The sequence and the sorted planted vision positions
    """
    d = model.config.hidden_dim
    seq = random_sequence(d, vision_count, text_count, rng)
    count = planted_count(vision_count, fraction) if vision_count else 0
    planted = rng.choice(vision_count, count) if count else np.zeros(0, int)

    weights = model.layers[min(layer, model.config.num_layers - 1)]
    text_mean = seq.hidden[vision_count:].mean(axis=0)
    direction = weights.wk @ (weights.wq.T @ text_mean)
    norm = np.linalg.norm(direction)
    hidden = seq.hidden.copy()
    if norm > 0 and count:
        hidden[planted] += strength * np.sqrt(d) * direction / norm
    return TokenSequence(vision_count=vision_count,
                         text_count=text_count,
                         hidden=hidden,
                         position_ids=seq.position_ids), planted.astype(np.int64)
