"""Text-guided ranking of vision tokens

Step I computes the text prior from the text-to-text attention, step II
reweights the text-to-vision attention with it, step III keeps the top-k
vision tokens.
"""
from dataclasses import dataclass

import numpy as np

from vistrim.errors import ScheduleError
from vistrim.errors import ShapeError
from vistrim.linalg import SeededRng
from vistrim.linalg import as_matrix
from vistrim.linalg import column_sums
from vistrim.linalg import derive_seed
from vistrim.linalg import matvec_left
from vistrim.model import AttentionMaps
from vistrim.model import LayerAttention
from vistrim.model import PrefillHook
from vistrim.model import TokenSequence

from .schedule import PruneSchedule

SCORERS = ("adaptive", "uniform", "random")


@dataclass(frozen=True, eq=False)
class TextPrior:
    """Importance weights of the text tokens at one layer"""
    layer_index: int
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class VisionScores:
    """Prior-weighted attention received by every alive vision token"""
    layer_index: int
    scores: np.ndarray
    origin_indices: np.ndarray


@dataclass(frozen=True, eq=False)
class RetainedSet:
    """Original positions of the vision tokens kept after a layer"""
    layer_index: int
    kept: np.ndarray


def top_k_indices(values, k: int) -> np.ndarray:
    """Positions of the k largest values

    Ties go to the smaller position.

    :param values: 1-D scores,
    :param k: Number of positions to return,
    :return: The positions, best first
    """
    values = np.asarray(values, dtype=np.float64)
    if k < 0 or k > values.shape[0]:
        raise ShapeError(f"k={k} outside [0, {values.shape[0]}]")
    order = np.argsort(-values, kind="stable")
    return order[:k]


def text_prior(t2t, layer_index: int = 0) -> TextPrior:
    """Attention received by every text token from the text queries

    :param t2t: Causally masked text-to-text block,
    :param layer_index: Layer of the block,
    :return: The prior, w = column sums of t2t
    """
    t2t = as_matrix(t2t, "t2t")
    if t2t.size == 0:
        raise ShapeError("empty text block")
    if t2t.shape[0] != t2t.shape[1]:
        raise ShapeError(f"t2t must be square, got {t2t.shape}")
    return TextPrior(layer_index=layer_index, weights=column_sums(t2t))


def score_vision(prior: TextPrior,
                 t2v,
                 origin_indices=None
                 ) -> VisionScores:
    """Reweight the text-to-vision attention with the text prior

    :param prior: Text prior of the layer,
    :param t2v: T x V text-to-vision block,
    :param origin_indices: Original positions of the t2v columns,
    :return: Scores s = w^T t2v
    """
    t2v = as_matrix(t2v, "t2v")
    if origin_indices is None:
        origin_indices = np.arange(t2v.shape[1], dtype=np.int64)
    origin_indices = np.asarray(origin_indices, dtype=np.int64)
    if origin_indices.shape != (t2v.shape[1],):
        raise ShapeError("one origin index per t2v column is required")
    return VisionScores(layer_index=prior.layer_index,
                        scores=matvec_left(prior.weights, t2v),
                        origin_indices=origin_indices)


def top_k_retain(scores: VisionScores, k: int) -> RetainedSet:
    """Keep the k best scored vision tokens

    :param scores: Vision scores,
    :param k: Number of tokens to keep,
    :return: The kept original positions, sorted ascending
    """
    if k > scores.scores.shape[0]:
        raise ShapeError(f"cannot keep {k} of {scores.scores.shape[0]} "
                         f"vision tokens")
    best = top_k_indices(scores.scores, k)
    return RetainedSet(layer_index=scores.layer_index,
                       kept=np.sort(scores.origin_indices[best]))


def make_hook(schedule: PruneSchedule,
              scorer: str = "adaptive",
              seed: int = 0
              ) -> PrefillHook:
    """Build the prefill hook applying a schedule

    :param schedule: Pruning schedule,
    :param scorer: adaptive (text prior), uniform (unweighted voting) or
                   random retention,
    :param seed: Seed of the random scorer; each layer uses its own
                 derived stream,
    :return: The hook
    """
    if scorer not in SCORERS:
        raise ScheduleError(f"unknown scorer {scorer}, expected one of "
                            f"{SCORERS}")
    keep = dict(schedule.stages)

    def hook(attention: LayerAttention) -> np.ndarray | None:
        k = keep.get(attention.layer_index)
        if k is None:
            return None
        if k > attention.vision_count:
            raise ShapeError(f"layer {attention.layer_index}: cannot keep {k}"
                             f" of {attention.vision_count} vision tokens")
        if scorer == "random":
            rng = SeededRng(derive_seed(seed, attention.layer_index))
            return rng.choice(attention.vision_count, k)
        if scorer == "uniform":
            prior = TextPrior(attention.layer_index,
                              np.ones(attention.text_count))
        else:
            prior = text_prior(attention.t2t, attention.layer_index)
        scores = score_vision(prior, attention.t2v, attention.vision_ids)
        retained = top_k_retain(scores, k)
        return np.flatnonzero(np.isin(attention.vision_ids, retained.kept))

    return hook


def retained_sets(maps: AttentionMaps,
                  schedule: PruneSchedule,
                  final_seq: TokenSequence
                  ) -> list[RetainedSet]:
    """Kept vision positions of every stage of a pruned run

    :param maps: Attention recorded by the pruned prefill,
    :param schedule: Schedule used by the run,
    :param final_seq: Sequence returned by the prefill,
    :return: One retained set per stage
    """
    by_layer = {a.layer_index: a for a in maps.per_layer}
    out = []
    for layer, _ in schedule.stages:
        following = by_layer.get(layer + 1)
        kept = following.vision_ids if following is not None \
            else final_seq.vision_ids
        out.append(RetainedSet(layer_index=layer, kept=np.array(kept)))
    return out


def replay_schedule(maps: AttentionMaps,
                    schedule: PruneSchedule,
                    scorer: str = "adaptive",
                    seed: int = 0
                    ) -> list[RetainedSet]:
    """Apply a schedule to attention recorded without pruning

    At every stage layer the recorded columns of the tokens still alive are
    ranked with the same hook a live prefill would use. Later layers of the
    recording are not recomputed, so this replays the selection only.

    :param maps: Recorded attention, typically an external dense trace,
    :param schedule: Pruning schedule,
    :param scorer: Scorer name, see make_hook,
    :param seed: Seed of the random scorer,
    :return: One retained set per stage
    """
    hook = make_hook(schedule, scorer, seed)
    by_layer = {a.layer_index: a for a in maps.per_layer}
    alive = maps.vision_ids
    out = []
    for layer, _ in schedule.stages:
        attention = by_layer.get(layer)
        if attention is None:
            raise ShapeError(f"{maps.sample_id}: no attention recorded at "
                             f"stage layer {layer}")
        if not np.all(np.isin(alive, attention.vision_ids)):
            raise ShapeError(f"{maps.sample_id}: layer {layer} misses "
                             f"columns of alive vision tokens")
        columns = np.searchsorted(attention.vision_ids, alive)
        alive_attention = LayerAttention(layer_index=layer,
                                         t2t=attention.t2t,
                                         t2v=attention.t2v[:, columns],
                                         vision_ids=alive)
        alive = alive[np.sort(np.asarray(hook(alive_attention)))]
        out.append(RetainedSet(layer_index=layer, kept=alive.copy()))
    return out
