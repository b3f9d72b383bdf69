"""Dense float64 kernel used by the toy model and the pruning engine

Matrices are 2-D ``numpy.ndarray`` and vectors 1-D ``numpy.ndarray`` of
float64, stored row-major.
"""
import numpy as np

from vistrim.errors import NumericError
from vistrim.errors import ShapeError

Matrix = np.ndarray
Vector = np.ndarray

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def as_matrix(m, name: str = "matrix") -> Matrix:
    """Convert to a finite float64 2-D array

    :param m: Array like content,
    :param name: Name used in error messages,
    :return: The validated matrix
    """
    out = np.asarray(m, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{name} contains non finite values")
    return out


def as_vector(v, name: str = "vector") -> Vector:
    """Convert to a finite float64 1-D array

    :param v: Array like content,
    :param name: Name used in error messages,
    :return: The validated vector
    """
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{name} contains non finite values")
    return out


def causal_mask(n: int, positions: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask of allowed attention targets

    Entry [i, j] is True when query i may attend key j, that is when the
    key does not come after the query.

    :param n: Sequence length,
    :param positions: Optional absolute positions of the n tokens,
    :return: An n x n boolean array
    """
    if positions is None:
        return np.tril(np.ones((n, n), dtype=bool))
    positions = np.asarray(positions)
    return positions[None, :] <= positions[:, None]


def softmax_rows(m, mask: np.ndarray | None = None) -> Matrix:
    """Row-wise softmax with optional masking

    :param m: Logits,
    :param mask: Boolean array, True where the position is allowed,
    :return: Row-stochastic matrix, masked positions exactly 0
    """
    m = as_matrix(m, "logits")
    if m.size == 0:
        raise ShapeError("softmax of an empty matrix")
    if mask is None:
        logits = m
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != m.shape:
            raise ShapeError(f"mask shape {mask.shape} != logits {m.shape}")
        if not np.all(mask.any(axis=1)):
            row = int(np.flatnonzero(~mask.any(axis=1))[0])
            raise ShapeError(f"row {row} has no allowed position")
        logits = np.where(mask, m, -np.inf)
    shifted = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def matvec_left(w, m) -> Vector:
    """Left vector-matrix product ``w^T m``

    :param w: Vector of length m.rows,
    :param m: Matrix,
    :return: Vector of length m.cols
    """
    w = as_vector(w, "w")
    m = as_matrix(m)
    if w.shape[0] != m.shape[0]:
        raise ShapeError(
            f"vector of length {w.shape[0]} against {m.shape[0]} rows")
    return w @ m


def column_sums(m) -> Vector:
    """Sum every column over the rows

    :param m: Non empty matrix,
    :return: Vector of length m.cols
    """
    m = as_matrix(m)
    if m.size == 0:
        raise ShapeError("column sums of an empty matrix")
    return m.sum(axis=0)


def derive_seed(seed: int, index: int) -> int:
    """Derive the 64-bit seed of the index-th item of a seeded run

    :param seed: Run seed,
    :param index: Item index,
    :return: The item seed
    """
    return (seed * _GOLDEN + index) & _MASK64


class SeededRng:
    """Counter based pseudo random generator

    Wraps numpy's Philox4x64-10 bit generator keyed directly with the seed
    (no seed hashing). Owned by a single caller.

    Only ``raw`` returns the bare Philox4x64-10 output words, which any
    implementation of that algorithm keyed with the same 64-bit seed and a
    zero counter reproduces. ``normal``, ``uniform``, ``integers`` and
    ``choice`` go through numpy's ``Generator`` transforms (ziggurat for
    normals, rejection sampling for integers), so their values are only
    reproducible with numpy, across platforms and numpy releases that keep
    the ``Generator`` stream stable. Model weights and simulated samples
    use those draws.

    :param seed: 64-bit unsigned seed
    """

    def __init__(self, seed: int):
        if seed < 0 or seed > _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer: {seed}")
        self.__seed = int(seed)
        self.__generator = np.random.Generator(np.random.Philox(key=self.__seed))

    @property
    def seed(self) -> int:
        """Seed of the generator"""
        return self.__seed

    @property
    def counter(self) -> int:
        """Current Philox block counter"""
        state = self.__generator.bit_generator.state
        return int(state["state"]["counter"][0])

    def normal(self, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
        """Draw standard normal values

        :param shape: Output shape,
        :param scale: Standard deviation,
        :return: The float64 draws
        """
        return scale * self.__generator.standard_normal(shape)

    def uniform(self, shape: tuple[int, ...] | int) -> np.ndarray:
        """Draw values in [0, 1)"""
        return self.__generator.random(shape)

    def integers(self, low: int, high: int, size: int | None = None):
        """Draw integers in [low, high)"""
        return self.__generator.integers(low, high, size=size)

    def choice(self, population: int, count: int) -> np.ndarray:
        """Draw count distinct values in [0, population), sorted

        :param population: Size of the population,
        :param count: Number of values to draw,
        :return: The sorted draws
        """
        picked = self.__generator.choice(population, size=count, replace=False)
        return np.sort(picked)

    def raw(self, count: int) -> np.ndarray:
        """Draw raw Philox4x64-10 output words as 64-bit unsigned integers"""
        return self.__generator.bit_generator.random_raw(count)
