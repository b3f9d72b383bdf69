import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from hypothesis.extra.numpy import arrays

from vistrim.errors import NumericError
from vistrim.errors import ShapeError
from vistrim.linalg import SeededRng
from vistrim.linalg import causal_mask
from vistrim.linalg import column_sums
from vistrim.linalg import derive_seed
from vistrim.linalg import matvec_left
from vistrim.linalg import softmax_rows

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


def test_softmax_single_element():
    assert np.array_equal(softmax_rows([[3.7]]), [[1.0]])


def test_softmax_zeros():
    assert np.allclose(softmax_rows(np.zeros((2, 2))), [[0.5, 0.5],
                                                         [0.5, 0.5]])


def test_softmax_causal():
    out = softmax_rows(np.zeros((2, 2)), causal_mask(2))
    assert np.array_equal(out, [[1.0, 0.0], [0.5, 0.5]])


def test_softmax_rejects_empty_and_fully_masked():
    with pytest.raises(ShapeError):
        softmax_rows(np.zeros((0, 3)))
    with pytest.raises(ShapeError):
        softmax_rows(np.zeros((2, 2)), np.array([[True, False],
                                                 [False, False]]))


def test_softmax_rejects_nan():
    with pytest.raises(NumericError):
        softmax_rows([[0.0, np.nan]])


@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)),
              elements=finite))
def test_softmax_rows_sum_to_one(m):
    out = softmax_rows(m)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(out >= 0)


def test_causal_mask_with_positions():
    mask = causal_mask(3, np.array([0, 5, 9]))
    assert np.array_equal(mask, np.tril(np.ones((3, 3), dtype=bool)))


@pytest.mark.parametrize("w, m, expected", [
    ([1, 0], [[1.0, 2.0], [3.0, 4.0]], [1.0, 2.0]),
    ([1, 1], np.eye(2), [1.0, 1.0]),
    ([1, 2], [[0.2, 0.8], [0.5, 0.5]], [1.2, 1.8]),
])
def test_matvec_left_examples(w, m, expected):
    assert np.allclose(matvec_left(w, m), expected, rtol=0, atol=1e-15)


def test_matvec_left_shape_mismatch():
    with pytest.raises(ShapeError):
        matvec_left([1.0, 2.0, 3.0], np.eye(2))


@settings(max_examples=50)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 2 ** 32 - 1))
def test_matvec_left_matches_double_loop(rows, cols, seed):
    generator = np.random.default_rng(seed)
    w = generator.normal(size=rows)
    m = generator.normal(size=(rows, cols))
    expected = np.zeros(cols)
    for j in range(cols):
        for i in range(rows):
            expected[j] += w[i] * m[i, j]
    assert np.allclose(matvec_left(w, m), expected, rtol=1e-12, atol=1e-12)


def test_column_sums_examples():
    assert np.array_equal(column_sums(np.eye(3)), [1.0, 1.0, 1.0])
    assert np.array_equal(column_sums([[0.5, 0.5], [1.0, 0.0]]), [1.5, 0.5])
    with pytest.raises(ShapeError):
        column_sums(np.zeros((0, 0)))


def test_column_sums_of_row_stochastic(rng):
    m = softmax_rows(rng.normal(size=(9, 9)), causal_mask(9))
    assert abs(column_sums(m).sum() - 9) < 1e-9


def test_seeded_rng_streams_are_identical():
    first, second = SeededRng(42), SeededRng(42)
    assert first.raw(10_000).tobytes() == second.raw(10_000).tobytes()
    assert np.array_equal(first.normal((5, 3)), second.normal((5, 3)))


def test_seeded_rng_differs_by_seed():
    assert not np.array_equal(SeededRng(1).raw(16), SeededRng(2).raw(16))


@pytest.mark.parametrize("seed", [0, 9, 2**64 - 1])
def test_seeded_rng_raw_is_bare_philox(seed):
    expected = np.random.Philox(key=seed).random_raw(12)
    assert SeededRng(seed).raw(12).tobytes() == expected.tobytes()


def test_seeded_rng_choice_sorted_distinct():
    picked = SeededRng(3).choice(50, 20)
    assert np.array_equal(picked, np.unique(picked))
    assert picked.shape == (20,)
    assert picked.min() >= 0 and picked.max() < 50


def test_seeded_rng_rejects_invalid_seed():
    with pytest.raises(ValueError):
        SeededRng(-1)


def test_derive_seed_is_64_bit_and_distinct():
    seeds = {derive_seed(9, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2 ** 64 for s in seeds)
