"""Package implementing the dense float64 kernel"""
from .kernel import Matrix
from .kernel import Vector
from .kernel import SeededRng
from .kernel import as_matrix
from .kernel import as_vector
from .kernel import causal_mask
from .kernel import column_sums
from .kernel import derive_seed
from .kernel import matvec_left
from .kernel import softmax_rows

export = [SeededRng, softmax_rows, matvec_left, column_sums]

__all__ = [
    "Matrix",
    "Vector",
    "SeededRng",
    "as_matrix",
    "as_vector",
    "causal_mask",
    "column_sums",
    "derive_seed",
    "matvec_left",
    "softmax_rows"
]
