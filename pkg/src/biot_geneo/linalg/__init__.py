"""Sparse and dense linear-algebra kernels."""

from ._backend import BACKEND, available_backends, get_kernels
from .cholesky import (
    CholeskyFactor,
    NotPositiveDefinite,
    incomplete_cholesky_zero_fill,
    sparse_cholesky_factor,
)
from .eig import dense_generalized_symmetric_eig
from .sparse import as_csr, from_triplets, identity, is_symmetric, spmv

__all__ = [
    "BACKEND",
    "CholeskyFactor",
    "NotPositiveDefinite",
    "as_csr",
    "available_backends",
    "dense_generalized_symmetric_eig",
    "from_triplets",
    "get_kernels",
    "identity",
    "incomplete_cholesky_zero_fill",
    "is_symmetric",
    "sparse_cholesky_factor",
    "spmv",
]
