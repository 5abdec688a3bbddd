"""Input validation helpers shared by the public API."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionMismatchError, DomainError, InvalidPartitionError

HERMITIAN_ATOL = 1e-12


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.array(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {arr.shape}")
    return arr


def as_complex_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.array(v, dtype=np.complex128).reshape(-1)
    if arr.size == 0:
        raise DimensionMismatchError(f"{name} must be nonempty")
    return arr


def check_factor_dims(factor_dims: Sequence[int] | None, dim: int) -> tuple[int, ...]:
    """Normalize ``factor_dims`` and check that their product equals ``dim``."""
    if factor_dims is None:
        return (dim,)
    dims = tuple(int(d) for d in factor_dims)
    if any(d < 1 for d in dims):
        raise DimensionMismatchError(f"factor dimensions must be positive, got {dims}")
    if math.prod(dims) != dim:
        raise DimensionMismatchError(
            f"product of factor_dims {dims} is {math.prod(dims)}, expected {dim}"
        )
    return dims


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_hermitian(a: np.ndarray, name: str = "operator", atol: float = HERMITIAN_ATOL) -> None:
    """Raise :class:`DomainError` unless ``max|A - A^dagger| <= atol * max(1, max|A|)``."""
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    defect = hermiticity_defect(a)
    if defect > atol * scale:
        raise DomainError(f"{name} is not Hermitian (max |A - A^dagger| = {defect:.3e})")


def check_same_dim(a_dim: int, b_dim: int, what: str = "operands") -> None:
    if a_dim != b_dim:
        raise DimensionMismatchError(f"{what} have different dimensions: {a_dim} vs {b_dim}")


def check_keep(keep: Iterable[int], n_factors: int) -> tuple[int, ...]:
    """Return the sorted kept factor indices, rejecting empty or full sets."""
    kept = sorted({int(k) for k in keep})
    if any(k < 0 or k >= n_factors for k in kept):
        raise InvalidPartitionError(f"factor indices {kept} out of range for {n_factors} factors")
    if not kept or len(kept) == n_factors:
        raise InvalidPartitionError(
            f"keep must be a nonempty proper subset of {n_factors} factors, got {kept}"
        )
    return tuple(kept)


def check_orthonormal_columns(basis: np.ndarray, atol: float = 1e-10, name: str = "basis") -> None:
    gram = basis.conj().T @ basis
    dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    if dev > atol:
        raise DomainError(f"{name} is not orthonormal (Gram deviation {dev:.3e})")
