"""Dense complex linear algebra on tensor-factorized Hilbert spaces.

Every object here carries ``factor_dims``, the ordered tuple of tensor-factor
dimensions whose product is the Hilbert-space dimension.  Arrays are stored
read-only; operations return new objects.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._validation import (
    as_complex_matrix,
    as_complex_vector,
    check_factor_dims,
    check_hermitian,
    check_keep,
    check_same_dim,
    hermiticity_defect,
)
from .exceptions import DimensionMismatchError, DomainError

__all__ = [
    "Operator",
    "PureState",
    "DensityOperator",
    "SpectralDecomposition",
    "pauli",
    "identity",
    "basis_state",
    "bloch_state",
    "tensor",
    "embed",
    "partial_trace",
    "spectral",
    "eigh_hermitian",
    "evolve_unitary",
    "commutator_norm",
    "spectral_norm",
    "DEFAULT_GROUP_TOL",
]

DEFAULT_GROUP_TOL = 1e-9
PURE_NORM_ATOL = 1e-12
DENSITY_TRACE_ATOL = 1e-10
DENSITY_HERMITIAN_ATOL = 1e-12
DENSITY_PSD_ATOL = 1e-10


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Operator:
    """A square complex matrix on a tensor-factorized space."""

    entries: np.ndarray
    factor_dims: tuple[int, ...] = None  # type: ignore[assignment]

    # keep numpy scalars from broadcasting over the operator
    __array_ufunc__ = None

    def __post_init__(self):
        mat = as_complex_matrix(self.entries, "operator")
        object.__setattr__(self, "entries", _readonly(mat))
        object.__setattr__(self, "factor_dims", check_factor_dims(self.factor_dims, mat.shape[0]))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, self.factor_dims)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return hermiticity_defect(self.entries) <= atol

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            check_same_dim(self.dim, other.dim)
            return other.entries
        return NotImplemented

    def __add__(self, other):
        rhs = self._coerce(other)
        if rhs is NotImplemented:
            return NotImplemented
        return Operator(self.entries + rhs, self.factor_dims)

    def __sub__(self, other):
        rhs = self._coerce(other)
        if rhs is NotImplemented:
            return NotImplemented
        return Operator(self.entries - rhs, self.factor_dims)

    def __neg__(self):
        return Operator(-self.entries, self.factor_dims)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, complex, np.number)):
            return Operator(self.entries * scalar, self.factor_dims)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            check_same_dim(self.dim, other.dim)
            return Operator(self.entries @ other.entries, self.factor_dims)
        if isinstance(other, PureState):
            check_same_dim(self.dim, other.dim)
            return PureState(self.entries @ other.amplitudes, self.factor_dims, normalize=True)
        return NotImplemented

    def __repr__(self) -> str:
        return f"Operator(dim={self.dim}, factor_dims={self.factor_dims})"


@dataclass(frozen=True, eq=False)
class PureState:
    """A normalized state vector.

    ``normalize=True`` rescales the amplitudes instead of rejecting a
    non-unit norm.
    """

    amplitudes: np.ndarray
    factor_dims: tuple[int, ...] = None  # type: ignore[assignment]
    normalize: bool = field(default=False, repr=False)

    def __post_init__(self):
        vec = as_complex_vector(self.amplitudes, "amplitudes")
        norm = float(np.linalg.norm(vec))
        if self.normalize:
            if norm == 0.0:
                raise DomainError("cannot normalize the zero vector")
            vec = vec / norm
        elif abs(norm - 1.0) > PURE_NORM_ATOL:
            raise DomainError(f"state norm {norm!r} differs from 1 by more than {PURE_NORM_ATOL}")
        object.__setattr__(self, "amplitudes", _readonly(vec))
        object.__setattr__(self, "factor_dims", check_factor_dims(self.factor_dims, vec.size))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityOperator":
        psi = self.amplitudes
        return DensityOperator(np.outer(psi, psi.conj()), self.factor_dims, check=False)

    def overlap(self, other: "PureState") -> complex:
        """Return ``<self|other>``."""
        check_same_dim(self.dim, other.dim, "states")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self) -> str:
        return f"PureState(dim={self.dim}, factor_dims={self.factor_dims})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A unit-trace positive Hermitian matrix.

    The matrix is Hermitian-symmetrized on construction.  With ``check=True``
    the trace and positivity invariants are verified (the eigenvalue check
    costs a full diagonalization).
    """

    entries: np.ndarray
    factor_dims: tuple[int, ...] = None  # type: ignore[assignment]
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        mat = as_complex_matrix(self.entries, "density operator")
        if self.check:
            defect = hermiticity_defect(mat)
            if defect > DENSITY_HERMITIAN_ATOL:
                raise DomainError(f"density operator not Hermitian (defect {defect:.3e})")
        mat = 0.5 * (mat + mat.conj().T)
        if self.check:
            tr = float(np.trace(mat).real)
            if abs(tr - 1.0) > DENSITY_TRACE_ATOL:
                raise DomainError(f"density operator trace {tr!r} is not 1")
            lowest = float(np.linalg.eigvalsh(mat)[0])
            if lowest < -DENSITY_PSD_ATOL:
                raise DomainError(f"density operator has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, "entries", _readonly(mat))
        object.__setattr__(self, "factor_dims", check_factor_dims(self.factor_dims, mat.shape[0]))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def purity(self) -> float:
        # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        return float(np.sum(np.abs(self.entries) ** 2))

    def as_operator(self) -> Operator:
        return Operator(self.entries, self.factor_dims)

    def __repr__(self) -> str:
        return f"DensityOperator(dim={self.dim}, factor_dims={self.factor_dims})"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Grouped eigen-decomposition ``H = sum_k omega_k Pi_k``.

    ``vectors[k]`` holds an orthonormal basis (as columns) of the k-th
    eigenspace; projectors are formed on demand.
    """

    eigenvalues: np.ndarray
    vectors: tuple[np.ndarray, ...]
    group_tol: float
    factor_dims: tuple[int, ...]

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors[0].shape[0]

    def __len__(self) -> int:
        return len(self.vectors)

    def projector(self, k: int) -> np.ndarray:
        v = self.vectors[k]
        return v @ v.conj().T

    @property
    def projectors(self) -> list[np.ndarray]:
        return [self.projector(k) for k in range(len(self.vectors))]

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for w, v in zip(self.eigenvalues, self.vectors):
            out += w * (v @ v.conj().T)
        return out


# ---------------------------------------------------------------------------
# constructors

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "i": np.eye(2, dtype=np.complex128),
}


def pauli(axis: str) -> Operator:
    """Pauli matrix for ``axis`` in ``{"x", "y", "z", "i"}``."""
    try:
        return Operator(_PAULI[axis.lower()])
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def identity(factor_dims: int | Sequence[int]) -> Operator:
    dims = (int(factor_dims),) if np.isscalar(factor_dims) else tuple(factor_dims)
    return Operator(np.eye(math.prod(dims), dtype=np.complex128), dims)


def basis_state(index: int, dim: int) -> PureState:
    vec = np.zeros(dim, dtype=np.complex128)
    vec[index] = 1.0
    return PureState(vec)


def bloch_state(theta: float, phi: float = 0.0) -> PureState:
    """Qubit state ``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>``."""
    return PureState(np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)]))


# ---------------------------------------------------------------------------
# operations


def tensor(*parts):
    """Kronecker product of operators (or of pure states), left to right.

    The result's ``factor_dims`` is the concatenation of the inputs'.
    """
    if not parts:
        raise ValueError("tensor needs at least one argument")
    if all(isinstance(p, PureState) for p in parts):
        vec = np.ones(1, dtype=np.complex128)
        dims: tuple[int, ...] = ()
        for p in parts:
            vec = np.kron(vec, p.amplitudes)
            dims += p.factor_dims
        return PureState(vec, dims, normalize=True)
    if all(isinstance(p, Operator) for p in parts):
        mat = np.ones((1, 1), dtype=np.complex128)
        dims = ()
        for p in parts:
            mat = np.kron(mat, p.entries)
            dims += p.factor_dims
        return Operator(mat, dims)
    raise TypeError("tensor arguments must be all Operator or all PureState")


def embed(op: Operator | np.ndarray, positions: Sequence[int], factor_dims: Sequence[int]) -> Operator:
    """Lift ``op`` acting on the factors ``positions`` to the full space.

    Identity acts on every other factor.  ``op``'s own factor ordering must
    follow ``positions`` in the order given.
    """
    dims = tuple(int(d) for d in factor_dims)
    positions = [int(p) for p in positions]
    mat = op.entries if isinstance(op, Operator) else as_complex_matrix(op)
    local_dims = [dims[p] for p in positions]
    if math.prod(local_dims) != mat.shape[0]:
        raise DimensionMismatchError(
            f"operator dimension {mat.shape[0]} does not match factors {positions} of {dims}"
        )
    rest = [i for i in range(len(dims)) if i not in positions]
    rest_dim = math.prod(dims[i] for i in rest)
    full = np.kron(mat, np.eye(rest_dim, dtype=np.complex128))
    # full acts on factor order positions + rest; permute back to 0..n-1
    order = positions + rest
    if order == list(range(len(dims))):
        return Operator(full, dims)
    n = len(dims)
    tensor_dims = [dims[i] for i in order]
    t = full.reshape(tensor_dims + tensor_dims)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    return Operator(t.reshape(full.shape), dims)


def _ptrace_array(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    letters = string.ascii_letters
    if 2 * n > len(letters):
        raise DimensionMismatchError(f"too many tensor factors ({n}) for partial trace")
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    spec = "".join(rows) + "".join(cols) + "->" + "".join(out)
    kept_dim = math.prod(dims[i] for i in keep)
    return np.einsum(spec, mat.reshape(tuple(dims) * 2)).reshape(kept_dim, kept_dim)


def _reduce_pure(vec: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    rest = [i for i in range(n) if i not in keep]
    kept_dim = math.prod(dims[i] for i in keep)
    a = vec.reshape(dims).transpose(list(keep) + rest).reshape(kept_dim, -1)
    return a @ a.conj().T


def partial_trace(rho: DensityOperator | PureState | Operator, keep: Iterable[int]):
    """Trace out every factor not listed in ``keep`` (0-based indices).

    Accepts a density operator, a pure state (reduced without forming the
    full projector) or a general operator; the first two return a
    :class:`DensityOperator`, the last an :class:`Operator`.
    """
    dims = rho.factor_dims
    kept = check_keep(keep, len(dims))
    kept_dims = tuple(dims[i] for i in kept)
    if isinstance(rho, PureState):
        return DensityOperator(_reduce_pure(rho.amplitudes, dims, kept), kept_dims)
    if isinstance(rho, DensityOperator):
        return DensityOperator(_ptrace_array(rho.entries, dims, kept), kept_dims)
    return Operator(_ptrace_array(rho.entries, dims, kept), kept_dims)


def spectral_norm(a: Operator | np.ndarray) -> float:
    mat = a.entries if isinstance(a, Operator) else np.asarray(a)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def eigh_hermitian(h: Operator | np.ndarray, name: str = "h") -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    mat = h.entries if isinstance(h, Operator) else as_complex_matrix(h, name)
    check_hermitian(mat, name)
    return np.linalg.eigh(0.5 * (mat + mat.conj().T))


def spectral(h: Operator, group_tol: float = DEFAULT_GROUP_TOL) -> SpectralDecomposition:
    """Group the spectrum of Hermitian ``h`` into degenerate eigenspaces.

    Consecutive sorted eigenvalues closer than ``group_tol * max|eigenvalue|``
    are chained into one eigenspace, whose eigenvalue is the group mean.
    For the zero matrix everything forms a single eigenspace.
    """
    if group_tol < 0:
        raise ValueError("group_tol must be non-negative")
    w, v = eigh_hermitian(h)
    scale = float(np.max(np.abs(w)))
    threshold = group_tol * scale
    groups: list[list[int]] = [[0]]
    for i in range(1, w.size):
        if w[i] - w[i - 1] <= threshold:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigenvalues = np.array([w[g].mean() for g in groups])
    vectors = tuple(_readonly(np.ascontiguousarray(v[:, g])) for g in groups)
    return SpectralDecomposition(_readonly(eigenvalues), vectors, group_tol, h.factor_dims)


def evolve_unitary(h: Operator, t: float) -> Operator:
    """``U = exp(-i H t)`` through the eigen-decomposition of ``H`` (hbar = 1)."""
    w, v = eigh_hermitian(h)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Operator(u, h.factor_dims)


def commutator_norm(a: Operator, b: Operator) -> float:
    """Spectral norm of ``AB - BA``."""
    check_same_dim(a.dim, b.dim)
    x, y = a.entries, b.entries
    return spectral_norm(x @ y - y @ x)
