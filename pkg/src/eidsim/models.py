"""Physical scenarios: measurement states, composite Hamiltonians, spin baths, pointers.

Basis convention: the eigenstates |a_i>, |p_i> and the environment basis
|e_m> are the computational basis vectors of their factors, so the
correlated basis {|a_i>|p_i>} is a subset of the S (x) M computational basis.
Qubit |0> is the sigma_z = +1 state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import check_hermitian, check_keep
from .exceptions import DimensionMismatchError, DomainError, InvalidPartitionError, StructureError
from .linalg import (
    DEFAULT_GROUP_TOL,
    DensityOperator,
    Operator,
    PureState,
    bloch_state,
    embed,
    partial_trace,
    pauli,
    spectral,
    spectral_norm,
    tensor,
)

__all__ = [
    "MeasurementModel",
    "CompositeHamiltonian",
    "SpinBathHamiltonian",
    "PointerObservable",
    "CompositeSplit",
    "uniform_env_state",
    "bloch_env_state",
    "build_correlated_state",
    "build_collapsed_mixture",
    "correlated_basis",
    "build_spin_bath",
    "lift_pointer",
    "decompose_composite",
    "COMPOSITE_TOL",
]

COEFF_NORM_ATOL = 1e-12
COMPOSITE_TOL = 1e-10
# H_S, H_SM^int and H_SE^int are zero once the S-M correlation has formed
NULL_SYSTEM_TERMS = {"H_S": 0.0, "H_SM_int": 0.0, "H_SE_int": 0.0}


def uniform_env_state(env_dims: Sequence[int]) -> PureState:
    """Product of uniform superpositions, (|0>+|1>)/sqrt(2) for each qubit."""
    factors = [PureState(np.full(d, 1 / math.sqrt(d), dtype=np.complex128)) for d in env_dims]
    if not factors:
        return PureState(np.ones(1, dtype=np.complex128), ())
    return tensor(*factors)


def bloch_env_state(angles: Sequence[Sequence[float]]) -> PureState:
    """Product qubit-bath state from per-spin Bloch angles ``(theta, phi)``."""
    if len(angles) == 0:
        return PureState(np.ones(1, dtype=np.complex128), ())
    return tensor(*(bloch_state(float(th), float(ph)) for th, ph in angles))


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """System-pointer-environment setup after the S-M correlation stage.

    Factor order is ``(system, pointer, *env_dims)``.  ``env_state`` defaults
    to :func:`uniform_env_state`.
    """

    coefficients: np.ndarray
    system_dim: int = 2
    pointer_dim: int = 2
    env_dims: tuple[int, ...] = ()
    env_state: PureState | None = field(default=None)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.complex128).reshape(-1)
        if c.size == 0:
            raise DomainError("at least one coefficient is required")
        if c.size > min(self.system_dim, self.pointer_dim):
            raise DimensionMismatchError(
                f"{c.size} coefficients exceed min(system_dim, pointer_dim) = "
                f"{min(self.system_dim, self.pointer_dim)}"
            )
        norm = float(np.linalg.norm(c))
        if abs(norm - 1.0) > COEFF_NORM_ATOL:
            raise DomainError(f"coefficients must have unit norm, got {norm!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        env_dims = tuple(int(d) for d in self.env_dims)
        object.__setattr__(self, "env_dims", env_dims)
        env = self.env_state if self.env_state is not None else uniform_env_state(env_dims)
        if env.dim != math.prod(env_dims):
            raise DimensionMismatchError(
                f"environment state dimension {env.dim} does not match env_dims {env_dims}"
            )
        object.__setattr__(self, "env_state", PureState(env.amplitudes, env_dims))

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return (self.system_dim, self.pointer_dim) + self.env_dims

    @property
    def n_branches(self) -> int:
        return self.coefficients.size


def _correlated_sm_vector(m: MeasurementModel) -> np.ndarray:
    vec = np.zeros(m.system_dim * m.pointer_dim, dtype=np.complex128)
    for i, ci in enumerate(m.coefficients):
        vec[i * m.pointer_dim + i] = ci
    return vec


def build_correlated_state(m: MeasurementModel) -> PureState:
    """``sum_i c_i |a_i> (x) |p_i> (x) |e_0>``."""
    vec = np.kron(_correlated_sm_vector(m), m.env_state.amplitudes)
    return PureState(vec, m.factor_dims)


def build_collapsed_mixture(m: MeasurementModel) -> DensityOperator:
    """The collapsed S (x) M mixture ``sum_i |c_i|^2 |a_i p_i><a_i p_i|``."""
    d = m.system_dim * m.pointer_dim
    diag = np.zeros(d)
    for i, ci in enumerate(m.coefficients):
        diag[i * m.pointer_dim + i] = abs(ci) ** 2
    return DensityOperator(np.diag(diag).astype(np.complex128), (m.system_dim, m.pointer_dim))


def correlated_basis(m: MeasurementModel) -> np.ndarray:
    """Orthonormal basis of S (x) M as columns, correlated vectors |a_i p_i> first.

    The remaining columns complete the basis with the other computational
    basis vectors in index order.
    """
    d = m.system_dim * m.pointer_dim
    first = [i * m.pointer_dim + i for i in range(m.n_branches)]
    order = first + [k for k in range(d) if k not in first]
    return np.eye(d, dtype=np.complex128)[:, order]


class CompositeHamiltonian:
    """``H_ME = H_M (x) I_E + I_M (x) H_E + lam * H_int`` on the pointer-environment space.

    ``h_int`` is the unscaled interaction; ``lam`` multiplies it in the
    assembled total so a regime sweep changes one number.  The S-side terms
    are zero and recorded in ``metadata``.
    """

    def __init__(self, h_m: Operator, h_e: Operator, h_int: Operator, lam: float = 1.0,
                 metadata: dict | None = None):
        for name, op in (("H_M", h_m), ("H_E", h_e), ("H_int", h_int)):
            check_hermitian(op.entries, name)
        if h_int.dim != h_m.dim * h_e.dim:
            raise DimensionMismatchError(
                f"H_int dimension {h_int.dim} != dim(H_M) * dim(H_E) = {h_m.dim * h_e.dim}"
            )
        self._h_m = h_m
        self._h_e = h_e
        self._h_int = Operator(h_int.entries, h_m.factor_dims + h_e.factor_dims)
        self.lam = float(lam)
        self.metadata = dict(NULL_SYSTEM_TERMS, **(metadata or {}))

    @property
    def pointer_dims(self) -> tuple[int, ...]:
        return self.h_m.factor_dims

    @property
    def env_dims(self) -> tuple[int, ...]:
        return self.h_e.factor_dims

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return self.pointer_dims + self.env_dims

    @property
    def dim(self) -> int:
        return math.prod(self.factor_dims)

    @property
    def h_m(self) -> Operator:
        return self._h_m

    @property
    def h_e(self) -> Operator:
        return self._h_e

    @property
    def h_int(self) -> Operator:
        return self._h_int

    def _lift_m(self, op: Operator) -> Operator:
        env_dim = math.prod(self.env_dims)
        return Operator(np.kron(op.entries, np.eye(env_dim)), self.factor_dims)

    def _lift_e(self, op: Operator) -> Operator:
        m_dim = math.prod(self.pointer_dims)
        return Operator(np.kron(np.eye(m_dim), op.entries), self.factor_dims)

    @cached_property
    def self_part(self) -> Operator:
        """``H_M (x) I_E``."""
        return self._lift_m(self.h_m)

    @cached_property
    def env_part(self) -> Operator:
        """``I_M (x) H_E``."""
        return self._lift_e(self.h_e)

    @cached_property
    def total(self) -> Operator:
        return self.self_part + self.env_part + self.lam * self.h_int

    @cached_property
    def reduced(self) -> Operator:
        """The generator without the environment self-term: ``H_M (x) I_E + lam * H_int``."""
        return self.self_part + self.lam * self.h_int

    def self_norm(self) -> float:
        """Spectral norm of ``H_M (x) I_E`` (equal to that of ``H_M``)."""
        return spectral_norm(self.h_m)

    def interaction_norm(self) -> float:
        """Spectral norm of the scaled interaction ``lam * H_int``."""
        return abs(self.lam) * spectral_norm(self.h_int)

    def diagonal_energies(self, atol: float = 1e-12) -> np.ndarray:
        """Diagonal of the total Hamiltonian if it is diagonal in the product basis.

        Raises :class:`StructureError` otherwise.
        """
        mat = self.total.entries
        off = mat - np.diag(np.diag(mat))
        scale = max(1.0, float(np.max(np.abs(mat))))
        if off.size and float(np.max(np.abs(off))) > atol * scale:
            raise StructureError("Hamiltonian is not diagonal in the computational product basis")
        return np.diag(mat).real.copy()

    def with_scale(self, lam: float) -> "CompositeHamiltonian":
        return CompositeHamiltonian(self.h_m, self.h_e, self.h_int, lam, self.metadata)

    def without_self(self) -> "CompositeHamiltonian":
        """Same environment and interaction with ``H_M`` set to zero."""
        zero = Operator(np.zeros_like(self.h_m.entries), self.pointer_dims)
        return CompositeHamiltonian(zero, self.h_e, self.h_int, self.lam, self.metadata)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(factor_dims={self.factor_dims}, lam={self.lam})"


def _zsum(weights: np.ndarray) -> np.ndarray:
    """``sum_k w_k z_k`` over all sigma_z configurations, first spin most significant."""
    out = np.zeros(1)
    for w in weights:
        out = (out[:, None] + w * np.array([1.0, -1.0])[None, :]).ravel()
    return out


class SpinBathHamiltonian(CompositeHamiltonian):
    """Pointer qubit coupled to ``n_env`` bath spins through ``sigma_z (x) sigma_z``.

    ``H_M = (delta/2) sigma_axis``, ``H_E = sum_k (omega_k/2) sigma_z^(k)``,
    ``H_int = sum_k g_k sigma_z^(M) sigma_z^(k)``.  Dense parts are built
    lazily; the diagonal (pure-dephasing) data is available without them.
    """

    def __init__(self, couplings, env_energies, pointer_energy: float = 0.0,
                 pointer_axis: str = "z", lam: float = 1.0, metadata: dict | None = None):
        g = np.asarray(couplings, dtype=float).reshape(-1)
        w = np.asarray(env_energies, dtype=float).reshape(-1)
        if g.size != w.size:
            raise DimensionMismatchError(
                f"{g.size} couplings but {w.size} environment energies"
            )
        if pointer_axis not in ("x", "z"):
            raise ValueError(f"pointer_axis must be 'x' or 'z', got {pointer_axis!r}")
        g.setflags(write=False)
        w.setflags(write=False)
        self.couplings = g
        self.env_energies = w
        self.pointer_energy = float(pointer_energy)
        self.pointer_axis = pointer_axis
        self.lam = float(lam)
        self.metadata = dict(NULL_SYSTEM_TERMS, model="spin_bath", **(metadata or {}))

    @property
    def n_env(self) -> int:
        return self.couplings.size

    @property
    def pointer_dims(self) -> tuple[int, ...]:
        return (2,)

    @property
    def env_dims(self) -> tuple[int, ...]:
        return (2,) * self.n_env

    @cached_property
    def h_m(self) -> Operator:
        return 0.5 * self.pointer_energy * pauli(self.pointer_axis)

    @cached_property
    def h_e(self) -> Operator:
        return Operator(np.diag(self.env_diagonal()).astype(np.complex128), self.env_dims)

    @cached_property
    def h_int(self) -> Operator:
        return Operator(np.diag(self.interaction_diagonal()).astype(np.complex128), self.factor_dims)

    def env_diagonal(self) -> np.ndarray:
        return _zsum(0.5 * self.env_energies)

    def interaction_diagonal(self) -> np.ndarray:
        """Unscaled diagonal of ``H_int`` (pointer factor most significant)."""
        coupling = _zsum(self.couplings)
        return np.concatenate([coupling, -coupling])

    @property
    def is_pure_dephasing(self) -> bool:
        return self.pointer_axis == "z" or self.pointer_energy == 0.0

    def diagonal_energies(self, atol: float = 1e-12) -> np.ndarray:
        if not self.is_pure_dephasing:
            raise StructureError(
                "spin bath with a sigma_x pointer self-Hamiltonian is not pure dephasing"
            )
        env = self.env_diagonal()
        pointer = 0.5 * self.pointer_energy if self.pointer_axis == "z" else 0.0
        m_part = np.repeat([pointer, -pointer], env.size)
        return m_part + np.tile(env, 2) + self.lam * self.interaction_diagonal()

    def self_norm(self) -> float:
        return 0.5 * abs(self.pointer_energy)

    def interaction_norm(self) -> float:
        return abs(self.lam) * float(np.sum(np.abs(self.couplings)))

    def with_scale(self, lam: float) -> "SpinBathHamiltonian":
        return SpinBathHamiltonian(self.couplings, self.env_energies, self.pointer_energy,
                                   self.pointer_axis, lam)

    def without_self(self) -> "SpinBathHamiltonian":
        return SpinBathHamiltonian(self.couplings, self.env_energies, 0.0, self.pointer_axis,
                                   self.lam)


def build_spin_bath(n_env: int, couplings, env_energies, pointer_energy: float = 0.0,
                    pointer_axis: str = "z", interaction_scale: float = 1.0) -> SpinBathHamiltonian:
    """Spin-bath composite Hamiltonian with the pointer qubit as factor 0."""
    if n_env < 0:
        raise ValueError(f"n_env must be non-negative, got {n_env}")
    g = np.asarray(couplings, dtype=float).reshape(-1)
    w = np.asarray(env_energies, dtype=float).reshape(-1)
    if g.size != n_env or w.size != n_env:
        raise DimensionMismatchError(
            f"expected {n_env} couplings and energies, got {g.size} and {w.size}"
        )
    return SpinBathHamiltonian(g, w, pointer_energy, pointer_axis, interaction_scale)


@dataclass(frozen=True, eq=False)
class PointerObservable:
    """Coarse-grained pointer ``P = sum_n p_n P_n``.

    Stored as the local pointer (eigenvalues and eigenspace bases on
    ``local_dims``) tensored with the identity on ``env_dims``; the full
    projectors are materialized on demand.
    """

    eigenvalues: np.ndarray
    local_vectors: tuple[np.ndarray, ...]
    local_dims: tuple[int, ...]
    env_dims: tuple[int, ...] = ()

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        if ev.size != len(self.local_vectors):
            raise DimensionMismatchError("one eigenspace basis per eigenvalue is required")
        if np.unique(ev).size != ev.size:
            raise DomainError("pointer eigenvalues must be pairwise distinct")
        total = sum(v.shape[1] for v in self.local_vectors)
        if total != math.prod(self.local_dims):
            raise DimensionMismatchError("eigenspaces do not span the local space")
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "env_dims", tuple(int(d) for d in self.env_dims))

    @classmethod
    def from_operator(cls, op: Operator, group_tol: float = DEFAULT_GROUP_TOL) -> "PointerObservable":
        dec = spectral(op, group_tol)
        return cls(dec.eigenvalues, dec.vectors, op.factor_dims)

    @property
    def N(self) -> int:
        """Number of distinct eigenvalues."""
        return self.eigenvalues.size

    @property
    def K(self) -> int:
        """Dimension of the space the pointer acts on."""
        return math.prod(self.factor_dims)

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return self.local_dims + self.env_dims

    @property
    def env_dim(self) -> int:
        return math.prod(self.env_dims)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(v.shape[1] * self.env_dim for v in self.local_vectors)

    @property
    def local(self) -> Operator:
        """The pointer restricted to ``local_dims``."""
        mat = sum(p * (v @ v.conj().T) for p, v in zip(self.eigenvalues, self.local_vectors))
        return Operator(mat, self.local_dims)

    @property
    def operator(self) -> Operator:
        return Operator(np.kron(self.local.entries, np.eye(self.env_dim)), self.factor_dims)

    def projector(self, n: int) -> np.ndarray:
        v = self.local_vectors[n]
        return np.kron(v @ v.conj().T, np.eye(self.env_dim))

    @property
    def projectors(self) -> list[np.ndarray]:
        return [self.projector(n) for n in range(self.N)]


def lift_pointer(p_m: PointerObservable, env_dims: Sequence[int]) -> PointerObservable:
    """``P = P_M (x) I_E``: same eigenvalues, eigenprojector ranks times dim(H_E)."""
    return PointerObservable(p_m.eigenvalues, p_m.local_vectors, p_m.local_dims,
                             p_m.env_dims + tuple(int(d) for d in env_dims))


class CompositeSplit(NamedTuple):
    h1: Operator
    h2: Operator
    h_int: Operator
    residual_norm: float
    is_composite: bool


def decompose_composite(h: Operator, cut: Sequence[int]) -> CompositeSplit:
    """Split ``H = H1 (x) I + I (x) H2 + H_int`` across a factor bipartition.

    ``cut`` lists the factor indices of part 1; part 2 is the rest, both in
    ascending factor order.  The split is the unique one with
    ``Tr_1 H_int = Tr_2 H_int = 0`` and ``Tr H2 = 0`` (the global trace goes
    to H1).  ``h_int`` is returned on the original factor ordering.
    """
    check_hermitian(h.entries, "h")
    try:
        part1 = check_keep(cut, h.n_factors)
    except InvalidPartitionError:
        raise InvalidPartitionError(
            f"cut {list(cut)} is not a bipartition of factor_dims {h.factor_dims}"
        ) from None
    part2 = tuple(i for i in range(h.n_factors) if i not in part1)
    d1 = math.prod(h.factor_dims[i] for i in part1)
    d2 = math.prod(h.factor_dims[i] for i in part2)
    h1 = partial_trace(h, part1).entries / d2
    h2 = partial_trace(h, part2).entries / d1
    h2 = h2 - (np.trace(h.entries) / (d1 * d2)) * np.eye(d2)
    op1 = Operator(h1, tuple(h.factor_dims[i] for i in part1))
    op2 = Operator(h2, tuple(h.factor_dims[i] for i in part2))
    local = embed(op1, part1, h.factor_dims) + embed(op2, part2, h.factor_dims)
    h_int = h - local
    residual = spectral_norm(h_int)
    return CompositeSplit(op1, op2, h_int, residual, residual <= COMPOSITE_TOL)
