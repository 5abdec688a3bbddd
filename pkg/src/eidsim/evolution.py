"""Unitary evolution of the closed S+M+E system on a time grid.

A Hamiltonian given on the trailing factors of a state acts as the identity
on the leading ones, so ``H_ME`` evolves an ``S (x) M (x) E`` state directly
(``H_S = 0`` after the correlation stage).  Units are hbar = 1.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._validation import check_hermitian, check_keep, check_same_dim
from .exceptions import (
    DimensionMismatchError,
    DomainError,
    InvariantBreachError,
    ModelViolationError,
    StructureError,
)
from .linalg import DensityOperator, Operator, PureState, _reduce_pure, eigh_hermitian
from .models import CompositeHamiltonian

__all__ = [
    "TimeGrid",
    "Propagator",
    "StateTrajectory",
    "BranchSeries",
    "evolve",
    "branch_states",
    "reduced_state",
    "expectation",
    "DENSE_MAX_DIM",
    "FAST_MAX_DIM",
]

DENSE_MAX_DIM = 4096
FAST_MAX_DIM = 2**16
DIAGONAL_ATOL = 1e-12
BRANCH_MIXING_TOL = 1e-10
NORM_DRIFT_TOL = 1e-10
ENERGY_DRIFT_TOL = 1e-9
PATHS = ("dense", "dephasing_fast", "auto")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps`` intervals, i.e. ``n_steps + 1`` points."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, int(self.n_steps) + 1)

    def __len__(self) -> int:
        return int(self.n_steps) + 1


def _diagonal_of(h) -> np.ndarray:
    if isinstance(h, CompositeHamiltonian):
        return h.diagonal_energies(DIAGONAL_ATOL)
    mat = h.entries
    check_hermitian(mat, "h")
    off = mat - np.diag(np.diag(mat))
    scale = max(1.0, float(np.max(np.abs(mat))))
    if off.size and float(np.max(np.abs(off))) > DIAGONAL_ATOL * scale:
        raise StructureError("fast dephasing path needs a Hamiltonian diagonal in the product basis")
    return np.diag(mat).real.copy()


class Propagator:
    """Applies ``exp(-i H t)`` to batches of vectors on ``H``'s space.

    The dense path diagonalizes ``H`` once; the fast path multiplies by
    per-configuration phases ``exp(-i E_k t)`` without forming a matrix.
    Vectors are rows of a ``(m, dim)`` array.
    """

    def __init__(self, h: Operator | CompositeHamiltonian, path: str = "auto"):
        if path not in PATHS:
            raise ValueError(f"path must be one of {PATHS}, got {path!r}")
        self.generator = h
        self.factor_dims = h.factor_dims
        self.dim = math.prod(self.factor_dims)
        self._energies = None
        self._w = self._v = self._mat = None
        if path in ("dephasing_fast", "auto"):
            try:
                self._energies = _diagonal_of(h)
                path = "dephasing_fast"
            except StructureError:
                if path == "dephasing_fast":
                    raise
                path = "dense"
        if path == "dense":
            op = h.total if isinstance(h, CompositeHamiltonian) else h
            self._mat = op.entries
            self._w, self._v = eigh_hermitian(op)
        self.path = path

    def apply(self, vectors: np.ndarray, t: float) -> np.ndarray:
        if self.path == "dephasing_fast":
            return vectors * np.exp(-1j * self._energies * t)
        coeffs = vectors @ self._v.conj()
        return (coeffs * np.exp(-1j * self._w * t)) @ self._v.T

    def energy(self, vectors: np.ndarray) -> float:
        """``sum_rows <v|H|v>`` for the row vectors (identity on leading factors)."""
        if self.path == "dephasing_fast":
            return float(np.sum(np.abs(vectors) ** 2 * self._energies))
        hv = vectors @ self._mat.T
        return float(np.real(np.sum(vectors.conj() * hv)))


def _split_leading(psi0: PureState, h_dims: tuple[int, ...]) -> int:
    dims = psi0.factor_dims
    n = len(h_dims)
    if len(dims) >= n and tuple(dims[len(dims) - n:]) == tuple(h_dims):
        return math.prod(dims[: len(dims) - n])
    raise DimensionMismatchError(
        f"Hamiltonian factors {h_dims} are not the trailing factors of the state {dims}"
    )


class _LazyStates(Sequence):
    def __init__(self, traj: "StateTrajectory"):
        self._traj = traj

    def __len__(self) -> int:
        return len(self._traj)

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[k] for k in range(*j.indices(len(self)))]
        return PureState(self._traj.amplitudes(j), self._traj.factor_dims, normalize=True)


class StateTrajectory:
    """``|psi(t_j)> = exp(-i H t_j)|psi0>`` on a grid, evaluated on demand.

    Only the initial state and the propagator are stored, so large
    trajectories cost one state of memory per access.  ``states[j]`` gives
    a :class:`PureState`; :meth:`amplitudes` gives the raw vector.
    """

    def __init__(self, grid: TimeGrid, psi0: PureState, propagator: Propagator):
        self.grid = grid
        self.psi0 = psi0
        self.propagator = propagator
        self.leading_dim = _split_leading(psi0, propagator.factor_dims)
        self._rows = psi0.amplitudes.reshape(self.leading_dim, propagator.dim)
        self._times = grid.times

    @property
    def generator(self):
        return self.propagator.generator

    @property
    def path(self) -> str:
        return self.propagator.path

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return self.psi0.factor_dims

    @property
    def states(self) -> Sequence[PureState]:
        return _LazyStates(self)

    def __len__(self) -> int:
        return self._times.size

    def _rows_at(self, j: int) -> np.ndarray:
        return self.propagator.apply(self._rows, self._times[j])

    def amplitudes(self, j: int) -> np.ndarray:
        return self._rows_at(j).reshape(-1)

    def iter_amplitudes(self) -> Iterator[np.ndarray]:
        for j in range(len(self)):
            yield self.amplitudes(j)

    def norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(v) for v in self.iter_amplitudes()])

    def energies(self) -> np.ndarray:
        return np.array([self.propagator.energy(self._rows_at(j)) for j in range(len(self))])

    def invariant_drift(self) -> dict[str, float]:
        """Largest deviation of the norm from 1 and of the energy from its t=0 value."""
        norms = self.norms()
        energies = self.energies()
        return {
            "norm_drift": float(np.max(np.abs(norms - 1.0))),
            "energy_drift": float(np.max(np.abs(energies - energies[0]))),
        }

    def check_invariants(self, norm_tol: float = NORM_DRIFT_TOL,
                         energy_tol: float = ENERGY_DRIFT_TOL) -> dict[str, float]:
        drift = self.invariant_drift()
        if drift["norm_drift"] > norm_tol:
            raise InvariantBreachError(f"norm drift {drift['norm_drift']:.3e} exceeds {norm_tol}")
        if drift["energy_drift"] > energy_tol:
            raise InvariantBreachError(
                f"energy drift {drift['energy_drift']:.3e} exceeds {energy_tol}"
            )
        return drift


def evolve(h: Operator | CompositeHamiltonian, psi0: PureState, grid: TimeGrid,
           path: str = "auto") -> StateTrajectory:
    """Evolve ``psi0`` under ``h`` on ``grid``.

    ``path="dense"`` diagonalizes the Hamiltonian once and is limited to
    state dimension 4096; ``"dephasing_fast"`` requires a Hamiltonian that is
    diagonal in the computational product basis (raises
    :class:`StructureError` otherwise) and reaches dimension 2**16;
    ``"auto"`` picks the fast path whenever it applies.
    """
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}, got {path!r}")
    if psi0.dim > FAST_MAX_DIM:
        raise DimensionMismatchError(f"state dimension {psi0.dim} exceeds {FAST_MAX_DIM}")
    if path == "dense" and psi0.dim > DENSE_MAX_DIM:
        raise DimensionMismatchError(
            f"dense path is capped at dimension {DENSE_MAX_DIM}, state has {psi0.dim}"
        )
    _split_leading(psi0, h.factor_dims)
    prop = Propagator(h, path)
    if prop.path == "dense" and psi0.dim > DENSE_MAX_DIM:
        raise StructureError(
            f"state dimension {psi0.dim} needs the fast path, but the Hamiltonian is not diagonal"
        )
    return StateTrajectory(grid, psi0, prop)


@dataclass(frozen=True, eq=False)
class BranchSeries:
    """Environment branch states ``|e_i(t)>`` attached to ``|a_i>|p_i>``.

    ``gram[j, a, b] = <e_a(t_j)|e_b(t_j)>`` over the retained branches
    ``labels`` (zero-coefficient branches are skipped).
    """

    times: np.ndarray
    labels: tuple[int, ...]
    coefficients: np.ndarray
    gram: np.ndarray
    trajectory: StateTrajectory

    def __len__(self) -> int:
        return self.times.size

    def vectors(self, j: int) -> np.ndarray:
        """Rows are ``|e_i(t_j)>`` for ``i`` in ``labels``."""
        traj = self.trajectory
        d_s, d_m = traj.factor_dims[:2]
        arr = traj.amplitudes(j).reshape(d_s, d_m, -1)
        return np.stack([arr[i, i] / c for i, c in zip(self.labels, self.coefficients)])


def branch_states(traj: StateTrajectory, pointer_index_count: int,
                  coefficients=None, tol: float = BRANCH_MIXING_TOL) -> BranchSeries:
    """Extract ``|e_i(t)> = (<a_i|<p_i| (x) I_E)|psi(t)> / c_i``.

    The state's factor order must be ``(system, pointer, *env)``.  If
    ``coefficients`` is omitted, ``c_i`` is taken as the branch norm at the
    first grid point (so ``|e_i(0)>`` equals ``|e_0>`` up to a phase).

    Raises :class:`ModelViolationError` when weight leaks out of the
    correlated sectors or between them by more than ``tol``.
    """
    dims = traj.factor_dims
    if len(dims) < 2:
        raise DimensionMismatchError("state needs system and pointer factors")
    d_s, d_m = dims[0], dims[1]
    n = int(pointer_index_count)
    if n < 1 or n > min(d_s, d_m):
        raise DimensionMismatchError(f"pointer_index_count {n} out of range for dims {dims[:2]}")
    d_e = math.prod(dims[2:])
    first = traj.amplitudes(0).reshape(d_s, d_m, d_e)
    if coefficients is None:
        c_all = np.array([np.linalg.norm(first[i, i]) for i in range(n)], dtype=np.complex128)
    else:
        c_all = np.asarray(coefficients, dtype=np.complex128).reshape(-1)
        if c_all.size != n:
            raise DimensionMismatchError(f"{c_all.size} coefficients for {n} branches")
    labels = tuple(i for i in range(n) if abs(c_all[i]) > 0.0)
    coeffs = c_all[list(labels)]
    outside = np.ones((d_s, d_m), dtype=bool)
    for i in labels:
        outside[i, i] = False

    gram = np.empty((len(traj), len(labels), len(labels)), dtype=np.complex128)
    for j, vec in enumerate(traj.iter_amplitudes()):
        arr = vec.reshape(d_s, d_m, d_e)
        leak = float(np.linalg.norm(arr[outside]))
        if leak > tol:
            raise ModelViolationError(
                f"branch mixing {leak:.3e} at t={traj.times[j]:.6g} exceeds {tol}"
            )
        blocks = np.stack([arr[i, i] for i in labels])
        for b, c in zip(blocks, coeffs):
            if abs(np.linalg.norm(b) - abs(c)) > tol:
                raise ModelViolationError(
                    f"branch weight changed at t={traj.times[j]:.6g}; sectors are mixing"
                )
        env = blocks / coeffs[:, None]
        gram[j] = env.conj() @ env.T
    gram.setflags(write=False)
    return BranchSeries(traj.times, labels, coeffs, gram, traj)


def reduced_state(traj: StateTrajectory, keep) -> list[DensityOperator]:
    """``rho_r(t_j) = Tr_rest |psi(t_j)><psi(t_j)|`` for every grid point."""
    dims = traj.factor_dims
    kept = check_keep(keep, len(dims))
    kept_dims = tuple(dims[i] for i in kept)
    return [DensityOperator(_reduce_pure(v, dims, kept), kept_dims) for v in traj.iter_amplitudes()]


def expectation(o: Operator, state: PureState | DensityOperator) -> float:
    """``Tr(rho O)``; the imaginary part must vanish to 1e-10."""
    check_hermitian(o.entries, "observable")
    check_same_dim(o.dim, state.dim, "observable and state")
    if isinstance(state, PureState):
        psi = state.amplitudes
        value = np.vdot(psi, o.entries @ psi)
    else:
        value = np.sum(state.entries.T * o.entries)
    scale = max(1.0, float(np.max(np.abs(o.entries))))
    if abs(value.imag) > 1e-10 * scale:
        raise DomainError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)
