"""Quantifying decoherence of the reduced S (x) M state.

The off-diagonal factor is computed as the branch overlap
``r_ij(t) = <e_j(t)|e_i(t)>``.  The sum form
``sum_l <e_l|e_i><e_j|e_l>`` reduces to it when ``{|e_l>}`` is any
orthonormal environment basis, by completeness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from ._validation import check_orthonormal_columns, check_same_dim
from .evolution import (
    BranchSeries,
    StateTrajectory,
    TimeGrid,
    branch_states,
    evolve,
    expectation,
    reduced_state,
)
from .exceptions import DimensionMismatchError, DomainError, InvariantBreachError
from .linalg import DensityOperator, Operator, embed, pauli, tensor
from .models import (
    CompositeHamiltonian,
    MeasurementModel,
    build_collapsed_mixture,
    build_correlated_state,
    correlated_basis,
)

__all__ = [
    "DecoherenceSeries",
    "ConvergenceResult",
    "MeasurementRun",
    "decoherence_factors",
    "off_diagonality",
    "decoherence_time",
    "convergence_check",
    "compare_to_collapse",
    "trace_distance",
    "run_measurement",
    "pointer_observables",
    "DEFAULT_WINDOW_FRACTION",
    "DEFAULT_CONVERGENCE_TOL",
]

DEFAULT_WINDOW_FRACTION = 0.2
DEFAULT_CONVERGENCE_TOL = 0.02
CAUCHY_SCHWARZ_SLACK = 1e-12
TRACE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DecoherenceSeries:
    """Time series of ``r_ij(t)`` plus optional purity, off-diagonality and expectations.

    ``r[t, a, b]`` is indexed by position in ``labels`` (the branch indices).
    """

    times: np.ndarray
    labels: tuple[int, ...]
    r: np.ndarray
    purity: np.ndarray | None = None
    offdiag: np.ndarray | None = None
    expectations: Mapping[str, np.ndarray] = field(default_factory=dict)

    def max_offdiag_r(self) -> np.ndarray:
        """``max_{i != j} |r_ij(t)|`` per grid point (0 with fewer than two branches)."""
        n = len(self.labels)
        if n < 2:
            return np.zeros(self.times.size)
        mask = ~np.eye(n, dtype=bool)
        return np.abs(self.r[:, mask]).max(axis=1)

    def pairs(self) -> list[tuple[int, int]]:
        """Ordered label pairs ``(i, j)`` with ``i != j``."""
        return [(i, j) for i in self.labels for j in self.labels if i != j]


def decoherence_factors(branches: BranchSeries) -> DecoherenceSeries:
    """``r_ij(t) = <e_j(t)|e_i(t)>`` for every pair of retained branches."""
    r = branches.gram.conj().copy()
    n = len(branches.labels)
    idx = np.arange(n)
    r[:, idx, idx] = 1.0
    worst = float(np.max(np.abs(r))) if r.size else 0.0
    if worst > 1.0 + CAUCHY_SCHWARZ_SLACK:
        raise InvariantBreachError(f"|r_ij| = {worst!r} violates Cauchy-Schwarz")
    r.setflags(write=False)
    return DecoherenceSeries(branches.times, branches.labels, r)


def off_diagonality(rho: DensityOperator, basis) -> float:
    """Frobenius weight of the off-diagonal entries of ``rho`` in ``basis``.

    ``basis`` is a matrix whose columns are the basis vectors, or a list of
    vectors; it must be orthonormal and complete.
    """
    b = np.asarray(basis, dtype=np.complex128)
    if isinstance(basis, (list, tuple)):
        b = b.T
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatchError(f"basis must be complete: got shape {b.shape}")
    check_same_dim(rho.dim, b.shape[0], "state and basis")
    check_orthonormal_columns(b)
    m = b.conj().T @ rho.entries @ b
    off = m - np.diag(np.diag(m))
    return float(np.sqrt(np.sum(np.abs(off) ** 2)))


def decoherence_time(series: DecoherenceSeries, threshold: float,
                     atol: float = CAUCHY_SCHWARZ_SLACK) -> float | None:
    """First grid time at which ``max_{i != j} |r_ij| <= threshold``, else ``None``."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    below = np.nonzero(series.max_offdiag_r() <= threshold + atol)[0]
    return float(series.times[below[0]]) if below.size else None


class ConvergenceResult(NamedTuple):
    converged: bool
    value: float


def convergence_check(values, window: int | None = None,
                      tol: float = DEFAULT_CONVERGENCE_TOL) -> ConvergenceResult:
    """Whether the trailing ``window`` samples spread by at most ``tol``.

    ``window`` defaults to the final 20% of the series.  The settled value is
    the trailing-window mean.
    """
    x = np.asarray(values, dtype=float).reshape(-1)
    if window is None:
        window = max(1, int(round(DEFAULT_WINDOW_FRACTION * x.size)))
    if not 1 <= window <= x.size:
        raise ValueError(f"window {window} must lie in [1, {x.size}]")
    tail = x[-window:]
    return ConvergenceResult(bool(tail.max() - tail.min() <= tol), float(tail.mean()))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def compare_to_collapse(rho_r_final: DensityOperator, rho_c: DensityOperator) -> float:
    """Trace distance ``0.5 * ||rho_r - rho_c||_1``."""
    check_same_dim(rho_r_final.dim, rho_c.dim, "density operators")
    return trace_distance(rho_r_final.entries, rho_c.entries)


def pointer_observables(model: MeasurementModel) -> dict[str, Operator]:
    """Default observables on the S (x) M space (qubit pointers only).

    Pointer sigma_x and sigma_z, plus ``sigma_xx`` = sigma_x (x) sigma_x when
    the system is a qubit too.  Because S and M are already correlated, the
    pointer-only sigma_x vanishes identically; the interference between the
    branches shows up in ``sigma_xx = 2 Re(c_0 c_1^* r_01)``.
    """
    if model.pointer_dim != 2:
        return {}
    dims = (model.system_dim, model.pointer_dim)
    obs = {
        "sigma_x_pointer": embed(pauli("x"), [1], dims),
        "sigma_z_pointer": embed(pauli("z"), [1], dims),
    }
    if model.system_dim == 2:
        obs["sigma_xx"] = tensor(pauli("x"), pauli("x"))
    return obs


@dataclass(frozen=True, eq=False)
class MeasurementRun:
    """Everything computed for one measurement scenario."""

    model: MeasurementModel
    hamiltonian: CompositeHamiltonian
    trajectory: StateTrajectory
    branches: BranchSeries
    series: DecoherenceSeries
    reduced: list[DensityOperator]
    collapsed: DensityOperator
    populations: np.ndarray
    invariants: dict[str, float]

    def decoherence_time(self, threshold: float) -> float | None:
        return decoherence_time(self.series, threshold)

    def distance_to_collapse(self, j: int = -1) -> float:
        return compare_to_collapse(self.reduced[j], self.collapsed)


def run_measurement(model: MeasurementModel, hamiltonian: CompositeHamiltonian, grid: TimeGrid,
                    path: str = "auto", observables: Mapping[str, Operator] | None = None,
                    check: bool = True) -> MeasurementRun:
    """Evolve the correlated state and measure decoherence of the S (x) M reduced state.

    With ``check=True`` the closed-system invariants (norm, energy, reduced
    trace and Hermiticity) are enforced and :class:`InvariantBreachError`
    is raised on a breach.
    """
    if model.factor_dims[1:] != hamiltonian.factor_dims:
        raise DimensionMismatchError(
            f"model factors {model.factor_dims[1:]} do not match Hamiltonian {hamiltonian.factor_dims}"
        )
    psi0 = build_correlated_state(model)
    traj = evolve(hamiltonian, psi0, grid, path)
    invariants = traj.check_invariants() if check else traj.invariant_drift()
    branches = branch_states(traj, model.n_branches, model.coefficients)
    series = decoherence_factors(branches)
    try:
        reduced = reduced_state(traj, [0, 1])
    except DomainError as exc:
        raise InvariantBreachError(f"reduced state invalid: {exc}") from exc
    traces = np.array([rho.trace() for rho in reduced])
    invariants["reduced_trace_drift"] = float(np.max(np.abs(traces - 1.0)))
    if check and invariants["reduced_trace_drift"] > TRACE_TOL:
        raise InvariantBreachError(
            f"reduced trace drift {invariants['reduced_trace_drift']:.3e} exceeds {TRACE_TOL}"
        )
    basis = correlated_basis(model)
    in_basis = [basis.conj().T @ rho.entries @ basis for rho in reduced]
    populations = np.array([np.diag(m).real for m in in_basis])
    offdiag = np.array([off_diagonality(rho, basis) for rho in reduced])
    purity = np.array([rho.purity() for rho in reduced])
    obs = pointer_observables(model) if observables is None else dict(observables)
    expectations = {name: np.array([expectation(o, rho) for rho in reduced]) for name, o in obs.items()}
    series = DecoherenceSeries(series.times, series.labels, series.r, purity, offdiag, expectations)
    return MeasurementRun(model, hamiltonian, traj, branches, series, reduced,
                          build_collapsed_mixture(model), populations, invariants)
