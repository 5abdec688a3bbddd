"""Preferred-context membership, pointer stability, regimes and the predictability sieve.

An observable belongs to the preferred context of a Hamiltonian when it
commutes with it and has at least its degeneracies, i.e. acts as a scalar
on every eigenspace of the Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import check_hermitian, check_orthonormal_columns, check_same_dim
from .analysis import decoherence_time, run_measurement
from .evolution import Propagator, TimeGrid
from .exceptions import DimensionMismatchError, DomainError, InvariantBreachError
from .linalg import DEFAULT_GROUP_TOL, Operator, PureState, commutator_norm, spectral, spectral_norm
from .models import CompositeHamiltonian, MeasurementModel, PointerObservable, SpinBathHamiltonian

__all__ = [
    "ContextVerdict",
    "StabilityNorms",
    "RegimeReport",
    "SieveResult",
    "check_preferred_context",
    "pointer_stability",
    "classify_regime",
    "predictability_sieve",
    "default_probe_time",
    "default_candidate_axes",
    "fibonacci_axes",
    "bloch_basis",
    "axis_angle",
    "REGIMES",
    "DEFAULT_REGIME_THRESHOLDS",
    "DEFAULT_CONTEXT_TOL",
]

DEFAULT_CONTEXT_TOL = 1e-9
DEFAULT_REGIME_THRESHOLDS = (0.1, 10.0)
REGIMES = ("interaction_dominated", "interplay", "self_dominated")
ENV_COMMUTATOR_TOL = 1e-12
STABILITY_REL_TOL = 1e-10
LIFTED_FORM_TOL = 1e-10


@dataclass(frozen=True)
class ContextVerdict:
    commutes: bool
    commutator_norm: float
    respects_degeneracy: bool
    witness: int | None
    tolerance: float

    @property
    def member(self) -> bool:
        return self.commutes and self.respects_degeneracy


def check_preferred_context(p: Operator, h: Operator, tol: float = DEFAULT_CONTEXT_TOL,
                            group_tol: float = DEFAULT_GROUP_TOL) -> ContextVerdict:
    """Test whether ``p`` belongs to the preferred context of ``h``.

    Both tests use the tolerance ``tol * max(||p||, ||h||)``.  The
    degeneracy clause requires, for every eigenprojector ``Pi_k`` of ``h``,
    ``||Pi_k p Pi_k - mu_k Pi_k|| <= tol'`` with ``mu_k = Tr(Pi_k p)/rank``
    and ``||Pi_k p (1 - Pi_k)|| <= tol'``; ``witness`` is the first
    eigenspace index violating it.
    """
    if isinstance(p, PointerObservable):
        p = p.operator
    check_hermitian(p.entries, "p")
    check_hermitian(h.entries, "h")
    check_same_dim(p.dim, h.dim)
    abs_tol = tol * max(spectral_norm(p), spectral_norm(h))
    cnorm = commutator_norm(p, h)
    dec = spectral(h, group_tol)
    pm = p.entries
    witness = None
    for k, v in enumerate(dec.vectors):
        # work in the eigenspace basis: block = V^dagger P V, leak = (1 - Pi) P V
        pv = pm @ v
        block = v.conj().T @ pv
        mu = np.trace(block).real / v.shape[1]
        inner = spectral_norm(block - mu * np.eye(v.shape[1]))
        leak = spectral_norm(pv - v @ block)
        if inner > abs_tol or leak > abs_tol:
            witness = k
            break
    return ContextVerdict(cnorm <= abs_tol, cnorm, witness is None, witness, abs_tol)


class StabilityNorms(NamedTuple):
    norm_full: float
    norm_reduced: float
    norm_env: float


def _lifted_local(p: PointerObservable | Operator, ch: CompositeHamiltonian) -> Operator:
    """The pointer part ``P_M`` of ``p = P_M (x) I_E``, checking the lifted form."""
    if isinstance(p, PointerObservable):
        if p.local_dims == ch.pointer_dims and p.env_dims == ch.env_dims:
            return p.local
        if p.factor_dims != ch.factor_dims:
            raise DimensionMismatchError(
                f"pointer factors {p.factor_dims} do not match {ch.factor_dims}"
            )
        p = p.operator
    check_same_dim(p.dim, ch.dim, "pointer and Hamiltonian")
    d_m = math.prod(ch.pointer_dims)
    d_e = math.prod(ch.env_dims)
    t = p.entries.reshape(d_m, d_e, d_m, d_e)
    local = np.einsum("aebe->ab", t) / d_e
    defect = float(np.max(np.abs(p.entries - np.kron(local, np.eye(d_e)))))
    if defect > LIFTED_FORM_TOL * max(1.0, float(np.max(np.abs(p.entries)))):
        raise DomainError(f"pointer is not of the form P_M (x) I_E (defect {defect:.3e})")
    return Operator(local, ch.pointer_dims)


def pointer_stability(p: PointerObservable | Operator, ch: CompositeHamiltonian) -> StabilityNorms:
    """Commutator norms of a lifted pointer with the full, reduced and environment generators.

    ``norm_full = ||[P, H_ME]||``, ``norm_reduced = ||[P, H_M (x) I + lam H_int]||``,
    ``norm_env = ||[P, I (x) H_E]||``.  Since ``P = P_M (x) I_E`` the
    environment term always commutes; a breach of ``norm_env <= 1e-12`` or
    ``|norm_full - norm_reduced| <= 1e-10 * scale`` raises
    :class:`InvariantBreachError`.
    """
    local = _lifted_local(p, ch)
    d_e = math.prod(ch.env_dims)
    lifted = Operator(np.kron(local.entries, np.eye(d_e)), ch.factor_dims)
    full = commutator_norm(lifted, ch.total)
    reduced = commutator_norm(lifted, ch.reduced)
    env = commutator_norm(lifted, ch.env_part)
    scale = max(1.0, spectral_norm(local) * spectral_norm(ch.total))
    if env > ENV_COMMUTATOR_TOL * scale:
        raise InvariantBreachError(f"[P, I_M (x) H_E] has norm {env:.3e}")
    if abs(full - reduced) > STABILITY_REL_TOL * scale:
        raise InvariantBreachError(
            f"full and reduced commutator norms differ by {abs(full - reduced):.3e}"
        )
    return StabilityNorms(full, reduced, env)


@dataclass(frozen=True)
class RegimeReport:
    ratio: float
    regime: str
    thresholds: tuple[float, float]

    @property
    def regime_number(self) -> int:
        return REGIMES.index(self.regime) + 1


def classify_regime(ch: CompositeHamiltonian,
                    thresholds: Sequence[float] = DEFAULT_REGIME_THRESHOLDS) -> RegimeReport:
    """Place ``ratio = ||H_M (x) I_E|| / ||lam H_int||`` against ``(low, high)``."""
    low, high = (float(x) for x in thresholds)
    if not 0.0 < low < high:
        raise ValueError(f"thresholds must satisfy 0 < low < high, got {(low, high)}")
    num = ch.self_norm()
    den = ch.interaction_norm()
    if num == 0.0 and den == 0.0:
        raise ValueError("regime undefined: both H_M and the interaction vanish")
    ratio = math.inf if den == 0.0 else num / den
    if ratio < low:
        regime = "interaction_dominated"
    elif ratio > high:
        regime = "self_dominated"
    else:
        regime = "interplay"
    return RegimeReport(ratio, regime, (low, high))


# ---------------------------------------------------------------------------
# predictability sieve


def fibonacci_axes(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors on the sphere (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    theta = np.arccos(1.0 - 2.0 * i / n)
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)


def bloch_basis(axis) -> np.ndarray:
    """Columns are the +/- eigenstates of ``n . sigma`` for the unit vector ``axis``."""
    x, y, z = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    up = [math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)]
    down = [-np.exp(-1j * phi) * math.sin(theta / 2), math.cos(theta / 2)]
    return np.array([up, down], dtype=np.complex128).T


def axis_angle(axis, reference=(0.0, 0.0, 1.0)) -> float:
    """Angle in degrees between the lines through ``axis`` and ``reference``.

    Antipodal axes define the same basis, so the result lies in [0, 90].
    """
    a = np.asarray(axis, dtype=float)
    b = np.asarray(reference, dtype=float)
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.degrees(math.acos(min(1.0, c)))


_PAULI_VECS = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


def _analytic_axes(ch: CompositeHamiltonian) -> list[np.ndarray]:
    """Bloch axes of ``H_M`` and of the dominant pointer coupling in ``H_int``."""
    if isinstance(ch, SpinBathHamiltonian):
        m_axis = np.array([1.0, 0, 0]) if ch.pointer_axis == "x" else np.array([0, 0, 1.0])
        return [m_axis, np.array([0, 0, 1.0])]
    axes = []
    bloch = np.array([np.trace(s @ ch.h_m.entries).real for s in _PAULI_VECS])
    if np.linalg.norm(bloch) > 0:
        axes.append(bloch / np.linalg.norm(bloch))
    d_e = math.prod(ch.env_dims)
    t = ch.h_int.entries.reshape(2, d_e, 2, d_e)
    weights = [np.linalg.norm(np.einsum("ab,aebf->ef", s, t)) for s in _PAULI_VECS]
    if max(weights) > 0:
        axes.append(np.eye(3)[int(np.argmax(weights))])
    return axes


def default_candidate_axes(ch: CompositeHamiltonian, n: int = 200) -> np.ndarray:
    """Fibonacci grid of ``n`` axes followed by the analytic axes of ``ch``."""
    if ch.pointer_dims != (2,):
        raise DimensionMismatchError("Bloch-axis candidates need a single qubit pointer")
    return np.vstack([fibonacci_axes(n)] + [a[None, :] for a in _analytic_axes(ch)])


@dataclass(frozen=True, eq=False)
class SieveResult:
    """Scores are summed linear entropies ``1 - Tr rho_M^2``; lower is more predictable."""

    scores: np.ndarray
    ranking: np.ndarray
    t_probe: float
    bases: np.ndarray
    axes: np.ndarray | None = None

    @property
    def winner(self) -> int:
        return int(self.ranking[0])

    @property
    def winner_basis(self) -> np.ndarray:
        return self.bases[self.winner]

    @property
    def winner_axis(self) -> np.ndarray | None:
        return None if self.axes is None else self.axes[self.winner]

    @property
    def winner_angle(self) -> float | None:
        """Winner's angle to the sigma_z axis in degrees (0 = sigma_z basis, 90 = equatorial)."""
        return None if self.axes is None else axis_angle(self.winner_axis)


def predictability_sieve(ch: CompositeHamiltonian, candidates, env0: PureState,
                         t_probe: float, path: str = "auto") -> SieveResult:
    """Rank candidate pointer bases by entanglement generated with the environment.

    ``candidates`` is either an ``(n, d, d)`` array of bases (columns are the
    basis vectors) or, for a qubit pointer, an ``(n, 3)`` array of Bloch
    axes.  Each basis state ``|b> (x) env0`` is evolved to ``t_probe`` and the
    linear entropies of the reduced pointer states are summed.  Ranking is
    ascending in score with ties broken by candidate index.
    """
    cand = np.asarray(candidates)
    axes = None
    if cand.ndim == 2 and cand.shape[1] == 3:
        axes = cand.astype(float)
        bases = np.stack([bloch_basis(a) for a in axes])
    elif cand.ndim == 3 and cand.shape[1] == cand.shape[2]:
        bases = cand.astype(np.complex128)
    else:
        raise DimensionMismatchError(f"candidates have unsupported shape {cand.shape}")
    d_m = math.prod(ch.pointer_dims)
    d_e = math.prod(ch.env_dims)
    if bases.shape[1] != d_m:
        raise DimensionMismatchError(f"candidate bases act on dimension {bases.shape[1]}, pointer has {d_m}")
    if env0.dim != d_e:
        raise DimensionMismatchError(f"environment state dimension {env0.dim} != {d_e}")
    for k, b in enumerate(bases):
        check_orthonormal_columns(b, name=f"candidate {k}")

    prop = Propagator(ch, path)
    n_c = bases.shape[0]
    # rows: |b_{c,s}> (x) env0 for candidate c, basis state s
    pointer_rows = bases.transpose(0, 2, 1).reshape(n_c * d_m, d_m)
    rows = np.einsum("rm,e->rme", pointer_rows, env0.amplitudes).reshape(n_c * d_m, d_m * d_e)
    evolved = prop.apply(rows, t_probe).reshape(n_c * d_m, d_m, d_e)
    rho = np.einsum("rme,rne->rmn", evolved, evolved.conj())
    purity = np.sum(np.abs(rho) ** 2, axis=(1, 2))
    scores = np.maximum(1.0 - purity, 0.0).reshape(n_c, d_m).sum(axis=1)
    ranking = np.argsort(scores, kind="stable")
    return SieveResult(scores, ranking, float(t_probe), bases, axes)


def default_probe_time(ch: CompositeHamiltonian, env0: PureState, threshold: float = 0.01,
                       n_periods: float = 10.0, n_steps: int = 2000,
                       max_doublings: int = 8) -> float:
    """Probe time long enough for both generators to act.

    Returns the larger of (i) the decoherence time of the reference run
    with ``H_M`` removed (pointer in the uniform superposition of its
    computational basis) and (ii) ``n_periods`` periods of ``H_M``.
    """
    candidates = []
    w_m = np.linalg.eigvalsh(ch.h_m.entries)
    spread = float(w_m[-1] - w_m[0])
    if spread > 0:
        candidates.append(n_periods * 2 * math.pi / spread)
    scale = ch.interaction_norm()
    if scale > 0:
        d_m = math.prod(ch.pointer_dims)
        model = MeasurementModel(np.full(d_m, 1 / math.sqrt(d_m)), d_m, d_m, ch.env_dims, env0)
        reference = ch.without_self()
        t_end = 10.0 / scale
        for _ in range(max_doublings + 1):
            run = run_measurement(model, reference, TimeGrid(0.0, t_end, n_steps), check=False)
            t_ref = decoherence_time(run.series, threshold)
            if t_ref is not None:
                candidates.append(t_ref)
                break
            t_end *= 2
    if not candidates:
        raise ValueError("no probe time: H_M has no spread and the reference run never decoheres")
    return max(candidates)
