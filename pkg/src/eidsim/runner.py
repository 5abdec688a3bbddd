"""Experiment orchestration behind the command line.

Each ``run_*`` function takes an :class:`~eidsim.config.ExperimentConfig`
and returns an :class:`Outcome`: a JSON-ready summary plus the tables to
write.  Nothing here touches the filesystem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .estimators import DecoherenceAnalyzer, PredictabilitySieve, RegimeClassifier
from .evolution import DENSE_MAX_DIM
from .exceptions import DimensionMismatchError, ModelViolationError, StructureError
from .linalg import pauli
from .models import PointerObservable, SpinBathHamiltonian, lift_pointer
from .pointer import check_preferred_context, pointer_stability

__all__ = ["Outcome", "Table", "run_experiment", "RUNNERS"]


@dataclass
class Table:
    columns: list[str]
    rows: np.ndarray | list[list]


@dataclass
class Outcome:
    summary: dict
    tables: dict[str, Table] = field(default_factory=dict)


def _num(x):
    """JSON-safe float: infinities become strings, None stays None."""
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _base_summary(cfg: ExperimentConfig, ch: SpinBathHamiltonian) -> dict:
    return {
        "tool": "eidsim",
        "version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.doc,
        "resolved": {
            "couplings": [float(g) for g in ch.couplings],
            "env_energies": [float(w) for w in ch.env_energies],
        },
    }


def _regime(cfg: ExperimentConfig, ch) -> dict:
    low, high = cfg.analysis["regime_thresholds"]
    report = RegimeClassifier(low, high).fit().reports(ch)[0]
    return {
        "ratio": _num(report.ratio),
        "regime": report.regime,
        "regime_number": report.regime_number,
        "thresholds": [low, high],
    }


def _sieve_feasible(ch: SpinBathHamiltonian) -> bool:
    return ch.is_pure_dephasing or ch.dim <= DENSE_MAX_DIM


def _sieve(cfg: ExperimentConfig, ch: SpinBathHamiltonian, env0) -> tuple[dict, PredictabilitySieve]:
    s = cfg.sieve
    est = PredictabilitySieve(s["n_candidates"], s["t_probe"], cfg.analysis["decoherence_threshold"],
                              s["n_periods"], env0, cfg.path).fit(ch)
    res = est.result_
    summary = {
        "winner_index": res.winner,
        "winner_axis": [float(a) for a in res.winner_axis],
        "winner_angle_deg": float(res.winner_angle),
        "winner_score": float(res.scores[res.winner]),
        "t_probe": est.t_probe_,
        "n_candidates": int(res.scores.size),
    }
    return summary, est


def _sieve_or_status(cfg, ch, env0) -> tuple[dict | None, str, PredictabilitySieve | None]:
    if not cfg.sieve["enabled"]:
        return None, "disabled", None
    if not _sieve_feasible(ch):
        return None, f"skipped: dimension {ch.dim} needs a pure-dephasing Hamiltonian", None
    summary, est = _sieve(cfg, ch, env0)
    return summary, "ok", est


def _decoherence(cfg: ExperimentConfig, ch, model) -> DecoherenceAnalyzer:
    g = cfg.grid
    a = cfg.analysis
    return DecoherenceAnalyzer(model, g.t_start, g.t_end, g.n_steps, cfg.path,
                               a["decoherence_threshold"], a["convergence_window"],
                               a["convergence_tol"]).fit(ch)


def _decoherence_summary(est: DecoherenceAnalyzer) -> dict:
    return {
        "decoherence_time": _num(est.decoherence_time_),
        "trace_distance_final": float(est.final_distance_),
        "trace_distance_at_decoherence": _num(est.distance_at_decoherence_),
        "convergence": {
            name: {"converged": res.converged, "value": float(res.value)}
            for name, res in est.convergence_.items()
        },
        "invariants": {k: float(v) for k, v in est.run_.invariants.items()},
        "evolution_path": est.run_.trajectory.path,
    }


def run_measurement_experiment(cfg: ExperimentConfig) -> Outcome:
    ch = cfg.hamiltonian()
    model = cfg.measurement_model()
    est = _decoherence(cfg, ch, model)
    summary = _base_summary(cfg, ch)
    summary.update(_decoherence_summary(est))
    summary["regime"] = _regime(cfg, ch)
    summary["sieve"], summary["sieve_status"], _ = _sieve_or_status(cfg, ch, model.env_state)
    series = Table([str(c) for c in est.get_feature_names_out()], est.transform(None))
    return Outcome(summary, {"series.csv": series})


def run_regime_experiment(cfg: ExperimentConfig) -> Outcome:
    """Regime, sieve winner and (when the branch form holds) decoherence time."""
    ch = cfg.hamiltonian()
    model = cfg.measurement_model()
    summary = _base_summary(cfg, ch)
    summary["regime"] = _regime(cfg, ch)
    summary["sieve"], summary["sieve_status"], _ = _sieve_or_status(cfg, ch, model.env_state)
    try:
        est = _decoherence(cfg, ch, model)
    except ModelViolationError:
        summary["decoherence_time"] = None
        summary["decoherence_status"] = "branch_mixing"
    except (StructureError, DimensionMismatchError) as exc:
        summary["decoherence_time"] = None
        summary["decoherence_status"] = f"skipped: {exc}"
    else:
        summary.update(_decoherence_summary(est))
        summary["decoherence_status"] = "ok"
    return Outcome(summary)


def run_sieve_experiment(cfg: ExperimentConfig) -> Outcome:
    ch = cfg.hamiltonian()
    model = cfg.measurement_model()
    summary = _base_summary(cfg, ch)
    sieve_summary, est = _sieve(cfg, ch, model.env_state)
    summary["sieve"] = sieve_summary
    summary["regime"] = _regime(cfg, ch)
    res = est.result_
    rank = np.empty(res.scores.size, dtype=int)
    rank[res.ranking] = np.arange(res.scores.size)
    rows = [
        [k, *res.axes[k], math.degrees(math.acos(max(-1.0, min(1.0, res.axes[k][2])))),
         math.degrees(math.atan2(res.axes[k][1], res.axes[k][0])), res.scores[k], int(rank[k])]
        for k in range(res.scores.size)
    ]
    table = Table(["candidate", "n_x", "n_y", "n_z", "theta_deg", "phi_deg", "score", "rank"], rows)
    return Outcome(summary, {"sieve.csv": table})


def run_pointer_check(cfg: ExperimentConfig) -> Outcome:
    ch = cfg.hamiltonian()
    if ch.dim > DENSE_MAX_DIM:
        raise DimensionMismatchError(
            f"pointer check builds dense operators; dimension {ch.dim} exceeds {DENSE_MAX_DIM}"
        )
    axis = cfg.doc["pointer"]["observable"]
    p_m = PointerObservable.from_operator(pauli(axis))
    p = lift_pointer(p_m, ch.env_dims)
    norms = pointer_stability(p, ch)
    tol = cfg.analysis["context_tol"]

    def verdict(h):
        v = check_preferred_context(p.operator, h, tol)
        return {
            "member": v.member,
            "commutes": v.commutes,
            "commutator_norm": v.commutator_norm,
            "respects_degeneracy": v.respects_degeneracy,
            "witness": v.witness,
            "tolerance": v.tolerance,
        }

    summary = _base_summary(cfg, ch)
    summary["pointer"] = {
        "observable": f"sigma_{axis}",
        "N": p.N,
        "K": p.K,
        "eigenprojector_ranks": list(p.ranks),
    }
    summary["stability"] = {
        "norm_full": norms.norm_full,
        "norm_reduced": norms.norm_reduced,
        "norm_env": norms.norm_env,
    }
    summary["preferred_context"] = {
        "total_hamiltonian": verdict(ch.total),
        "without_env_self_term": verdict(ch.reduced),
    }
    summary["regime"] = _regime(cfg, ch)
    return Outcome(summary)


RUNNERS = {
    "measurement_run": run_measurement_experiment,
    "regime_sweep": run_regime_experiment,
    "sieve": run_sieve_experiment,
    "pointer_check": run_pointer_check,
}


def run_experiment(cfg: ExperimentConfig) -> Outcome:
    return RUNNERS[cfg.experiment](cfg)
