"""scikit-learn style wrappers so sweeps can use ``get_params``/``set_params``/``clone``.

Inputs ``X`` are :class:`~eidsim.models.CompositeHamiltonian` instances
(or sequences of them for the vectorized ``predict`` methods).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from .analysis import (
    DEFAULT_CONVERGENCE_TOL,
    MeasurementRun,
    convergence_check,
    decoherence_time,
    run_measurement,
)
from .evolution import TimeGrid
from .exceptions import DimensionMismatchError
from .models import CompositeHamiltonian, MeasurementModel, uniform_env_state
from .pointer import (
    DEFAULT_REGIME_THRESHOLDS,
    REGIMES,
    SieveResult,
    classify_regime,
    default_candidate_axes,
    default_probe_time,
    predictability_sieve,
)

__all__ = ["RegimeClassifier", "PredictabilitySieve", "DecoherenceAnalyzer", "check_hamiltonian"]


def check_hamiltonian(X) -> CompositeHamiltonian:
    if not isinstance(X, CompositeHamiltonian):
        raise TypeError(f"expected a CompositeHamiltonian, got {type(X).__name__}")
    return X


def _check_hamiltonians(X) -> list[CompositeHamiltonian]:
    if isinstance(X, CompositeHamiltonian):
        return [X]
    return [check_hamiltonian(x) for x in X]


class RegimeClassifier(ClassifierMixin, BaseEstimator):
    """Label Hamiltonians by which generator dominates the pointer dynamics.

    Stateless apart from the thresholds; ``fit`` only validates them.
    """

    def __init__(self, low: float = DEFAULT_REGIME_THRESHOLDS[0],
                 high: float = DEFAULT_REGIME_THRESHOLDS[1]):
        self.low = low
        self.high = high

    def fit(self, X=None, y=None):
        if not 0 < self.low < self.high:
            raise ValueError(f"need 0 < low < high, got ({self.low}, {self.high})")
        self.classes_ = np.array(REGIMES)
        return self

    def reports(self, X):
        check_is_fitted(self, "classes_")
        return [classify_regime(h, (self.low, self.high)) for h in _check_hamiltonians(X)]

    def predict(self, X) -> np.ndarray:
        return np.array([r.regime for r in self.reports(X)])

    def transform(self, X) -> np.ndarray:
        """Self-to-interaction norm ratios as a column."""
        return np.array([[r.ratio] for r in self.reports(X)])


class PredictabilitySieve(BaseEstimator):
    """Find the pointer basis least entangled with the environment.

    Parameters
    ----------
    n_candidates : int
        Size of the Fibonacci Bloch grid; the analytic axes of the
        Hamiltonian are appended.
    t_probe : float or None
        Probe time; ``None`` uses :func:`~eidsim.pointer.default_probe_time`.
    threshold : float
        Decoherence threshold of the reference run behind the default probe time.
    n_periods : float
        Self-Hamiltonian periods the default probe time must cover.
    env_state : PureState or None
        Initial environment state; uniform product state by default.
    path : str
        Evolution path passed to the propagator.
    """

    def __init__(self, n_candidates: int = 200, t_probe: float | None = None,
                 threshold: float = 0.01, n_periods: float = 10.0, env_state=None,
                 path: str = "auto"):
        self.n_candidates = n_candidates
        self.t_probe = t_probe
        self.threshold = threshold
        self.n_periods = n_periods
        self.env_state = env_state
        self.path = path

    def fit(self, X, y=None):
        ch = check_hamiltonian(X)
        env0 = self.env_state if self.env_state is not None else uniform_env_state(ch.env_dims)
        t_probe = self.t_probe
        if t_probe is None:
            t_probe = default_probe_time(ch, env0, self.threshold, self.n_periods)
        axes = default_candidate_axes(ch, self.n_candidates)
        self.result_: SieveResult = predictability_sieve(ch, axes, env0, t_probe, self.path)
        self.t_probe_ = float(t_probe)
        self.winner_axis_ = self.result_.winner_axis
        self.winner_angle_ = self.result_.winner_angle
        return self

    def predict(self, X) -> np.ndarray:
        """Winner angle to the sigma_z axis (degrees) for each Hamiltonian, fitting a clone each."""
        return np.array([clone(self).fit(h).winner_angle_ for h in _check_hamiltonians(X)])


class DecoherenceAnalyzer(TransformerMixin, BaseEstimator):
    """Run the measurement scenario on a Hamiltonian and expose the decoherence series.

    ``transform`` returns the series table whose columns are
    :meth:`get_feature_names_out`: ``t``, ``abs_r_i_j`` for each ordered
    branch pair, ``purity``, ``offdiag`` and one column per expectation.
    """

    def __init__(self, model: MeasurementModel | None = None, t_start: float = 0.0,
                 t_end: float = 2.0, n_steps: int = 2000, path: str = "auto",
                 threshold: float = 0.01, convergence_window: int | None = None,
                 convergence_tol: float = DEFAULT_CONVERGENCE_TOL, check: bool = True):
        self.model = model
        self.t_start = t_start
        self.t_end = t_end
        self.n_steps = n_steps
        self.path = path
        self.threshold = threshold
        self.convergence_window = convergence_window
        self.convergence_tol = convergence_tol
        self.check = check

    def fit(self, X, y=None):
        ch = check_hamiltonian(X)
        model = self.model
        if model is None:
            d_m = math.prod(ch.pointer_dims)
            model = MeasurementModel(np.full(2, 1 / math.sqrt(2)), 2, d_m, ch.env_dims)
        grid = TimeGrid(self.t_start, self.t_end, self.n_steps)
        self.run_: MeasurementRun = run_measurement(model, ch, grid, self.path, check=self.check)
        series = self.run_.series
        self.decoherence_time_ = decoherence_time(series, self.threshold)
        self.final_distance_ = self.run_.distance_to_collapse(-1)
        if self.decoherence_time_ is None:
            self.distance_at_decoherence_ = None
        else:
            j = int(np.searchsorted(series.times, self.decoherence_time_))
            self.distance_at_decoherence_ = self.run_.distance_to_collapse(j)
        self.convergence_ = {
            name: convergence_check(values, self.convergence_window, self.convergence_tol)
            for name, values in series.expectations.items()
        }
        return self

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        check_is_fitted(self, "run_")
        series = self.run_.series
        names = ["t"] + [f"abs_r_{i}_{j}" for i, j in series.pairs()] + ["purity", "offdiag"]
        names += [f"exp_{name}" for name in series.expectations]
        return np.array(names, dtype=object)

    def transform(self, X=None) -> np.ndarray:
        """The series table of the fitted run (``X`` is ignored)."""
        check_is_fitted(self, "run_")
        series = self.run_.series
        pos = {label: k for k, label in enumerate(series.labels)}
        cols = [series.times]
        cols += [np.abs(series.r[:, pos[i], pos[j]]) for i, j in series.pairs()]
        cols += [series.purity, series.offdiag]
        cols += list(series.expectations.values())
        return np.column_stack(cols)
