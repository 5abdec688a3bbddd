import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eidsim import (
    DensityOperator,
    DimensionMismatchError,
    DomainError,
    InvariantBreachError,
    MeasurementModel,
    TimeGrid,
    build_spin_bath,
    compare_to_collapse,
    convergence_check,
    decoherence_time,
    off_diagonality,
    run_measurement,
)
from eidsim.analysis import DecoherenceSeries, trace_distance
from eidsim.models import correlated_basis

from oracles import analytic_r01, random_unitary
from oracles import trace_distance as trace_distance_svd

seeds = st.integers(0, 2**32 - 1)
EQUAL = np.array([1, 1]) / math.sqrt(2)


def series_from(times, r01):
    r = np.ones((len(times), 2, 2), dtype=complex)
    r[:, 0, 1] = r01
    r[:, 1, 0] = np.conj(r01)
    return DecoherenceSeries(np.asarray(times), (0, 1), r)


def spin_run(n_env, seed=0, t_end=2.0, n_steps=400, coefficients=EQUAL, env_energies=None, **kw):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.5, 1.5, n_env)
    w = np.zeros(n_env) if env_energies is None else env_energies
    h = build_spin_bath(n_env, g, w, **kw)
    m = MeasurementModel(coefficients, 2, 2, (2,) * n_env)
    return g, run_measurement(m, h, TimeGrid(0.0, t_end, n_steps))


class TestDecoherenceFactors:
    def test_initial_and_diagonal(self):
        _, run = spin_run(3)
        r = run.series.r
        assert np.allclose(r[0], 1.0, atol=1e-15)
        assert np.all(r[:, 0, 0] == 1.0) and np.all(r[:, 1, 1] == 1.0)

    def test_hermitian_pairs_and_bound(self):
        _, run = spin_run(5, env_energies=np.linspace(0.1, 1, 5))
        r = run.series.r
        assert np.allclose(r[:, 0, 1], np.conj(r[:, 1, 0]))
        assert np.max(np.abs(r)) <= 1 + 1e-12

    @given(seeds)
    def test_analytic_product(self, seed):
        g, run = spin_run(6, seed=seed, n_steps=200)
        r01 = run.series.r[:, 0, 1]
        assert np.max(np.abs(r01 - analytic_r01(g, run.series.times))) <= 1e-12

    def test_dense_confirms_analytic(self):
        g, run = spin_run(8, seed=3, n_steps=100, pointer_energy=0.0)
        rng = np.random.default_rng(3)
        h = build_spin_bath(8, rng.uniform(0.5, 1.5, 8), np.zeros(8))
        dense = run_measurement(run.model, h, TimeGrid(0.0, 2.0, 100), path="dense")
        assert np.max(np.abs(dense.series.r[:, 0, 1] - analytic_r01(g, run.series.times))) <= 1e-10

    def test_pairs(self):
        _, run = spin_run(1)
        assert run.series.pairs() == [(0, 1), (1, 0)]


class TestOffDiagonality:
    def test_diagonal_in_own_basis(self, rng):
        u = random_unitary(rng, 4)
        rho = DensityOperator(u @ np.diag([0.1, 0.2, 0.3, 0.4]) @ u.conj().T)
        assert off_diagonality(rho, u) <= 1e-14
        assert off_diagonality(rho, list(u.T)) <= 1e-14

    def test_plus_state(self):
        rho = DensityOperator(np.full((2, 2), 0.5))
        assert off_diagonality(rho, np.eye(2)) == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_non_orthonormal_rejected(self):
        rho = DensityOperator(np.eye(2) / 2)
        with pytest.raises(DomainError):
            off_diagonality(rho, np.array([[1, 1], [0, 1]]))

    def test_incomplete_rejected(self):
        with pytest.raises(DimensionMismatchError):
            off_diagonality(DensityOperator(np.eye(2) / 2), np.eye(2)[:, :1])

    @given(seeds)
    def test_equals_coefficient_formula(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        c /= np.linalg.norm(c)
        _, run = spin_run(4, seed=seed, n_steps=50, coefficients=c)
        r = run.series.r[:, 0, 1]
        expected = np.sqrt(2) * np.abs(c[0] * c[1] * r)
        assert np.max(np.abs(run.series.offdiag - expected)) <= 1e-10


class TestDecoherenceTime:
    def test_cosine_half(self):
        g = 1.3
        times = np.linspace(0, 2, 2001)
        t_d = decoherence_time(series_from(times, np.cos(2 * g * times)), 0.5)
        expected = math.pi / (6 * g)
        assert abs(t_d - expected) <= times[1] - times[0]
        assert t_d >= expected - 1e-12

    def test_threshold_one_is_start(self):
        times = np.linspace(0.5, 2, 11)
        assert decoherence_time(series_from(times, np.cos(times)), 1.0) == 0.5

    def test_never_reached(self):
        times = np.linspace(0, 0.1, 11)
        assert decoherence_time(series_from(times, np.cos(times)), 0.01) is None

    @pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
    def test_threshold_domain(self, bad):
        with pytest.raises(ValueError):
            decoherence_time(series_from([0.0], [1.0]), bad)

    def test_twelve_spins_before_revival(self):
        g = np.random.default_rng(0).uniform(0.5, 1.5, 12)
        times = np.linspace(0, 2, 2000)
        t_d = decoherence_time(series_from(times, analytic_r01(g, times)), 0.01)
        assert t_d is not None
        # first revival of a cos(2 g t) product is no earlier than pi / (2 max g)
        assert t_d < math.pi / (2 * g.max())


class TestConvergence:
    def test_constant(self):
        res = convergence_check(np.full(50, 0.3), window=10, tol=1e-12)
        assert res.converged and res.value == pytest.approx(0.3)

    def test_cosine_not_converged(self):
        t = np.linspace(0, 20, 2001)
        assert not convergence_check(np.cos(t), window=300, tol=0.02).converged

    def test_default_window_is_last_fifth(self):
        x = np.concatenate([np.linspace(5, 1, 80), np.full(20, 1.0)])
        assert convergence_check(x).converged
        assert convergence_check(x).value == 1.0

    def test_window_range(self):
        with pytest.raises(ValueError):
            convergence_check(np.zeros(5), window=6)

    def test_interference_settles_to_zero(self):
        _, run = spin_run(12, seed=0, t_end=4.0, n_steps=800)
        exps = run.series.expectations
        # the S-M correlation already hides coherence from the pointer alone
        assert np.max(np.abs(exps["sigma_x_pointer"])) <= 1e-12
        # sigma_x (x) sigma_x starts at 2 Re(c0 c1*) = 1 and follows r_01
        series = exps["sigma_xx"]
        assert series[0] == pytest.approx(1.0)
        assert np.allclose(series, run.series.r[:, 0, 1].real, atol=1e-12)
        res = convergence_check(series)
        assert res.converged
        assert abs(res.value) <= 0.02

    def test_fluctuations_shrink_with_coupling_spread(self):
        times = np.linspace(0, 40, 4001)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            narrow = analytic_r01(rng.uniform(0.95, 1.05, 12), times)
            wide = analytic_r01(rng.uniform(0.5, 1.5, 12), times)
            assert np.std(wide[800:]) < np.std(narrow[800:])


class TestCompareToCollapse:
    def test_identical(self):
        rho = DensityOperator(np.diag([0.3, 0.7]))
        assert compare_to_collapse(rho, rho) == 0.0

    def test_plus_vs_dephased(self):
        plus = DensityOperator(np.full((2, 2), 0.5))
        mixed = DensityOperator(np.eye(2) / 2)
        assert compare_to_collapse(plus, mixed) == pytest.approx(0.5, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            compare_to_collapse(DensityOperator(np.eye(2) / 2), DensityOperator(np.eye(3) / 3))

    @given(seeds)
    def test_matches_svd_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        ra, rb = a @ a.conj().T, b @ b.conj().T
        ra, rb = ra / np.trace(ra), rb / np.trace(rb)
        assert trace_distance(ra, rb) == pytest.approx(trace_distance_svd(ra, rb), abs=1e-12)

    def test_bounded_by_offdiagonal_weight(self):
        _, run = spin_run(10, seed=1, t_end=2.0, n_steps=400)
        c = run.model.coefficients
        for j in range(0, 401, 20):
            bound = 2 * abs(c[0] * c[1] * run.series.r[j, 0, 1])
            assert run.distance_to_collapse(j) <= bound + 1e-12
        t_d = run.decoherence_time(0.01)
        j = int(np.searchsorted(run.series.times, t_d))
        assert run.distance_to_collapse(j) <= 0.01


class TestRunMeasurement:
    def test_invariants_recorded(self):
        _, run = spin_run(4)
        inv = run.invariants
        assert inv["norm_drift"] <= 1e-10
        assert inv["energy_drift"] <= 1e-9
        assert inv["reduced_trace_drift"] <= 1e-10

    def test_populations_constant_under_dephasing(self):
        _, run = spin_run(6, env_energies=np.linspace(0, 1, 6), pointer_energy=0.8)
        pops = run.populations
        assert np.max(np.abs(pops - pops[0])) <= 1e-10
        assert np.allclose(pops[0][:2], [0.5, 0.5])

    def test_dimension_check(self):
        h = build_spin_bath(2, [1.0, 1.0], [0.0, 0.0])
        m = MeasurementModel(EQUAL, 2, 2, (2,))
        with pytest.raises(DimensionMismatchError):
            run_measurement(m, h, TimeGrid(0, 1, 2))

    def test_invariant_breach_raised(self, monkeypatch):
        import eidsim.evolution as ev

        h = build_spin_bath(2, [1.0, 1.0], [0.0, 0.0])
        m = MeasurementModel(EQUAL, 2, 2, (2, 2))
        monkeypatch.setattr(ev.Propagator, "energy", lambda self, rows: float(np.random.rand()))
        with pytest.raises(InvariantBreachError):
            run_measurement(m, h, TimeGrid(0, 1, 5))

    def test_collapsed_target_in_correlated_basis(self):
        _, run = spin_run(3)
        b = correlated_basis(run.model)
        target = b.conj().T @ run.collapsed.entries @ b
        assert np.allclose(np.diag(target)[:2], [0.5, 0.5])
