import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eidsim import (
    DensityOperator,
    DimensionMismatchError,
    DomainError,
    InvalidPartitionError,
    Operator,
    PureState,
    commutator_norm,
    evolve_unitary,
    partial_trace,
    pauli,
    spectral,
    tensor,
)
from eidsim.linalg import basis_state, bloch_state, embed, identity, spectral_norm

from oracles import (
    SX,
    SY,
    SZ,
    expm_unitary,
    kron_all,
    ptrace_loops,
    random_hermitian,
    random_state,
)

seeds = st.integers(0, 2**32 - 1)


def herm(seed, d, scale=1.0):
    return Operator(random_hermitian(np.random.default_rng(seed), d, scale))


def rand_density(rng, dims):
    d = math.prod(dims)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return DensityOperator(rho / np.trace(rho), dims)


# ---------------------------------------------------------------- types


class TestOperator:
    def test_factor_dims_product_checked(self):
        with pytest.raises(DimensionMismatchError):
            Operator(np.eye(4), (2, 3))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatchError):
            Operator(np.ones((2, 3)))

    def test_default_single_factor(self):
        assert Operator(np.eye(3)).factor_dims == (3,)

    def test_entries_read_only(self):
        op = Operator(np.eye(2))
        with pytest.raises(ValueError):
            op.entries[0, 0] = 2

    def test_algebra(self):
        a, b = pauli("x"), pauli("z")
        assert np.allclose((a + b).entries, SX + SZ)
        assert np.allclose((a - b).entries, SX - SZ)
        assert np.allclose((2 * a).entries, 2 * SX)
        assert np.allclose((a * 0.5).entries, 0.5 * SX)
        assert np.allclose((-a).entries, -SX)
        assert np.allclose((a @ b).entries, SX @ SZ)
        assert np.allclose(a.dag().entries, SX)

    def test_numpy_scalar_multiplication_keeps_operator(self):
        assert isinstance(np.float64(2.0) * pauli("x"), Operator)

    def test_hermitian_flag(self):
        assert pauli("y").is_hermitian()
        assert not Operator(np.array([[0, 1], [0, 0]])).is_hermitian()


class TestPureState:
    def test_norm_enforced(self):
        with pytest.raises(DomainError):
            PureState([1.0, 1.0])
        psi = PureState([1.0, 1.0], normalize=True)
        assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-15

    def test_zero_vector_cannot_normalize(self):
        with pytest.raises(DomainError):
            PureState([0.0, 0.0], normalize=True)

    def test_overlap_conjugates_left(self):
        a = PureState([1, 1j], normalize=True)
        b = basis_state(1, 2)
        assert np.isclose(a.overlap(b), -1j / math.sqrt(2))

    def test_operator_applies_to_state(self):
        psi = pauli("x") @ basis_state(0, 2)
        assert np.allclose(psi.amplitudes, [0, 1])

    def test_bloch_state_poles(self):
        assert np.allclose(bloch_state(0.0).amplitudes, [1, 0])
        assert np.allclose(np.abs(bloch_state(math.pi).amplitudes), [0, 1])


class TestDensityOperator:
    def test_trace_checked(self):
        with pytest.raises(DomainError):
            DensityOperator(np.eye(2))

    def test_positivity_checked(self):
        with pytest.raises(DomainError):
            DensityOperator(np.diag([1.5, -0.5]))

    def test_hermiticity_checked(self):
        with pytest.raises(DomainError):
            DensityOperator(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_purity(self):
        assert DensityOperator(np.eye(2) / 2).purity() == pytest.approx(0.5)
        assert basis_state(0, 3).density().purity() == pytest.approx(1.0)


# ---------------------------------------------------------------- tensor


class TestTensor:
    def test_identity(self):
        out = tensor(identity(2), identity(2))
        assert np.array_equal(out.entries, np.eye(4))

    def test_zz(self):
        out = tensor(pauli("z"), pauli("z"))
        assert np.array_equal(out.entries, np.diag([1, -1, -1, 1]))

    def test_dims_bookkeeping(self):
        out = tensor(identity(2), identity(3))
        assert out.factor_dims == (2, 3)
        assert out.dim == 6

    def test_states(self):
        psi = tensor(basis_state(1, 2), basis_state(0, 3))
        assert psi.factor_dims == (2, 3)
        assert np.argmax(np.abs(psi.amplitudes)) == 3

    def test_mixed_arguments_rejected(self):
        with pytest.raises(TypeError):
            tensor(identity(2), basis_state(0, 2))

    @given(seeds)
    def test_associative(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (Operator(random_hermitian(rng, d)) for d in (2, 3, 2))
        left = tensor(tensor(a, b), c)
        right = tensor(a, tensor(b, c))
        assert np.max(np.abs(left.entries - right.entries)) <= 1e-14 * np.max(np.abs(left.entries))
        assert left.factor_dims == right.factor_dims == (2, 3, 2)


def test_embed_matches_explicit_kron(rng):
    a = random_hermitian(rng, 2)
    op = embed(a, [2], (3, 2, 2))
    assert np.allclose(op.entries, kron_all(np.eye(3), np.eye(2), a))
    b = random_hermitian(rng, 6)
    # operator on factors (2, 0) in that order
    lifted = embed(b, [2, 0], (3, 2, 2))
    t = b.reshape(2, 3, 2, 3)
    expected = np.einsum("cadb,ef->aecbfd", t, np.eye(2)).reshape(12, 12)
    assert np.allclose(lifted.entries, expected)


# ---------------------------------------------------------------- partial trace


class TestPartialTrace:
    def test_product_state(self, rng):
        rho_s = rand_density(rng, (2,))
        rho_e = rand_density(rng, (3,))
        joint = DensityOperator(np.kron(rho_s.entries, rho_e.entries), (2, 3))
        out = partial_trace(joint, [0])
        assert np.allclose(out.entries, rho_s.entries, atol=1e-14)

    def test_bell_state(self):
        bell = PureState([1, 0, 0, 1], (2, 2), normalize=True)
        out = partial_trace(bell, [0])
        assert np.allclose(out.entries, np.eye(2) / 2, atol=1e-15)
        out = partial_trace(bell.density(), [0])
        assert np.allclose(out.entries, np.eye(2) / 2, atol=1e-15)

    def test_composition(self, rng):
        psi = PureState(random_state(rng, 24), (2, 3, 4))
        direct = partial_trace(psi, [0])
        staged = partial_trace(partial_trace(psi, [0, 1]), [0])
        assert np.max(np.abs(direct.entries - staged.entries)) <= 1e-12

    @pytest.mark.parametrize("keep", [[], [0, 1, 2]])
    def test_invalid_partition(self, keep):
        rho = DensityOperator(np.eye(8) / 8, (2, 2, 2))
        with pytest.raises(InvalidPartitionError):
            partial_trace(rho, keep)

    def test_out_of_range(self):
        with pytest.raises(InvalidPartitionError):
            partial_trace(DensityOperator(np.eye(4) / 4, (2, 2)), [5])

    @given(seeds, st.sampled_from([[0], [1], [2], [0, 2], [1, 2], [0, 1]]))
    def test_matches_loop_oracle(self, seed, keep):
        rng = np.random.default_rng(seed)
        dims = (2, 3, 2)
        rho = rand_density(rng, dims)
        out = partial_trace(rho, keep)
        assert np.max(np.abs(out.entries - ptrace_loops(rho.entries, dims, keep))) <= 1e-12
        assert abs(out.trace() - 1) <= 1e-12
        assert np.max(np.abs(out.entries - out.entries.conj().T)) <= 1e-12

    @given(seeds)
    def test_pure_and_mixed_routes_agree(self, seed):
        rng = np.random.default_rng(seed)
        psi = PureState(random_state(rng, 12), (3, 2, 2))
        a = partial_trace(psi, [0, 2])
        b = partial_trace(psi.density(), [0, 2])
        assert np.max(np.abs(a.entries - b.entries)) <= 1e-12

    def test_operator_input_returns_operator(self):
        out = partial_trace(Operator(np.eye(4), (2, 2)), [1])
        assert isinstance(out, Operator)
        assert np.allclose(out.entries, 2 * np.eye(2))


# ---------------------------------------------------------------- spectra


class TestSpectral:
    def test_sigma_z(self):
        dec = spectral(pauli("z"))
        assert np.allclose(dec.eigenvalues, [-1, 1])
        assert dec.multiplicities == (1, 1)

    def test_identity_fully_degenerate(self):
        dec = spectral(identity(2))
        assert np.allclose(dec.eigenvalues, [1])
        assert dec.multiplicities == (2,)

    def test_merge_within_tolerance(self):
        tol = 1e-9
        dec = spectral(Operator(np.diag([1.0, 1.0 + tol / 2])), tol)
        assert dec.multiplicities == (2,)
        split = spectral(Operator(np.diag([1.0, 1.0 + 10 * tol])), tol)
        assert split.multiplicities == (1, 1)

    def test_zero_matrix(self):
        dec = spectral(Operator(np.zeros((3, 3))))
        assert dec.multiplicities == (3,)

    def test_non_hermitian_rejected(self):
        with pytest.raises(DomainError):
            spectral(Operator(np.array([[0, 1], [0, 0]])))

    @given(seeds, st.sampled_from([2, 5, 16, 64, 256]))
    def test_reconstruction_and_projectors(self, seed, d):
        h = herm(seed, d)
        dec = spectral(h)
        assert np.max(np.abs(dec.reconstruct() - h.entries)) <= 1e-10
        projs = dec.projectors
        assert np.max(np.abs(sum(projs) - np.eye(d))) <= 1e-10
        if d <= 16:
            for i, p in enumerate(projs):
                for j, q in enumerate(projs):
                    target = p if i == j else np.zeros_like(p)
                    assert np.max(np.abs(p @ q - target)) <= 1e-10

    def test_degenerate_reconstruction(self, rng):
        u = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
        h = Operator(u @ np.diag([-1, -1, 0, 2, 2, 2]) @ u.conj().T)
        dec = spectral(h)
        assert dec.multiplicities == (2, 1, 3)
        assert np.allclose(dec.eigenvalues, [-1, 0, 2])
        assert np.max(np.abs(dec.reconstruct() - h.entries)) <= 1e-10


# ---------------------------------------------------------------- unitaries


class TestEvolveUnitary:
    def test_zero_hamiltonian(self):
        u = evolve_unitary(Operator(np.zeros((3, 3))), 1.7)
        assert np.allclose(u.entries, np.eye(3), atol=1e-15)

    def test_sigma_z_quarter_period(self):
        u = evolve_unitary(pauli("z"), math.pi / 2)
        expected = np.diag([np.exp(-1j * math.pi / 2), np.exp(1j * math.pi / 2)])
        assert np.allclose(u.entries, expected, atol=1e-15)

    @given(seeds, st.floats(-3, 3), st.floats(-3, 3))
    def test_unitary_and_group_property(self, seed, t1, t2):
        h = herm(seed, 8)
        u1, u2 = evolve_unitary(h, t1), evolve_unitary(h, t2)
        assert np.max(np.abs(u1.entries.conj().T @ u1.entries - np.eye(8))) <= 1e-12
        u12 = evolve_unitary(h, t1 + t2)
        assert np.max(np.abs(u1.entries @ u2.entries - u12.entries)) <= 1e-10

    @given(seeds, st.floats(-2, 2))
    def test_matches_expm(self, seed, t):
        h = herm(seed, 6)
        assert np.max(np.abs(evolve_unitary(h, t).entries - expm_unitary(h.entries, t))) <= 1e-10

    @given(seeds, st.floats(0, 5))
    def test_purity_conserved(self, seed, t):
        rng = np.random.default_rng(seed)
        rho = rand_density(rng, (4,))
        u = evolve_unitary(Operator(random_hermitian(rng, 4)), t).entries
        evolved = DensityOperator(u @ rho.entries @ u.conj().T)
        assert abs(evolved.purity() - rho.purity()) <= 1e-10

    def test_non_hermitian_rejected(self):
        with pytest.raises(DomainError):
            evolve_unitary(Operator(np.array([[0, 1], [0, 0]])), 1.0)


# ---------------------------------------------------------------- commutators


class TestCommutatorNorm:
    def test_self_commutes(self, rng):
        a = Operator(random_hermitian(rng, 5))
        assert commutator_norm(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_pauli_algebra(self):
        assert commutator_norm(pauli("x"), pauli("z")) == pytest.approx(2.0, abs=1e-14)
        # [x, z] = -2i y
        comm = SX @ SZ - SZ @ SX
        assert np.allclose(comm, -2j * SY)

    def test_diagonal_family(self, rng):
        a = Operator(np.diag(rng.normal(size=6)))
        b = Operator(np.diag(rng.normal(size=6)))
        assert commutator_norm(a, b) <= 1e-14

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            commutator_norm(identity(2), identity(3))

    def test_spectral_norm_of_empty(self):
        assert spectral_norm(np.zeros((0, 0))) == 0.0
