"""
Tests para el álgebra osp(1|2): Ř(u), Yang-Baxter, Hamiltoniano y
matriz de transferencia.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.core.exceptions import InvalidParameterError, PoleError, SizeGuardError
from app.physics import algebra
from app.physics.models import GradedMatrix


class TestLocalGenerators:
    """Tests para α, P^g y E^g."""

    def test_alpha_inverse_is_exact(self):
        product = algebra.build_alpha() @ algebra.build_alpha_inverse()
        assert product.distance(GradedMatrix.identity()) == 0.0

    def test_graded_permutation_squares_to_identity(self):
        P = algebra.build_graded_permutation()
        assert (P @ P).distance(GradedMatrix.identity(2)) < 1e-14

    def test_E_squares_to_minus_E(self):
        E = algebra.build_E()
        assert ((E @ E) + E).max_abs() < 1e-14

    def test_graded_permutation_signs(self):
        """Los dos estados impares (1 y 3) recogen el signo −1."""
        P = algebra.build_graded_permutation()
        assert P.entry((1, 1), (1, 1)) == -1
        assert P.entry((2, 2), (2, 2)) == 1
        assert P.entry((3, 1), (1, 3)) == -1
        assert P.entry((2, 1), (1, 2)) == 1

    def test_brauer_relations(self):
        residuals = algebra.check_temperley_lieb()
        assert set(residuals) >= {"P^2 = I", "E^2 = -E", "P E = E", "E1 E2 E1 = E1"}
        assert max(residuals.values()) < 1e-14

    def test_traces(self):
        """tr P^g = tr E^g = −1, de donde tr h = −5/3."""
        assert np.trace(algebra.build_graded_permutation().data) == pytest.approx(-1.0)
        assert np.trace(algebra.build_E().data) == pytest.approx(-1.0)
        assert np.trace(algebra.local_hamiltonian().data) == pytest.approx(-5.0 / 3.0)


class TestRCheck:
    """Tests para Ř(u)."""

    def test_identity_at_zero(self):
        assert algebra.build_R_check(0.0).distance(GradedMatrix.identity(2)) < 1e-14

    def test_value_at_one(self):
        """Ř(1) = I + P^g + 2E^g."""
        expected = (
            GradedMatrix.identity(2)
            + algebra.build_graded_permutation()
            + algebra.build_E() * 2.0
        )
        assert algebra.build_R_check(1.0).distance(expected) < 1e-14

    def test_pole_raises(self):
        with pytest.raises(PoleError):
            algebra.build_R_check(1.5)

    def test_R_is_permuted_R_check(self):
        u = 0.37
        R = algebra.build_R(u)
        expected = algebra.build_permutation() @ algebra.build_R_check(u)
        assert R.distance(expected) == 0.0


class TestYangBaxter:
    """Tests para la ecuación de Yang-Baxter trenzada."""

    def test_reference_point(self):
        assert algebra.check_graded_ybe(0.3, 0.7) < 1e-12

    @given(
        u=st.floats(min_value=-0.7, max_value=0.7),
        v=st.floats(min_value=-0.7, max_value=0.7),
    )
    @settings(max_examples=25, deadline=None)
    def test_random_pairs(self, u, v):
        assert algebra.check_graded_ybe(u, v) < 1e-12

    def test_wrong_argument_order_fails(self):
        """Con (u, u+v, v) en ambos lados la relación no se cumple."""
        identity = np.eye(3)
        u, v = 0.3, 0.7

        def first(x):
            return np.kron(algebra.build_R_check(x).data, identity)

        def second(x):
            return np.kron(identity, algebra.build_R_check(x).data)

        lhs = first(u) @ second(u + v) @ first(v)
        rhs = second(u) @ first(u + v) @ second(v)
        assert np.max(np.abs(lhs - rhs)) > 1e-3


class TestHamiltonian:
    """Tests para el Hamiltoniano periódico."""

    def test_shape_and_reality(self):
        H = algebra.build_hamiltonian(3, 1.0)
        assert H.data.shape == (27, 27)
        assert np.all(np.isreal(H.data))

    def test_pseudo_symmetry(self):
        H = algebra.build_hamiltonian(4, -1.0)
        assert algebra.pseudo_symmetry_defect(H) < 1e-12

    def test_not_symmetric_in_product_basis(self):
        H = algebra.build_hamiltonian(3, 1.0).data
        assert np.max(np.abs(H - H.T)) > 0.1

    def test_linear_in_J(self):
        H1 = algebra.build_hamiltonian(3, 1.0)
        H2 = algebra.build_hamiltonian(3, -2.5)
        assert H2.distance(H1 * -2.5) < 1e-12

    def test_mean_energy_per_bond(self):
        """tr H / 3^N = N J tr(h)/9 = −5NJ/27."""
        N, J = 4, 1.0
        H = algebra.build_hamiltonian(N, J).data
        assert np.trace(H) / 3 ** N == pytest.approx(-5.0 * N * J / 27.0)

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            algebra.build_hamiltonian_sparse(11, 1.0)

    def test_single_site_rejected(self):
        with pytest.raises(InvalidParameterError):
            algebra.build_hamiltonian_sparse(1, 1.0)

    def test_magnetization_is_conserved(self):
        N = 3
        H = algebra.build_hamiltonian(N, 1.0).data
        sectors = algebra.magnetization_sectors(N)
        assert sum(len(index) for index in sectors.values()) == 3 ** N
        assert sorted(sectors) == list(range(-N, N + 1))
        for w, index in sectors.items():
            outside = np.setdiff1d(np.arange(3 ** N), index)
            assert np.max(np.abs(H[np.ix_(outside, index)])) == 0.0


class TestEmbedding:
    """Tests para embed_two_site."""

    def test_periodic_bond_matches_permuted_sites(self):
        """El enlace (N, 1) es el (1, N) con el operador conjugado por P."""
        h = algebra.local_hamiltonian().data.real
        P = algebra.build_permutation().data
        forward = algebra.embed_two_site(h, 3, 1, 3).toarray()
        backward = algebra.embed_two_site(P @ h @ P, 1, 3, 3).toarray()
        assert np.max(np.abs(forward - backward)) < 1e-14

    def test_same_site_rejected(self):
        with pytest.raises(InvalidParameterError):
            algebra.embed_two_site(np.eye(9), 2, 2, 3)


class TestTransferMatrix:
    """Tests para T(u) y su relación con H."""

    def test_hamiltonian_from_transfer(self):
        N, J = 4, 1.0
        derived = algebra.hamiltonian_from_transfer(N, J)
        assert derived.distance(algebra.build_hamiltonian(N, J)) < 1e-6

    def test_transfer_matrices_commute(self):
        a = algebra.build_transfer_matrix(0.2, 3)
        b = algebra.build_transfer_matrix(0.7, 3)
        assert algebra.commutator_norm(a, b) < 1e-10

    def test_transfer_commutes_with_hamiltonian(self):
        T = algebra.build_transfer_matrix(0.4, 3)
        H = algebra.build_hamiltonian(3, 1.0)
        assert algebra.commutator_norm(T, H) < 1e-10

    def test_transfer_at_zero_is_shift(self):
        """T(0) es el desplazamiento cíclico: una matriz de permutación."""
        T0 = algebra.build_transfer_matrix(0.0, 3).data
        assert np.allclose(np.abs(T0).sum(axis=1), 1.0)

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            algebra.build_transfer_matrix(0.1, 9)
