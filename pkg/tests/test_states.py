"""
Tests for named and random states and the state containers.
"""

import numpy as np
import pytest

from data.state_data_storage import DimProfile, HermitianOp, InvalidStateError, IsotropicParams, MultiState, \
    NonHermitianError, bipartite
from sep_geometry import is_ppt
from states import boundary_isotropic, computational_product, haar_unitary, isotropic, isotropic_fidelity, \
    max_entangled, random_product_pure, random_separable, random_state, werner
from tensor_core import decomposition_matrix, partial_transpose


class TestMultiState:
    def test_rejects_non_psd(self):
        with pytest.raises(InvalidStateError) as info:
            MultiState.from_matrix(np.diag([1.5, -0.5, 0.0, 0.0]), bipartite(2, 2))
        assert info.value.check == 'psd'

    def test_rejects_wrong_trace(self):
        with pytest.raises(InvalidStateError) as info:
            MultiState.from_matrix(np.eye(4) / 2, bipartite(2, 2))
        assert info.value.check == 'trace'

    def test_rejects_size_mismatch(self):
        with pytest.raises(InvalidStateError) as info:
            MultiState.from_matrix(np.eye(3) / 3, bipartite(2, 2))
        assert info.value.check == 'dims'

    def test_rejects_non_hermitian(self):
        matrix = np.eye(4, dtype=complex) / 4
        matrix[0, 1] = 0.1
        with pytest.raises(InvalidStateError) as info:
            MultiState.from_matrix(matrix, bipartite(2, 2))
        assert info.value.check == 'hermitian'

    def test_hermitian_op_stores_hermitian_part(self):
        with pytest.raises(NonHermitianError):
            HermitianOp(np.ones((2, 3)))


class TestDimProfile:
    def test_default_parties(self):
        profile = DimProfile((2, 3, 2))
        assert profile.parties == (0, 1, 2)
        assert profile.total == 12

    def test_rejects_trivial_dimension(self):
        with pytest.raises(ValueError):
            DimProfile((1, 2))

    def test_grouping_and_party_dims(self):
        profile = DimProfile((2, 3, 2, 3), (0, 1, 0, 1))
        assert profile.grouping() == (0, 2, 1, 3)
        assert profile.party_dims() == (4, 9)


@pytest.mark.parametrize('K', [2, 3, 4])
def test_max_entangled_is_pure_with_unit_fidelity(K):
    phi = max_entangled(K)
    np.testing.assert_allclose(np.trace(phi.matrix @ phi.matrix).real, 1.0, atol=1e-12)
    np.testing.assert_allclose(isotropic_fidelity(phi, K), 1.0, atol=1e-12)


@pytest.mark.parametrize('K', [2, 3])
@pytest.mark.parametrize('fidelity', [0.0, 0.2, 0.7, 1.0])
def test_isotropic_fidelity_roundtrip(K, fidelity):
    np.testing.assert_allclose(isotropic_fidelity(isotropic(IsotropicParams(K, fidelity)), K), fidelity, atol=1e-12)


def test_isotropic_params_are_checked():
    with pytest.raises(ValueError):
        IsotropicParams(1, 0.5)
    with pytest.raises(ValueError):
        IsotropicParams(2, 1.5)


@pytest.mark.parametrize('K', [2, 3])
def test_isotropic_ppt_threshold_is_one_over_K(K):
    low, high = 0.0, 1.0
    while high - low > 1e-9:
        middle = (low + high) / 2
        if is_ppt(isotropic(IsotropicParams(K, middle)))[0]:
            low = middle
        else:
            high = middle
    np.testing.assert_allclose(low, 1.0 / K, atol=1e-6)
    assert is_ppt(boundary_isotropic(K))[0]


@pytest.mark.parametrize('p, expected', [(0.0, True), (0.5, True), (0.6, False), (1.0, False)])
def test_werner_ppt_threshold(p, expected):
    assert is_ppt(werner(3, p))[0] is expected


def test_fully_antisymmetric_qubit_werner_state_is_the_singlet():
    singlet = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2)
    np.testing.assert_allclose(werner(2, 1.0).matrix, np.outer(singlet, singlet), atol=1e-12)


@pytest.mark.parametrize('seed', range(5))
@pytest.mark.parametrize('d, p', [(2, 0.3), (3, 0.8)])
def test_werner_state_is_invariant_under_twirling_unitaries(seed, d, p):
    rho = werner(d, p).matrix
    unitary = np.kron(*(2 * [haar_unitary(d, seed)]))
    np.testing.assert_allclose(unitary @ rho @ unitary.conj().T, rho, atol=1e-12)


def test_random_state_is_deterministic_in_seed():
    first = random_state(bipartite(2, 3), 3, 42)
    second = random_state(bipartite(2, 3), 3, 42)
    np.testing.assert_array_equal(first.matrix, second.matrix)
    assert np.linalg.matrix_rank(first.matrix, tol=1e-10) == 3


def test_random_state_follows_the_seeded_gaussian_stream():
    rng = np.random.default_rng(42)
    gaussian = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    expected = gaussian @ gaussian.conj().T
    expected /= np.trace(expected).real
    np.testing.assert_allclose(random_state(bipartite(2, 3), 3, 42).matrix, expected, atol=1e-15)
    assert not np.allclose(random_state(bipartite(2, 3), 3, 43).matrix, expected)


def test_random_state_rank_is_checked():
    with pytest.raises(ValueError):
        random_state(bipartite(2, 2), 5, 0)


@pytest.mark.parametrize('dims', [(2, 2), (2, 3), (3, 3)])
def test_random_separable_has_positive_partial_transpose(dims):
    for seed in range(20):
        rho, _ = random_separable(bipartite(*dims), 1 + seed % 6, seed)
        assert np.linalg.eigvalsh(partial_transpose(rho, [1]).matrix)[0] >= -1e-12


@pytest.mark.parametrize('seed', range(5))
def test_random_separable_matches_its_decomposition(seed):
    rho, decomposition = random_separable(bipartite(2, 3), 4, seed)
    np.testing.assert_allclose(decomposition_matrix(decomposition), rho.matrix, atol=1e-12)
    assert is_ppt(rho)[0]


def test_random_product_pure_is_product():
    rho, factors = random_product_pure(bipartite(3, 3), 5)
    np.testing.assert_allclose(rho.matrix, np.kron(np.outer(factors[0], factors[0].conj()),
                                                   np.outer(factors[1], factors[1].conj())), atol=1e-12)


def test_computational_product():
    state = computational_product([1, 0], bipartite(2, 3))
    assert state.matrix[3, 3] == pytest.approx(1.0)
