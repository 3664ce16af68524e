"""
Constructors for the named states used throughout the package, plus seeded
random-state generation.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy.stats import unitary_group

from data.state_data_storage import DimProfile, HermitianOp, IsotropicParams, MultiState, \
    SeparableDecomposition, bipartite
from tensor_core import product_vector, decomposition_matrix, expectation


def _generator(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _gaussian_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vector / np.linalg.norm(vector)


def max_entangled_vector(K: int) -> np.ndarray:
    vector = np.zeros(K * K, dtype=complex)
    vector[[i * K + i for i in range(K)]] = 1.0 / np.sqrt(K)
    return vector


def max_entangled(K: int) -> MultiState:
    """
    Φ(K) = Σ_ij |ii⟩⟨jj| / K on K⊗K.

    :param K: The local dimension, at least 2.
    :return: The maximally entangled state.
    """
    if K < 2:
        raise ValueError(f'K must be at least 2, got {K}')
    vector = max_entangled_vector(K)
    return MultiState(bipartite(K, K), HermitianOp(np.outer(vector, vector.conj())))


def maximally_mixed(profile: DimProfile) -> MultiState:
    return MultiState(profile, HermitianOp(np.eye(profile.total) / profile.total))


def isotropic(params: IsotropicParams) -> MultiState:
    """
    F·Φ(K) + (1−F)·(I−Φ(K))/(K²−1).
    """
    K, fidelity = int(params.K), params.fidelity
    phi = max_entangled(K).matrix
    complement = (np.eye(K * K) - phi) / (K * K - 1)
    return MultiState(bipartite(K, K), HermitianOp(fidelity * phi + (1 - fidelity) * complement))


def boundary_isotropic(K: int) -> MultiState:
    """
    The separable isotropic state at the edge of the separable set, F = 1/K.
    """
    return isotropic(IsotropicParams(K, 1.0 / K))


def isotropic_fidelity(rho: MultiState, K: int) -> float:
    """
    tr(ρΦ(K)) for a state on K⊗K.
    """
    return expectation(max_entangled(K), rho)


def pure_state(vector: np.ndarray, profile: DimProfile) -> MultiState:
    vector = np.asarray(vector, dtype=complex)
    vector = vector / np.linalg.norm(vector)
    return MultiState(profile, HermitianOp(np.outer(vector, vector.conj())))


def random_state(profile: DimProfile, rank: int, seed) -> MultiState:
    """
    ρ = GG†/tr(GG†) with a standard complex Gaussian d×rank matrix G.

    :param profile: Dimension profile of the state.
    :param rank: Rank of the state, between 1 and the total dimension.
    :param seed: Anything numpy accepts as a seed.
    :return: A random state, deterministic in the seed.
    """
    if not 1 <= rank <= profile.total:
        raise ValueError(f'The rank must lie in [1, {profile.total}], got {rank}')
    rng = _generator(seed)
    gaussian = rng.standard_normal((profile.total, rank)) + 1j * rng.standard_normal((profile.total, rank))
    matrix = gaussian @ gaussian.conj().T
    return MultiState(profile, HermitianOp(matrix / np.trace(matrix).real))


def _random_factors(profile: DimProfile, rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    return tuple(_gaussian_vector(d, rng) for d in profile.party_dims())


def random_product_pure(profile: DimProfile, seed) -> Tuple[MultiState, Tuple[np.ndarray, ...]]:
    """
    A random product pure state and its local unit vectors (one per party).
    """
    factors = _random_factors(profile, _generator(seed))
    return pure_state(product_vector(factors, profile), profile), factors


def random_separable(profile: DimProfile, terms: int, seed) -> Tuple[MultiState, SeparableDecomposition]:
    """
    A random convex combination of `terms` product pure states, with the
    decomposition that produced it.
    """
    if terms < 1:
        raise ValueError(f'At least one term is needed, got {terms}')
    rng = _generator(seed)
    factors = tuple(_random_factors(profile, rng) for _ in range(terms))
    weights = rng.dirichlet(np.ones(terms)) if terms > 1 else np.ones(1)
    decomposition = SeparableDecomposition(weights, factors, profile)
    return MultiState(profile, HermitianOp(decomposition_matrix(decomposition))), decomposition


def werner(d: int, p: float) -> MultiState:
    """
    p·P_anti/dim(anti) + (1−p)·P_sym/dim(sym) on d⊗d.

    :param d: The local dimension.
    :param p: The weight of the antisymmetric subspace.
    """
    if d < 2:
        raise ValueError(f'd must be at least 2, got {d}')
    if not 0.0 <= p <= 1.0:
        raise ValueError(f'p must lie in [0, 1], got {p}')
    swap = swap_operator(d)
    identity = np.eye(d * d)
    antisymmetric = (identity - swap) / 2
    symmetric = (identity + swap) / 2
    matrix = p * 2 / (d * d - d) * antisymmetric + (1 - p) * 2 / (d * d + d) * symmetric
    return MultiState(bipartite(d, d), HermitianOp(matrix))


def swap_operator(d: int) -> np.ndarray:
    swap = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            swap[i * d + j, j * d + i] = 1.0
    return swap


def haar_unitary(dim: int, seed) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=_generator(seed))


def computational_product(indices: Sequence[int], profile: DimProfile) -> MultiState:
    """
    The product basis state |i_1 ... i_k⟩ in the profile's subsystem order.
    """
    vector = np.zeros(profile.total, dtype=complex)
    vector[int(np.ravel_multi_index(tuple(indices), profile.dims))] = 1.0
    return pure_state(vector, profile)
