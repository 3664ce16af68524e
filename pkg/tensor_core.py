"""
Dense Hermitian linear algebra over multipartite tensor-product spaces.

Matrices are numpy arrays stored row-major; subsystem i of a profile with dims
(d_0, ..., d_{k-1}) is the i-th tensor factor, so that a basis index reads
i_0·d_1···d_{k-1} + ... + i_{k-1}. Subsystem indices are 0-based. All
logarithms are base 2.
"""

from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from data.state_data_storage import DimProfile, HermitianOp, MultiState, \
    NonHermitianError, HERMITIAN_TOLERANCE

SUPPORT_TOLERANCE: float = 1e-12
LEAKAGE_TOLERANCE: float = 1e-10

Operator = Union[HermitianOp, MultiState, np.ndarray]


class DimensionMismatchError(ValueError):
    """
    Exception raised when operands, subsystem sets or cuts do not fit together.
    """

    def __init__(self, message: str = 'Operand dimensions do not match'):
        super().__init__(message)


def matrix_of(operator: Operator) -> np.ndarray:
    """
    Returns the complex matrix behind any of the operator representations.
    """
    if isinstance(operator, (HermitianOp, MultiState)):
        return operator.matrix
    return np.asarray(operator, dtype=complex)


def check_hermitian(matrix: np.ndarray) -> np.ndarray:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise NonHermitianError(f'Expected a square matrix, got shape {matrix.shape}')
    if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > HERMITIAN_TOLERANCE * max(1.0, np.max(np.abs(matrix))):
        raise NonHermitianError()
    return (matrix + matrix.conj().T) / 2


def kron(a: Operator, b: Operator) -> HermitianOp:
    """
    Tensor (Kronecker) product of two Hermitian operators.
    """
    return HermitianOp(np.kron(matrix_of(a), matrix_of(b)))


def tensor_states(rho: MultiState, sigma: MultiState) -> MultiState:
    """
    ρ ⊗ σ, keeping the party labels of both factors.
    """
    return MultiState(rho.profile.concat(sigma.profile), kron(rho, sigma))


def tensor_power(rho: MultiState, n: int) -> MultiState:
    """
    ρ^⊗n, ordered copy by copy (A1 B1 A2 B2 ...).
    """
    if n < 1:
        raise ValueError(f'The number of copies must be positive, got {n}')
    result = rho
    for _ in range(n - 1):
        result = tensor_states(result, rho)
    return result


def permute_subsystems(matrix: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """
    Reorders the tensor factors of an operator: factor j of the result is
    factor order[j] of the input.
    """
    k = len(dims)
    tensor = matrix.reshape(tuple(dims) * 2)
    axes = list(order) + [k + i for i in order]
    new_dims = [dims[i] for i in order]
    size = int(np.prod(new_dims))
    return tensor.transpose(axes).reshape(size, size)


def group_by_party(operator: Operator, profile: DimProfile) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """
    Rewrites the operator so that each party's subsystems are adjacent.

    :return: The regrouped matrix and the party dimensions.
    """
    return permute_subsystems(matrix_of(operator), profile.dims, profile.grouping()), profile.party_dims()


def product_vector(local_vectors: Sequence[np.ndarray], profile: DimProfile) -> np.ndarray:
    """
    Builds the product vector of one local vector per party (label order) and
    returns it in the profile's subsystem ordering.
    """
    grouped = local_vectors[0]
    for vector in local_vectors[1:]:
        grouped = np.kron(grouped, vector)
    order = profile.grouping()
    grouped_dims = [profile.dims[i] for i in order]
    tensor = grouped.reshape(grouped_dims)
    return tensor.transpose(np.argsort(order)).reshape(-1)


def decomposition_matrix(decomposition) -> np.ndarray:
    """
    Reconstructs the (possibly scaled) operator of a SeparableDecomposition.
    """
    profile = decomposition.profile
    result = np.zeros((profile.total, profile.total), dtype=complex)
    for weight, factors in zip(decomposition.weights, decomposition.factors):
        vector = product_vector(factors, profile)
        result += weight * np.outer(vector, vector.conj())
    return decomposition.scale * result


def _check_subsystems(indices: Iterable[int], count: int) -> Tuple[int, ...]:
    indices = tuple(sorted(set(int(i) for i in indices)))
    if any(i < 0 or i >= count for i in indices):
        raise DimensionMismatchError(f'Subsystem indices {indices} out of range for {count} subsystems')
    return indices


def partial_trace(rho: MultiState, keep: Iterable[int]) -> MultiState:
    """
    Traces out every subsystem that is not in `keep`.
    """
    keep = _check_subsystems(keep, len(rho.profile.dims))
    if not keep:
        raise DimensionMismatchError('The keep set must not be empty')
    reduced = partial_trace_matrix(rho.matrix, rho.profile.dims, keep)
    return MultiState.from_matrix(reduced, rho.profile.restrict(keep))


def partial_trace_matrix(matrix: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    dims = list(dims)
    tensor = matrix.reshape(dims * 2)
    for i in sorted(set(range(len(dims))) - set(keep), reverse=True):
        k = len(dims)
        tensor = np.trace(tensor, axis1=i, axis2=k + i)
        del dims[i]
    size = int(np.prod(dims))
    return tensor.reshape(size, size)


def partial_transpose(rho: Operator, cut: Iterable[int], dims: Sequence[int] = None) -> HermitianOp:
    """
    Transposes the subsystems in `cut`. The cut and its complement must both
    be non-empty. `dims` is needed when a bare matrix is passed.
    """
    if dims is None:
        if not isinstance(rho, MultiState):
            raise DimensionMismatchError('A bare operator needs explicit dims')
        dims = rho.profile.dims
    return HermitianOp(partial_transpose_matrix(matrix_of(rho), dims, cut))


def partial_transpose_matrix(matrix: np.ndarray, dims: Sequence[int], cut: Iterable[int]) -> np.ndarray:
    k = len(dims)
    cut = _check_subsystems(cut, k)
    if not cut or len(cut) == k:
        raise DimensionMismatchError(f'The cut {cut} does not split {k} subsystems into two groups')
    if matrix.shape[0] != int(np.prod(dims)):
        raise DimensionMismatchError()
    axes = list(range(2 * k))
    for i in cut:
        axes[i], axes[k + i] = axes[k + i], axes[i]
    return matrix.reshape(tuple(dims) * 2).transpose(axes).reshape(matrix.shape)


def eigh(h: Operator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues in ascending order and orthonormal eigenvectors (columns).
    """
    return np.linalg.eigh(check_hermitian(matrix_of(h)))


def top_eigenvector(matrix: np.ndarray, tolerance: float = 1e-12) -> Tuple[float, np.ndarray]:
    """
    Largest eigenvalue and its eigenvector. Among degenerate top eigenvalues
    the one with the lowest index (in ascending order) wins.
    """
    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    top = values[-1]
    index = int(np.argmax(values >= top - tolerance))
    return float(values[index]), vectors[:, index]


def trace_norm(h: Operator) -> float:
    values = np.linalg.eigvalsh(check_hermitian(matrix_of(h)))
    return float(np.sum(np.abs(values)))


def positive_part_trace(h: Operator) -> float:
    """
    tr(h)_+, the sum of the positive eigenvalues.
    """
    values = np.linalg.eigvalsh(check_hermitian(matrix_of(h)))
    return float(np.sum(np.clip(values, 0.0, None)))


def _entropy_terms(values: np.ndarray) -> float:
    values = values[values > SUPPORT_TOLERANCE]
    return float(-np.sum(values * np.log2(values)))


def von_neumann_entropy(rho: Operator) -> float:
    return max(0.0, _entropy_terms(np.linalg.eigvalsh(check_hermitian(matrix_of(rho)))))


def relative_entropy(rho: Operator, sigma: Operator) -> float:
    """
    S(ρ||σ) = tr ρ(log ρ − log σ) in bits; +inf when ρ leaks out of the
    support of σ (eigenvalues of σ below 1e-12 count as outside).
    """
    rho_matrix, sigma_matrix = matrix_of(rho), matrix_of(sigma)
    if rho_matrix.shape != sigma_matrix.shape:
        raise DimensionMismatchError(f'Cannot compare {rho_matrix.shape} with {sigma_matrix.shape}')
    sigma_values, sigma_vectors = np.linalg.eigh(check_hermitian(sigma_matrix))
    rotated = np.real(np.diag(sigma_vectors.conj().T @ rho_matrix @ sigma_vectors))
    inside = sigma_values > SUPPORT_TOLERANCE
    if np.any(rotated[~inside] > LEAKAGE_TOLERANCE):
        return float('inf')
    cross = -float(np.sum(rotated[inside] * np.log2(sigma_values[inside])))
    value = cross - _entropy_terms(np.linalg.eigvalsh(check_hermitian(rho_matrix)))
    return max(0.0, value)


def log_derivative(sigma: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """
    Fréchet derivative of the natural matrix logarithm at a positive definite
    σ, applied to `direction`.
    """
    values, vectors = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    values = np.clip(values, 1e-300, None)
    logs = np.log(values)
    numerator = logs[:, None] - logs[None, :]
    denominator = values[:, None] - values[None, :]
    close = np.abs(denominator) <= 1e-12 * np.maximum(values[:, None], values[None, :])
    divided = np.where(close, 1.0 / values[:, None], numerator / np.where(close, 1.0, denominator))
    rotated = vectors.conj().T @ direction @ vectors
    return vectors @ (divided * rotated) @ vectors.conj().T


def expectation(operator: Operator, rho: Operator) -> float:
    """
    tr(operator · ρ) for Hermitian arguments.
    """
    return float(np.real(np.sum(matrix_of(operator).T * matrix_of(rho))))
