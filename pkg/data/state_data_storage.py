"""
Stores quantum state data in immutable wrapper classes.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

HERMITIAN_TOLERANCE: float = 1e-12
PSD_TOLERANCE: float = 1e-10
TRACE_TOLERANCE: float = 1e-10


class NonHermitianError(ValueError):
    """
    Exception raised when an operator is not Hermitian within tolerance.
    """

    def __init__(self, message: str = 'The operator is not Hermitian'):
        super().__init__(message)


class InvalidStateError(Exception):
    """
    Exception raised when a density operator breaks one of its invariants.
    The failing check is kept in `check` so that callers can name it.
    """

    def __init__(self, check: str, message: Optional[str] = None):
        self.check = check
        super().__init__(message or f'State failed the "{check}" check')


@dataclass(frozen=True)
class DimProfile:
    """
    Local dimensions of a multipartite space. `parties` assigns every
    subsystem to a party; tensor powers keep the labels so that separability
    of the n-fold space is always taken with respect to the original parties.
    """
    dims: Tuple[int, ...]
    parties: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError('A dimension profile needs at least one subsystem')
        if any(d < 2 for d in dims):
            raise ValueError(f'Local dimensions must be at least 2, got {dims}')
        parties = tuple(range(len(dims))) if self.parties is None \
            else tuple(int(p) for p in self.parties)
        if len(parties) != len(dims):
            raise ValueError('Every subsystem needs exactly one party label')
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'parties', parties)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    @property
    def party_labels(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.parties)))

    @property
    def num_parties(self) -> int:
        return len(self.party_labels)

    def party_subsystems(self, label: int) -> Tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.parties) if p == label)

    def party_dims(self) -> Tuple[int, ...]:
        """
        Dimension of each party's joint space, in label order.
        """
        return tuple(int(np.prod([self.dims[i] for i in self.party_subsystems(label)]))
                     for label in self.party_labels)

    def grouping(self) -> Tuple[int, ...]:
        """
        Permutation of the subsystems that puts every party's subsystems next
        to each other, parties in label order.
        """
        return tuple(i for label in self.party_labels for i in self.party_subsystems(label))

    def restrict(self, keep: Sequence[int]) -> 'DimProfile':
        keep = sorted(keep)
        return DimProfile(tuple(self.dims[i] for i in keep),
                          tuple(self.parties[i] for i in keep))

    def concat(self, other: 'DimProfile') -> 'DimProfile':
        return DimProfile(self.dims + other.dims, self.parties + other.parties)


def bipartite(dim_a: int, dim_b: int) -> DimProfile:
    return DimProfile((dim_a, dim_b), (0, 1))


@dataclass(frozen=True, eq=False)
class HermitianOp:
    """
    A dense Hermitian matrix, stored row-major as a complex numpy array.
    The stored entries are the exact Hermitian part of the input.
    """
    entries: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise NonHermitianError(f'Expected a square matrix, got shape {matrix.shape}')
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > HERMITIAN_TOLERANCE:
            raise NonHermitianError()
        object.__setattr__(self, 'entries', (matrix + matrix.conj().T) / 2)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.entries


@dataclass(frozen=True, eq=False)
class MultiState:
    """
    A density operator together with its multipartite dimension profile.
    """
    profile: DimProfile
    op: HermitianOp

    def __post_init__(self):
        if self.op.dim != self.profile.total:
            raise InvalidStateError('dims', f'Matrix dimension {self.op.dim} does not match '
                                            f'the profile total {self.profile.total}')
        if abs(np.trace(self.op.entries).real - 1.0) > TRACE_TOLERANCE:
            raise InvalidStateError('trace')
        if np.linalg.eigvalsh(self.op.entries)[0] < -PSD_TOLERANCE:
            raise InvalidStateError('psd')

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries

    @property
    def dim(self) -> int:
        return self.op.dim

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, profile: DimProfile) -> 'MultiState':
        try:
            op = HermitianOp(matrix)
        except NonHermitianError as error:
            raise InvalidStateError('hermitian', str(error)) from error
        return cls(profile, op)


@dataclass(frozen=True)
class IsotropicParams:
    """
    Parameters of the isotropic state F·Φ(K) + (1−F)·(I−Φ(K))/(K²−1).
    """
    K: int
    fidelity: float

    def __post_init__(self):
        if int(self.K) < 2:
            raise ValueError(f'K must be at least 2, got {self.K}')
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError(f'The fidelity must lie in [0, 1], got {self.fidelity}')


@dataclass(frozen=True, eq=False)
class SeparableDecomposition:
    """
    Convex combination of product pure states, optionally scaled into the
    separable cone. `factors[j]` holds one unit vector per party (label order)
    for term j.
    """
    weights: np.ndarray
    factors: Tuple[Tuple[np.ndarray, ...], ...]
    profile: DimProfile
    scale: float = 1.0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or len(weights) != len(self.factors):
            raise ValueError('One weight is needed per product term')
        if len(weights) and np.min(weights) < 0:
            raise ValueError('Weights must be non-negative')
        if len(weights) and abs(np.sum(weights) - 1.0) > 1e-9:
            raise ValueError('Weights must sum to one')
        if self.scale < 0:
            raise ValueError('The cone scale must be non-negative')
        object.__setattr__(self, 'weights', weights)

    @property
    def terms(self) -> int:
        return len(self.weights)
